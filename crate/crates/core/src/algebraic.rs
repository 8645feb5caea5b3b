//! Real numbers of the form `a + b·√d` with rational `a, b, d`.
//!
//! These are exactly the roots of rational quadratics, which is all the
//! optimizer needs: crossing points of two quadratic costs and the values of
//! rational quadratics at such points. Comparison is exact.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Signed;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;
use crate::rat::Rat;

#[derive(Clone)]
pub struct Algebraic {
    a: Rat,
    b: Rat,
    /// Zero whenever `b` is zero; never a rational square otherwise.
    d: Rat,
}

fn int_sqrt_exact(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

/// Exact square root of a rational, if it has one.
pub fn rational_sqrt(x: &Rat) -> Option<Rat> {
    Some(Rat::new(int_sqrt_exact(&x.numer())?, int_sqrt_exact(&x.denom())?))
}

/// Sign of `a + b·√d`, `d ≥ 0`.
fn sign_surd(a: &Rat, b: &Rat, d: &Rat) -> Ordering {
    let sa = a.signum();
    let sb = if d.is_zero() { 0 } else { b.signum() };
    let s = if sb == 0 || sa == sb {
        if sa == 0 { sb } else { sa }
    } else if sa == 0 {
        sb
    } else {
        // opposite signs: the larger magnitude wins
        let lhs = a * a;
        let rhs = &(b * b) * d;
        match lhs.cmp(&rhs) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    };
    s.cmp(&0)
}

impl Algebraic {
    /// `a + b·√d`; panics on negative `d`.
    pub fn new(a: Rat, b: Rat, d: Rat) -> Algebraic {
        assert!(!d.is_negative(), "square root of a negative number");
        if b.is_zero() || d.is_zero() {
            return Algebraic::rational(a);
        }
        if let Some(r) = rational_sqrt(&d) {
            return Algebraic::rational(a + b * r);
        }
        Algebraic { a, b, d }
    }

    pub fn rational(a: Rat) -> Algebraic {
        Algebraic { a, b: Rat::zero(), d: Rat::zero() }
    }

    pub fn to_rational(&self) -> Option<&Rat> {
        self.b.is_zero().then_some(&self.a)
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn parts(&self) -> (&Rat, &Rat, &Rat) {
        (&self.a, &self.b, &self.d)
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64() + self.b.to_f64() * self.d.to_f64().sqrt()
    }

    /// Rational enclosure `[lo, hi]` of width at most `2^-bits·|b|`.
    pub fn enclose(&self, bits: u32) -> (Rat, Rat) {
        if self.b.is_zero() {
            return (self.a.clone(), self.a.clone());
        }
        // √d = √(n·m)/m for d = n/m
        let scale = BigInt::from(1) << bits;
        let nm = self.d.numer() * self.d.denom();
        let root = (&nm * &scale * &scale).sqrt();
        let denom = self.d.denom() * &scale;
        let lo = Rat::new(root.clone(), denom.clone());
        let hi = Rat::new(root + 1, denom);
        let (x, y) = (&self.a + &(&self.b * &lo), &self.a + &(&self.b * &hi));
        if x <= y { (x, y) } else { (y, x) }
    }

    /// Some rational strictly between `self` and `other`; they must differ.
    pub fn rational_between(&self, other: &Algebraic) -> Rat {
        let (lo, hi) = if self < other { (self, other) } else { (other, self) };
        assert!(lo != hi, "no rational strictly between equal numbers");
        let mut bits = 8;
        loop {
            let (_, a) = lo.enclose(bits);
            let (b, _) = hi.enclose(bits);
            if a < b {
                return (a + b) * Rat::new(1, 2);
            }
            bits *= 2;
        }
    }

    /// Value of `c[0]·x² + c[1]·x + c[2]`, in the same quadratic field as `x`.
    pub fn eval_quadratic(c: &[Rat; 3], x: &Algebraic) -> Algebraic {
        let (a, b, d) = (&x.a, &x.b, &x.d);
        let sq_a = &(a * a) + &(&(b * b) * d);
        let sq_b = &(a * b) * &Rat::from_int(2);
        let ra = &(&(&c[0] * &sq_a) + &(&c[1] * a)) + &c[2];
        let rb = &(&c[0] * &sq_b) + &(&c[1] * b);
        Algebraic::new(ra, rb, d.clone())
    }

    /// Real roots of `c[0]·x² + c[1]·x + c[2]` in increasing order, without
    /// multiplicity; `None` if the polynomial is identically zero.
    pub fn roots(c: &[Rat; 3]) -> Option<Vec<Algebraic>> {
        let [a, b, k] = c;
        if a.is_zero() {
            if b.is_zero() {
                return if k.is_zero() { None } else { Some(Vec::new()) };
            }
            return Some(vec![Algebraic::rational(-(k / b))]);
        }
        let disc = &(b * b) - &(&(a * k) * &Rat::from_int(4));
        if disc.is_negative() {
            return Some(Vec::new());
        }
        let two_a = a * &Rat::from_int(2);
        let centre = -(b / &two_a);
        if disc.is_zero() {
            return Some(vec![Algebraic::rational(centre)]);
        }
        let w = two_a.recip();
        let mut r = vec![Algebraic::new(centre.clone(), -w.clone(), disc.clone()), Algebraic::new(centre, w, disc)];
        r.sort();
        Some(r)
    }

    pub fn signum(&self) -> Ordering {
        sign_surd(&self.a, &self.b, &self.d)
    }
}

impl From<Rat> for Algebraic {
    fn from(r: Rat) -> Self {
        Algebraic::rational(r)
    }
}

impl Ord for Algebraic {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign of P + Q·√d1 + R·√d2
        let p = &self.a - &other.a;
        if other.b.is_zero() || self.d == other.d {
            let q = &self.b - &other.b;
            let d = if self.b.is_zero() { &other.d } else { &self.d };
            return sign_surd(&p, &q, d);
        }
        if self.b.is_zero() {
            return sign_surd(&p, &-other.b.clone(), &other.d);
        }
        let first = sign_surd(&p, &self.b, &self.d);
        let second = other.b.signum().cmp(&0).reverse();
        if first == Ordering::Equal {
            return second;
        }
        if second == Ordering::Equal || first == second {
            return first;
        }
        // compare (P + Q√d1)² with R²·d2
        let sq_a = &(&(&p * &p) + &(&(&self.b * &self.b) * &self.d)) - &(&(&other.b * &other.b) * &other.d);
        let sq_b = &(&p * &self.b) * &Rat::from_int(2);
        match sign_surd(&sq_a, &sq_b, &self.d) {
            Ordering::Greater => first,
            Ordering::Less => second,
            Ordering::Equal => Ordering::Equal,
        }
    }
}

impl PartialOrd for Algebraic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Algebraic {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Algebraic {}

impl PartialEq<Rat> for Algebraic {
    fn eq(&self, other: &Rat) -> bool {
        self.b.is_zero() && &self.a == other
    }
}

impl fmt::Display for Algebraic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", self.a);
        }
        if !self.a.is_zero() {
            write!(f, "{} ", self.a)?;
            f.write_str(if self.b.is_negative() { "- " } else { "+ " })?;
        } else if self.b.is_negative() {
            f.write_str("-")?;
        }
        let mag = self.b.abs();
        if !mag.is_one() {
            write!(f, "{mag}*")?;
        }
        write!(f, "sqrt({})", self.d)
    }
}

impl fmt::Debug for Algebraic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::str::FromStr for Algebraic {
    type Err = ParseError;

    /// Accepts the [`Display`](fmt::Display) form: `p/q`, `a + b*sqrt(d)`, `-sqrt(d)`, …
    fn from_str(s: &str) -> Result<Self, ParseError> {
        let s = s.trim();
        let Some(open) = s.find("sqrt(") else { return Ok(Algebraic::rational(s.parse()?)) };
        let close = s.rfind(')').filter(|&c| c + 1 == s.len()).ok_or_else(|| ParseError::new(format!("bad surd `{s}`")))?;
        let d: Rat = s[open + 5..close].parse()?;
        let head = s[..open].trim_end_matches('*');
        let (a, neg, mag) = match head.find(" + ").or_else(|| head.find(" - ")) {
            Some(i) => (head[..i].trim().parse()?, &head[i + 1..i + 2] == "-", head[i + 3..].trim()),
            None => match head.trim().strip_prefix('-') {
                Some(m) => (Rat::zero(), true, m.trim()),
                None => (Rat::zero(), false, head.trim()),
            },
        };
        let mut b = if mag.is_empty() { Rat::one() } else { mag.parse()? };
        if neg {
            b = -b;
        }
        if d.is_negative() {
            return Err(ParseError::new(format!("negative radicand in `{s}`")));
        }
        Ok(Algebraic::new(a, b, d))
    }
}

impl Serialize for Algebraic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Algebraic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{q, rat};
    use proptest::prelude::*;

    fn alg(a: i64, b: i64, d: i64) -> Algebraic {
        Algebraic::new(rat(a, 1), rat(b, 1), rat(d, 1))
    }

    #[test]
    fn perfect_squares_collapse() {
        assert!(alg(1, 2, 9).is_rational());
        assert_eq!(alg(1, 2, 9), rat(7, 1));
        assert!(Algebraic::new(rat(0, 1), rat(1, 1), q("9/4")) == rat(3, 2));
        assert!(!alg(0, 1, 2).is_rational());
    }

    #[test]
    fn ordering_across_fields() {
        assert!(alg(0, 1, 2) < alg(0, 1, 3));
        assert!(alg(1, 1, 2) > alg(0, 1, 5)); // 2.414 > 2.236
        assert!(alg(3, -1, 2) < alg(0, 1, 3)); // 1.586 < 1.732
        assert_eq!(alg(0, 2, 2), alg(0, 1, 8));
        assert!(alg(0, 1, 2) > Algebraic::rational(q("1.414")));
        assert!(alg(0, 1, 2) < Algebraic::rational(q("1.415")));
    }

    #[test]
    fn roots_of_quadratics() {
        let r = Algebraic::roots(&[rat(1, 1), rat(0, 1), rat(-2, 1)]).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0], alg(0, -1, 2));
        assert_eq!(r[1], alg(0, 1, 2));
        assert_eq!(Algebraic::roots(&[rat(1, 1), rat(-2, 1), rat(1, 1)]).unwrap(), vec![Algebraic::rational(rat(1, 1))]);
        assert!(Algebraic::roots(&[rat(1, 1), rat(0, 1), rat(1, 1)]).unwrap().is_empty());
        assert!(Algebraic::roots(&[rat(0, 1), rat(0, 1), rat(0, 1)]).is_none());
        for x in &r {
            assert_eq!(Algebraic::eval_quadratic(&[rat(1, 1), rat(0, 1), rat(-2, 1)], x), Rat::zero());
        }
    }

    #[test]
    fn between_and_display() {
        let (x, y) = (alg(0, 1, 2), Algebraic::rational(q("1.4143")));
        let m = x.rational_between(&y);
        assert!(x < Algebraic::rational(m.clone()) && Algebraic::rational(m) < y);
        for s in ["3/2", "1 + sqrt(2)", "1/2 - 3*sqrt(5)", "-sqrt(7)", "2*sqrt(3/5)"] {
            let v: Algebraic = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
    }

    proptest! {
        #[test]
        fn order_agrees_with_floats(a1 in -50i64..50, b1 in -9i64..9, d1 in 0i64..30, a2 in -50i64..50, b2 in -9i64..9, d2 in 0i64..30) {
            let (x, y) = (alg(a1, b1, d1), alg(a2, b2, d2));
            let (fx, fy) = (x.to_f64(), y.to_f64());
            if (fx - fy).abs() > 1e-9 {
                prop_assert_eq!(x < y, fx < fy);
            }
            prop_assert_eq!(x.cmp(&y), y.cmp(&x).reverse());
        }

        #[test]
        fn enclosure_contains_value(a in -50i64..50, b in -9i64..9, d in 0i64..30) {
            let x = alg(a, b, d);
            let (lo, hi) = x.enclose(20);
            prop_assert!(Algebraic::rational(lo) <= x && x <= Algebraic::rational(hi));
        }
    }
}
