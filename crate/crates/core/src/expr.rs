//! Variables, affine expressions and quadratic expressions over exact rationals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rat::Rat;

/// A named variable. Ordering is lexicographic on the name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(Arc<str>);

impl VarId {
    pub fn new(name: impl AsRef<str>) -> Self {
        VarId(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VarId {
    fn from(s: &str) -> Self {
        VarId::new(s)
    }
}

pub fn var(name: &str) -> VarId {
    VarId::new(name)
}

/// An assignment of rational values to variables.
pub type Point = BTreeMap<VarId, Rat>;

/// Builds a point from `(name, value)` pairs.
pub fn point<'a>(pairs: impl IntoIterator<Item = (&'a str, Rat)>) -> Point {
    pairs.into_iter().map(|(n, v)| (VarId::new(n), v)).collect()
}

/// `Σ coeffs[v]·v + constant`. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AffineExpr {
    coeffs: BTreeMap<VarId, Rat>,
    constant: Rat,
}

impl AffineExpr {
    pub fn zero() -> Self {
        AffineExpr::default()
    }

    pub fn constant(c: Rat) -> Self {
        AffineExpr { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        AffineExpr::term(v, Rat::one())
    }

    pub fn term(v: VarId, c: Rat) -> Self {
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(v, c);
        }
        AffineExpr { coeffs, constant: Rat::zero() }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (VarId, Rat)>, constant: Rat) -> Self {
        let mut e = AffineExpr::constant(constant);
        for (v, c) in terms {
            e.add_term(v, &c);
        }
        e
    }

    pub fn add_term(&mut self, v: VarId, c: &Rat) {
        if c.is_zero() {
            return;
        }
        let sum = match self.coeffs.get(&v) {
            Some(old) => old + c,
            None => c.clone(),
        };
        if sum.is_zero() {
            self.coeffs.remove(&v);
        } else {
            self.coeffs.insert(v, sum);
        }
    }

    pub fn add_constant(&mut self, c: &Rat) {
        self.constant += c;
    }

    pub fn coeffs(&self) -> &BTreeMap<VarId, Rat> {
        &self.coeffs
    }

    pub fn coeff(&self, v: &VarId) -> Rat {
        self.coeffs.get(v).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn constant_term(&self) -> &Rat {
        &self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty() && self.constant.is_zero()
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarId> {
        self.coeffs.keys()
    }

    pub fn mentions(&self, v: &VarId) -> bool {
        self.coeffs.contains_key(v)
    }

    pub fn scale(&self, k: &Rat) -> AffineExpr {
        if k.is_zero() {
            return AffineExpr::zero();
        }
        AffineExpr {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    pub fn evaluate(&self, point: &Point) -> Result<Rat> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            let x = point.get(v).ok_or_else(|| Error::UnboundVariable(v.to_string()))?;
            acc += c * x;
        }
        Ok(acc)
    }

    /// Replaces each bound variable by its expression; unbound variables stay.
    pub fn substitute(&self, bindings: &BTreeMap<VarId, AffineExpr>) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            match bindings.get(v) {
                Some(e) => {
                    for (w, d) in &e.coeffs {
                        out.add_term(w.clone(), &(c * d));
                    }
                    out.constant += c * &e.constant;
                }
                None => out.add_term(v.clone(), c),
            }
        }
        out
    }

    /// Partially evaluates with the given values.
    pub fn instantiate(&self, values: &Point) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            match values.get(v) {
                Some(x) => out.constant += c * x,
                None => out.add_term(v.clone(), c),
            }
        }
        out
    }

    pub fn mul_affine(&self, other: &AffineExpr) -> QuadExpr {
        let mut q = QuadExpr::zero();
        for (v, c) in &self.coeffs {
            for (w, d) in &other.coeffs {
                q.add_quad(v.clone(), w.clone(), &(c * d));
            }
        }
        q.affine = other.scale(&self.constant) + self.scale(&other.constant) - AffineExpr::constant(&self.constant * &other.constant);
        q
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coeffs {
            write_term(f, &mut first, c, Some(&v.to_string()))?;
        }
        if !self.constant.is_zero() || first {
            write_term(f, &mut first, &self.constant, None)?;
        }
        Ok(())
    }
}

impl fmt::Debug for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, first: &mut bool, c: &Rat, monomial: Option<&str>) -> fmt::Result {
    let negative = c.is_negative();
    if *first {
        if negative {
            f.write_str("-")?;
        }
    } else {
        f.write_str(if negative { " - " } else { " + " })?;
    }
    *first = false;
    let mag = c.abs();
    match monomial {
        Some(m) if mag.is_one() => f.write_str(m),
        Some(m) => write!(f, "{mag}*{m}"),
        None => write!(f, "{mag}"),
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        for (v, c) in rhs.coeffs {
            self.add_term(v, &c);
        }
        self.constant += rhs.constant;
        self
    }
}

impl Add<&AffineExpr> for &AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: &AffineExpr) -> AffineExpr {
        self.clone() + rhs.clone()
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        self + (-rhs)
    }
}

impl Sub<&AffineExpr> for &AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: &AffineExpr) -> AffineExpr {
        self.clone() - rhs.clone()
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scale(&-Rat::one())
    }
}

impl Mul<&Rat> for &AffineExpr {
    type Output = AffineExpr;
    fn mul(self, k: &Rat) -> AffineExpr {
        self.scale(k)
    }
}

/// Quadratic polynomial: `Σ quad[(a,b)]·a·b + affine`, with keys stored as `a ≤ b`
/// (the upper triangle of the symmetric coefficient map).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct QuadExpr {
    quad: BTreeMap<(VarId, VarId), Rat>,
    affine: AffineExpr,
}

impl QuadExpr {
    pub fn zero() -> Self {
        QuadExpr::default()
    }

    pub fn from_affine(affine: AffineExpr) -> Self {
        QuadExpr { quad: BTreeMap::new(), affine }
    }

    pub fn add_quad(&mut self, a: VarId, b: VarId, c: &Rat) {
        if c.is_zero() {
            return;
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        let sum = match self.quad.get(&key) {
            Some(old) => old + c,
            None => c.clone(),
        };
        if sum.is_zero() {
            self.quad.remove(&key);
        } else {
            self.quad.insert(key, sum);
        }
    }

    pub fn quadratic_terms(&self) -> &BTreeMap<(VarId, VarId), Rat> {
        &self.quad
    }

    pub fn affine_part(&self) -> &AffineExpr {
        &self.affine
    }

    pub fn affine_part_mut(&mut self) -> &mut AffineExpr {
        &mut self.affine
    }

    pub fn is_affine(&self) -> bool {
        self.quad.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut out: BTreeSet<VarId> = self.affine.vars().cloned().collect();
        for (a, b) in self.quad.keys() {
            out.insert(a.clone());
            out.insert(b.clone());
        }
        out
    }

    /// Coefficient of the monomial `a·b` (for `a == b`, of `a²`).
    pub fn monomial_coeff(&self, a: &VarId, b: &VarId) -> Rat {
        let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        self.quad.get(&key).cloned().unwrap_or_else(Rat::zero)
    }

    /// Entry `∂²q/∂a∂b` of the (symmetric) Hessian.
    pub fn hessian(&self, a: &VarId, b: &VarId) -> Rat {
        let c = self.monomial_coeff(a, b);
        if a == b {
            &c + &c
        } else {
            c
        }
    }

    /// `∂q/∂v` as an affine expression.
    pub fn gradient(&self, v: &VarId) -> AffineExpr {
        let mut g = AffineExpr::constant(self.affine.coeff(v));
        for ((a, b), c) in &self.quad {
            if a == v && b == v {
                g.add_term(a.clone(), &(c + c));
            } else if a == v {
                g.add_term(b.clone(), c);
            } else if b == v {
                g.add_term(a.clone(), c);
            }
        }
        g
    }

    pub fn evaluate(&self, point: &Point) -> Result<Rat> {
        let mut acc = self.affine.evaluate(point)?;
        for ((a, b), c) in &self.quad {
            let x = point.get(a).ok_or_else(|| Error::UnboundVariable(a.to_string()))?;
            let y = point.get(b).ok_or_else(|| Error::UnboundVariable(b.to_string()))?;
            acc += c * &(x * y);
        }
        Ok(acc)
    }

    pub fn substitute(&self, bindings: &BTreeMap<VarId, AffineExpr>) -> QuadExpr {
        let mut out = QuadExpr::from_affine(self.affine.substitute(bindings));
        for ((a, b), c) in &self.quad {
            let ea = bindings.get(a).cloned().unwrap_or_else(|| AffineExpr::var(a.clone()));
            let eb = bindings.get(b).cloned().unwrap_or_else(|| AffineExpr::var(b.clone()));
            out = out + ea.mul_affine(&eb).scale(c);
        }
        out
    }

    pub fn instantiate(&self, values: &Point) -> QuadExpr {
        let bindings: BTreeMap<VarId, AffineExpr> =
            values.iter().map(|(v, x)| (v.clone(), AffineExpr::constant(x.clone()))).collect();
        self.substitute(&bindings)
    }

    pub fn scale(&self, k: &Rat) -> QuadExpr {
        if k.is_zero() {
            return QuadExpr::zero();
        }
        QuadExpr {
            quad: self.quad.iter().map(|(key, c)| (key.clone(), c * k)).collect(),
            affine: self.affine.scale(k),
        }
    }

    /// Coefficients `(a, b, c)` of `a·x² + b·x + c` when `x` is the only variable.
    pub fn univariate(&self, x: &VarId) -> Option<[Rat; 3]> {
        if self.vars().iter().any(|v| v != x) {
            return None;
        }
        Some([self.monomial_coeff(x, x), self.affine.coeff(x), self.affine.constant_term().clone()])
    }
}

impl Add for QuadExpr {
    type Output = QuadExpr;
    fn add(mut self, rhs: QuadExpr) -> QuadExpr {
        for ((a, b), c) in rhs.quad {
            self.add_quad(a, b, &c);
        }
        self.affine = self.affine + rhs.affine;
        self
    }
}

impl Sub for QuadExpr {
    type Output = QuadExpr;
    fn sub(self, rhs: QuadExpr) -> QuadExpr {
        self + rhs.scale(&-Rat::one())
    }
}

impl fmt::Display for QuadExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for ((a, b), c) in &self.quad {
            let m = if a == b { format!("{a}^2") } else { format!("{a}*{b}") };
            write_term(f, &mut first, c, Some(&m))?;
        }
        for (v, c) in self.affine.coeffs() {
            write_term(f, &mut first, c, Some(&v.to_string()))?;
        }
        if !self.affine.constant_term().is_zero() || first {
            write_term(f, &mut first, self.affine.constant_term(), None)?;
        }
        Ok(())
    }
}

impl fmt::Debug for QuadExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

macro_rules! serde_as_text {
    ($ty:ty, $parse:path) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                $parse(&text).map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_as_text!(AffineExpr, crate::parse::parse_affine);
serde_as_text!(QuadExpr, crate::parse::parse_quad);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{q, rat};
    use proptest::prelude::*;

    fn x() -> VarId {
        var("x")
    }
    fn y() -> VarId {
        var("y")
    }

    #[test]
    fn no_zero_coefficients_stored() {
        let e = AffineExpr::var(x()) - AffineExpr::var(x());
        assert!(e.coeffs().is_empty());
        let mut q = QuadExpr::zero();
        q.add_quad(x(), y(), &rat(1, 2));
        q.add_quad(y(), x(), &rat(-1, 2));
        assert!(q.quadratic_terms().is_empty());
    }

    #[test]
    fn evaluate_rejects_unbound() {
        let e = AffineExpr::var(x());
        assert!(matches!(e.evaluate(&Point::new()), Err(Error::UnboundVariable(_))));
        assert_eq!(QuadExpr::zero().evaluate(&point([("x", q("7/3"))])).unwrap(), Rat::zero());
    }

    #[test]
    fn gradient_and_hessian() {
        // x^2 - 3xy + 2y + 1
        let mut g = QuadExpr::from_affine(AffineExpr::from_terms([(y(), rat(2, 1))], Rat::one()));
        g.add_quad(x(), x(), &Rat::one());
        g.add_quad(x(), y(), &rat(-3, 1));
        assert_eq!(g.hessian(&x(), &x()), rat(2, 1));
        assert_eq!(g.hessian(&x(), &y()), rat(-3, 1));
        let gx = g.gradient(&x());
        assert_eq!(gx, AffineExpr::from_terms([(x(), rat(2, 1)), (y(), rat(-3, 1))], Rat::zero()));
        let gy = g.gradient(&y());
        assert_eq!(gy, AffineExpr::from_terms([(x(), rat(-3, 1))], rat(2, 1)));
    }

    #[test]
    fn display() {
        let e = AffineExpr::from_terms([(x(), rat(26, 1)), (y(), rat(-10, 1))], rat(-157, 1));
        assert_eq!(e.to_string(), "26*x - 10*y - 157");
        assert_eq!(AffineExpr::zero().to_string(), "0");
    }

    fn small() -> impl Strategy<Value = Rat> {
        (-50i64..50, 1i64..12).prop_map(|(n, d)| rat(n, d))
    }

    proptest! {
        #[test]
        fn substitute_then_evaluate_commutes(
            a in small(), b in small(), c in small(), d in small(),
            k in small(), m in small(), px in small(), py in small(),
        ) {
            // g = a x^2 + b x y + c y + d, substitute x := k y + m
            let mut g = QuadExpr::from_affine(AffineExpr::from_terms([(y(), c)], d));
            g.add_quad(x(), x(), &a);
            g.add_quad(x(), y(), &b);
            let bind: BTreeMap<VarId, AffineExpr> =
                [(x(), AffineExpr::from_terms([(y(), k.clone())], m.clone()))].into_iter().collect();
            let sub = g.substitute(&bind);
            let p = point([("y", py.clone()), ("x", px)]);
            let xval = &k * &py + &m;
            let mut full = p.clone();
            full.insert(x(), xval);
            prop_assert_eq!(sub.evaluate(&p).unwrap(), g.evaluate(&full).unwrap());
        }
    }
}
