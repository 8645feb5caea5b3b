//! Text syntax for formulas.
//!
//! ```text
//! formula := disj ( "->" formula )?
//! disj    := conj ( "|" conj )*
//! conj    := unary ( "&" unary )*
//! unary   := "!" unary | ("E" | "A") vars "." formula | "(" formula ")" | chain | "true" | "false"
//! chain   := expr ( relop expr )+
//! expr    := linear or quadratic arithmetic over numbers and identifiers
//! ```
//!
//! Numbers are exact: `2.2`, `11/5` and `1e-3` all denote rationals.

use std::fmt;

use crate::error::{Error, ParseError, Result};
use crate::expr::{AffineExpr, QuadExpr, VarId};
use crate::formula::{Atom, Formula, Rel};
use crate::rat::Rat;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rat),
    Ident(String),
    Rel(Rel),
    Arrow,
    And,
    Or,
    Bang,
    Dot,
    Comma,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                // a dot not followed by a digit ends a quantifier prefix
                if bytes[i] == b'.' && !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
                    break;
                }
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let n: Rat = src[start..i].parse()?;
            out.push((Tok::Num(n), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let two = src.get(i..i + 2).unwrap_or("");
        let (tok, len) = match two {
            "<=" => (Tok::Rel(Rel::Le), 2),
            ">=" => (Tok::Rel(Rel::Ge), 2),
            "->" => (Tok::Arrow, 2),
            "==" => (Tok::Rel(Rel::Eq), 2),
            "&&" => (Tok::And, 2),
            "||" => (Tok::Or, 2),
            _ => match c {
                '<' => (Tok::Rel(Rel::Lt), 1),
                '>' => (Tok::Rel(Rel::Gt), 1),
                '=' => (Tok::Rel(Rel::Eq), 1),
                '&' => (Tok::And, 1),
                '|' => (Tok::Or, 1),
                '!' | '~' => (Tok::Bang, 1),
                '.' => (Tok::Dot, 1),
                ',' => (Tok::Comma, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                '*' => (Tok::Star, 1),
                '/' => (Tok::Slash, 1),
                '^' => (Tok::Caret, 1),
                other => return Err(ParseError::new(format!("unexpected character `{other}` at offset {start}")).into()),
            },
        };
        out.push((tok, start));
        i += len;
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, what: &str) -> Error {
        let at = self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.src.len());
        let found = match self.peek() {
            Some(t) => format!("{t:?}"),
            None => "end of input".to_string(),
        };
        ParseError::new(format!("expected {what} at offset {at}, found {found}")).into()
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error(what))
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut parts = vec![self.conjunction()?];
        while self.eat(&Tok::Or) {
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::or(parts) })
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut parts = vec![self.unary()?];
        while self.eat(&Tok::And) {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::and(parts) })
    }

    fn is_quantifier(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(k)) if k == "E" || k == "A")
            && matches!(self.peek_at(1), Some(Tok::Ident(_)))
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat(&Tok::Bang) {
            return Ok(Formula::not(self.unary()?));
        }
        if self.is_quantifier() {
            let Some(Tok::Ident(kind)) = self.bump() else { unreachable!() };
            let mut vars = Vec::new();
            loop {
                match self.bump() {
                    Some(Tok::Ident(name)) => vars.push(VarId::new(name)),
                    _ => {
                        self.pos -= 1;
                        return Err(self.error("variable name"));
                    }
                }
                if self.eat(&Tok::Dot) {
                    break;
                }
                self.eat(&Tok::Comma);
            }
            let body = self.formula()?;
            return Ok(if kind == "E" { Formula::exists(vars, body) } else { Formula::forall(vars, body) });
        }
        match self.peek() {
            Some(Tok::Ident(k)) if k == "true" => {
                self.pos += 1;
                return Ok(Formula::True);
            }
            Some(Tok::Ident(k)) if k == "false" => {
                self.pos += 1;
                return Ok(Formula::False);
            }
            _ => {}
        }
        if self.peek() == Some(&Tok::LParen) {
            // Either a parenthesized formula or an arithmetic term opening a comparison.
            let save = self.pos;
            match self.chain() {
                Ok(f) => return Ok(f),
                Err(Error::Nonlinear(s)) => return Err(Error::Nonlinear(s)),
                Err(_) => self.pos = save,
            }
            self.pos += 1;
            let inner = self.formula()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        self.chain()
    }

    fn chain(&mut self) -> Result<Formula> {
        let mut lhs = self.expr()?;
        let mut atoms = Vec::new();
        while let Some(Tok::Rel(rel)) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.expr()?;
            let diff = lhs.clone() - rhs.clone();
            if !diff.is_affine() {
                return Err(Error::Nonlinear(diff.to_string()));
            }
            atoms.push(Formula::atom(Atom::new(diff.affine_part().clone(), rel)));
            lhs = rhs;
        }
        if atoms.is_empty() {
            return Err(self.error("comparison operator"));
        }
        Ok(Formula::and(atoms))
    }

    fn expr(&mut self) -> Result<QuadExpr> {
        let mut acc = if self.eat(&Tok::Minus) { self.term()?.scale(&-Rat::one()) } else { self.term()? };
        loop {
            if self.eat(&Tok::Plus) {
                acc = acc + self.term()?;
            } else if self.eat(&Tok::Minus) {
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<QuadExpr> {
        let mut acc = self.power()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.power()?;
                acc = mul(&acc, &rhs)?;
            } else if self.eat(&Tok::Slash) {
                let rhs = self.power()?;
                if !rhs.is_affine() || !rhs.affine_part().is_constant() {
                    return Err(Error::Nonlinear(format!("({acc}) / ({rhs})")));
                }
                let d = rhs.affine_part().constant_term().clone();
                if d.is_zero() {
                    return Err(ParseError::new("division by zero").into());
                }
                acc = acc.scale(&d.recip());
            } else {
                return Ok(acc);
            }
        }
    }

    fn power(&mut self) -> Result<QuadExpr> {
        let base = self.factor()?;
        if self.eat(&Tok::Caret) {
            let Some(Tok::Num(n)) = self.bump() else {
                self.pos -= 1;
                return Err(self.error("integer exponent"));
            };
            let Some((k, 1)) = n.as_small().filter(|&(k, _)| k >= 0) else {
                return Err(ParseError::new(format!("unsupported exponent {n}")).into());
            };
            let mut acc = QuadExpr::from_affine(AffineExpr::constant(Rat::one()));
            for _ in 0..k {
                acc = mul(&acc, &base)?;
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn factor(&mut self) -> Result<QuadExpr> {
        match self.bump() {
            Some(Tok::Num(n)) => Ok(QuadExpr::from_affine(AffineExpr::constant(n))),
            Some(Tok::Ident(name)) if name != "true" && name != "false" => {
                Ok(QuadExpr::from_affine(AffineExpr::var(VarId::new(name))))
            }
            Some(Tok::Minus) => Ok(self.factor()?.scale(&-Rat::one())),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => {
                self.pos -= 1;
                Err(self.error("number, variable or `(`"))
            }
        }
    }
}

fn mul(a: &QuadExpr, b: &QuadExpr) -> Result<QuadExpr> {
    if a.is_affine() && a.affine_part().is_constant() {
        return Ok(b.scale(a.affine_part().constant_term()));
    }
    if b.is_affine() && b.affine_part().is_constant() {
        return Ok(a.scale(b.affine_part().constant_term()));
    }
    if a.is_affine() && b.is_affine() {
        return Ok(a.affine_part().mul_affine(b.affine_part()));
    }
    Err(Error::Nonlinear(format!("({a}) * ({b})")))
}

/// Parses a formula. Nonlinear atoms are rejected with [`Error::Nonlinear`].
pub fn parse_formula(src: &str) -> Result<Formula> {
    let mut p = Parser { src, toks: lex(src)?, pos: 0 };
    let f = p.formula()?;
    if p.pos < p.toks.len() {
        return Err(p.error("end of input"));
    }
    Ok(f)
}

/// Parses an expression of degree at most two.
pub fn parse_quad(src: &str) -> Result<QuadExpr> {
    let mut p = Parser { src, toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.error("end of input"));
    }
    Ok(e)
}

/// Parses an affine expression.
pub fn parse_affine(src: &str) -> Result<AffineExpr> {
    let q = parse_quad(src)?;
    if !q.is_affine() {
        return Err(Error::Nonlinear(q.to_string()));
    }
    Ok(q.affine_part().clone())
}

const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_UNARY: u8 = 4;

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Implies(..) => PREC_IMPLIES,
        Formula::Or(_) => PREC_OR,
        Formula::And(_) => PREC_AND,
        // quantifier bodies extend to the right, so they bind loosest
        Formula::Exists(..) | Formula::Forall(..) => 0,
        _ => PREC_UNARY + 1,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, phi: &Formula, min: u8) -> fmt::Result {
    if prec(phi) < min {
        f.write_str("(")?;
        write_formula(f, phi)?;
        return f.write_str(")");
    }
    write_formula(f, phi)
}

fn write_list(f: &mut fmt::Formatter<'_>, parts: &[Formula], sep: &str, min: u8) -> fmt::Result {
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write_at(f, p, min)?;
    }
    Ok(())
}

fn write_quant(f: &mut fmt::Formatter<'_>, q: &str, vars: &[VarId], body: &Formula) -> fmt::Result {
    f.write_str(q)?;
    for (i, v) in vars.iter().enumerate() {
        f.write_str(if i == 0 { " " } else { ", " })?;
        f.write_str(v.name())?;
    }
    f.write_str(". ")?;
    write_formula(f, body)
}

/// Printer used by `Display for Formula`; output re-parses to the same tree.
pub fn write_formula(f: &mut fmt::Formatter<'_>, phi: &Formula) -> fmt::Result {
    match phi {
        Formula::True => f.write_str("true"),
        Formula::False => f.write_str("false"),
        Formula::Atom(a) => write!(f, "{a}"),
        Formula::Not(a) => {
            f.write_str("!")?;
            write_at(f, a, PREC_UNARY + 2)
        }
        Formula::And(ps) => write_list(f, ps, " & ", PREC_AND + 1),
        Formula::Or(ps) => write_list(f, ps, " | ", PREC_OR + 1),
        Formula::Implies(a, b) => {
            write_at(f, a, PREC_IMPLIES + 1)?;
            f.write_str(" -> ")?;
            write_at(f, b, PREC_IMPLIES)
        }
        Formula::Exists(vs, body) => write_quant(f, "E", vs, body),
        Formula::Forall(vs, body) => write_quant(f, "A", vs, body),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{point, var};
    use crate::rat::{q, rat};
    use proptest::prelude::*;

    #[test]
    fn parses_decimals_exactly() {
        let f = parse_formula("L >= 5.1 & U <= 24.9 & U - L >= 2.4").unwrap();
        assert_eq!(f.to_string(), "10*L >= 51 & 10*U <= 249 & 5*L - 5*U <= -12");
    }

    #[test]
    fn chained_comparison() {
        let f = parse_formula("0 <= t <= 20").unwrap();
        assert_eq!(f.conjunct_count(), 2);
        assert!(f.holds(&point([("t", rat(20, 1))])).unwrap());
        assert!(!f.holds(&point([("t", q("20.1"))])).unwrap());
    }

    #[test]
    fn parenthesized_terms_and_formulas() {
        let a = parse_formula("(x + 1) * 2 <= 3").unwrap();
        assert_eq!(a.to_string(), "2*x <= 1");
        let b = parse_formula("(x <= 1 | y <= 1) & 2*(x - y) = 0").unwrap();
        assert_eq!(b.to_string(), "(x <= 1 | y <= 1) & x - y = 0");
    }

    #[test]
    fn quantifier_scopes_right() {
        let f = parse_formula("A x. 0 <= x & x <= 1 -> x <= c").unwrap();
        let Formula::Forall(vs, body) = &f else { panic!("{f}") };
        assert_eq!(vs, &vec![var("x")]);
        assert!(matches!(**body, Formula::Implies(..)));
        let g = parse_formula("E t1, t2 v. t1 + t2 + v >= 0").unwrap();
        let Formula::Exists(vs, _) = &g else { panic!() };
        assert_eq!(vs.len(), 3);
    }

    #[test]
    fn nonlinear_rejected() {
        assert!(matches!(parse_formula("A x. x^2 >= 0"), Err(Error::Nonlinear(_))));
        assert!(matches!(parse_formula("x * y <= 1"), Err(Error::Nonlinear(_))));
        // squares cancel: still linear
        assert!(parse_formula("x^2 - x*x + x <= 1").is_ok());
    }

    #[test]
    fn malformed_input_is_a_parse_error() {
        for src in ["x <=", "x <= 1 &", "(x <= 1", "E . x <= 1", "x $ 1", "x + 1"] {
            assert!(matches!(parse_formula(src), Err(Error::Parse(_))), "{src}");
        }
    }

    #[test]
    fn quadratic_expressions() {
        let g = parse_quad("(20*v0 + 1.1*(t1^2 - t2^2 - 40*t1 + 40*t2) - 132.2)/20").unwrap();
        let p = point([("v0", rat(6, 1)), ("t1", rat(2, 1)), ("t2", rat(5, 1))]);
        // (120 + 1.1*(4 - 25 - 80 + 200) - 132.2)/20
        assert_eq!(g.evaluate(&p).unwrap(), (q("120") + q("1.1") * q("99") - q("132.2")) / q("20"));
    }

    #[test]
    fn printing_quantifiers_round_trips() {
        for src in [
            "A x. x <= 1 -> x <= c",
            "(E x. x >= a & x <= b) & a <= 0",
            "!(x <= 1) | E y. y > x",
            "(a >= 0 -> b >= 0) -> c >= 0",
            "true",
            "false",
        ] {
            let f = parse_formula(src).unwrap();
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f, "{src} printed as {f}");
        }
    }

    fn arb_atom() -> impl Strategy<Value = Formula> {
        (prop::collection::vec(-4i64..=4, 3), -9i64..=9, 1i64..=4, 0usize..5).prop_map(|(cs, c, d, r)| {
            let mut e = AffineExpr::constant(rat(c, d));
            for (name, k) in ["a", "b", "c"].iter().zip(cs) {
                e.add_term(var(name), &rat(k, 1));
            }
            let rel = [Rel::Lt, Rel::Le, Rel::Eq, Rel::Ge, Rel::Gt][r];
            Formula::atom(Atom::new(e, rel))
        })
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        arb_atom().prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::and),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::or),
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
                inner.clone().prop_map(|b| Formula::exists(vec![var("a")], b)),
                inner.prop_map(|b| Formula::forall(vec![var("b"), var("c")], b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_print_round_trip(f in arb_formula()) {
            let printed = f.to_string();
            let back = parse_formula(&printed).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
