//! Atoms, first-order formulas over linear real arithmetic, and convex cells.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::expr::{AffineExpr, Point, VarId};
use crate::rat::Rat;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Rel {
    /// Relation obtained by multiplying both sides by a negative number.
    pub fn flip(self) -> Rel {
        match self {
            Rel::Lt => Rel::Gt,
            Rel::Le => Rel::Ge,
            Rel::Eq => Rel::Eq,
            Rel::Ge => Rel::Le,
            Rel::Gt => Rel::Lt,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Rel::Lt | Rel::Gt)
    }

    /// Whether `value rel 0` holds.
    pub fn holds_for(self, value: &Rat) -> bool {
        let s = value.signum();
        match self {
            Rel::Lt => s < 0,
            Rel::Le => s <= 0,
            Rel::Eq => s == 0,
            Rel::Ge => s >= 0,
            Rel::Gt => s > 0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }
}

/// `lhs rel 0`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub lhs: AffineExpr,
    pub rel: Rel,
}

impl Atom {
    /// Builds and canonicalizes `lhs rel 0`.
    pub fn new(lhs: AffineExpr, rel: Rel) -> Atom {
        Atom { lhs, rel }.canonicalize()
    }

    /// `lhs rel rhs`.
    pub fn compare(lhs: AffineExpr, rel: Rel, rhs: AffineExpr) -> Atom {
        Atom::new(lhs - rhs, rel)
    }

    pub fn tautology() -> Atom {
        Atom { lhs: AffineExpr::zero(), rel: Rel::Eq }
    }

    pub fn contradiction() -> Atom {
        Atom { lhs: AffineExpr::constant(Rat::one()), rel: Rel::Eq }
    }

    /// Truth value of a variable-free atom.
    pub fn truth(&self) -> Option<bool> {
        if self.lhs.is_constant() {
            Some(self.rel.holds_for(self.lhs.constant_term()))
        } else {
            None
        }
    }

    pub fn is_tautology(&self) -> bool {
        self.truth() == Some(true)
    }

    pub fn is_contradiction(&self) -> bool {
        self.truth() == Some(false)
    }

    /// Scales to primitive integer coefficients with a positive leading
    /// coefficient; variable-free atoms collapse to the tautology or
    /// contradiction marker. Idempotent.
    pub fn canonicalize(self) -> Atom {
        if let Some(t) = self.truth() {
            return if t { Atom::tautology() } else { Atom::contradiction() };
        }
        let all = self.lhs.coeffs().values().chain(std::iter::once(self.lhs.constant_term()));
        let denom_lcm = Rat::lcm_denom(all.clone());
        let mut numer_gcd = BigInt::zero();
        for c in all {
            let scaled = c.numer() * (&denom_lcm / c.denom());
            numer_gcd = numer_gcd.gcd(&scaled);
        }
        let lead_negative = self.lhs.coeffs().values().next().map(|c| c.is_negative()).unwrap_or(false);
        let mut factor = Rat::from_int(denom_lcm) / Rat::from_int(numer_gcd.abs());
        let mut rel = self.rel;
        if lead_negative {
            factor = -factor;
            rel = rel.flip();
        }
        if factor.is_one() && rel == self.rel {
            return self;
        }
        Atom { lhs: self.lhs.scale(&factor), rel }
    }

    pub fn holds(&self, point: &Point) -> Result<bool> {
        Ok(self.rel.holds_for(&self.lhs.evaluate(point)?))
    }

    /// The complement as a formula (`=` splits into `<` or `>`).
    pub fn negate(&self) -> Formula {
        match self.rel {
            Rel::Lt => Formula::Atom(Atom { lhs: self.lhs.clone(), rel: Rel::Ge }),
            Rel::Le => Formula::Atom(Atom { lhs: self.lhs.clone(), rel: Rel::Gt }),
            Rel::Ge => Formula::Atom(Atom { lhs: self.lhs.clone(), rel: Rel::Lt }),
            Rel::Gt => Formula::Atom(Atom { lhs: self.lhs.clone(), rel: Rel::Le }),
            Rel::Eq => Formula::or(vec![
                Formula::Atom(Atom { lhs: self.lhs.clone(), rel: Rel::Lt }),
                Formula::Atom(Atom { lhs: self.lhs.clone(), rel: Rel::Gt }),
            ]),
        }
    }

    /// Complement of an inequality atom; `None` for equalities.
    pub fn negate_inequality(&self) -> Option<Atom> {
        match self.negate() {
            Formula::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarId> {
        self.lhs.vars()
    }

    pub fn substitute(&self, bindings: &BTreeMap<VarId, AffineExpr>) -> Atom {
        Atom::new(self.lhs.substitute(bindings), self.rel)
    }

    pub fn instantiate(&self, values: &Point) -> Atom {
        Atom::new(self.lhs.instantiate(values), self.rel)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.truth() {
            Some(true) => f.write_str("true"),
            Some(false) => f.write_str("false"),
            None => {
                let linear = AffineExpr::from_terms(self.lhs.coeffs().clone(), Rat::zero());
                write!(f, "{} {} {}", linear, self.rel.symbol(), -self.lhs.constant_term().clone())
            }
        }
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<VarId>, Box<Formula>),
    Forall(Vec<VarId>, Box<Formula>),
}

impl Formula {
    pub fn atom(a: Atom) -> Formula {
        match a.truth() {
            Some(true) => Formula::True,
            Some(false) => Formula::False,
            None => Formula::Atom(a),
        }
    }

    /// `lhs rel rhs` as a formula.
    pub fn cmp(lhs: AffineExpr, rel: Rel, rhs: AffineExpr) -> Formula {
        Formula::atom(Atom::compare(lhs, rel, rhs))
    }

    /// Conjunction, flattening nested conjunctions and folding constants.
    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction, flattening nested disjunctions and folding constants.
    pub fn or(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(vars: Vec<VarId>, body: Formula) -> Formula {
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    pub fn forall(vars: Vec<VarId>, body: Formula) -> Formula {
        if vars.is_empty() {
            body
        } else {
            Formula::Forall(vars, Box::new(body))
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(a) => a.is_quantifier_free(),
            Formula::And(ps) | Formula::Or(ps) => ps.iter().all(Formula::is_quantifier_free),
            Formula::Implies(a, b) => a.is_quantifier_free() && b.is_quantifier_free(),
            Formula::Exists(..) | Formula::Forall(..) => false,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut BTreeSet::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut BTreeSet<VarId>, out: &mut BTreeSet<VarId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.extend(a.vars().filter(|v| !bound.contains(*v)).cloned()),
            Formula::Not(a) => a.collect_free(bound, out),
            Formula::And(ps) | Formula::Or(ps) => ps.iter().for_each(|p| p.collect_free(bound, out)),
            Formula::Implies(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Exists(vs, body) | Formula::Forall(vs, body) => {
                let fresh: Vec<VarId> = vs.iter().filter(|v| bound.insert((*v).clone())).cloned().collect();
                body.collect_free(bound, out);
                for v in fresh {
                    bound.remove(&v);
                }
            }
        }
    }

    pub fn bound_vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Exists(vs, _) | Formula::Forall(vs, _) = f {
                out.extend(vs.iter().cloned());
            }
        });
        out
    }

    fn visit(&self, cb: &mut impl FnMut(&Formula)) {
        cb(self);
        match self {
            Formula::Not(a) => a.visit(cb),
            Formula::And(ps) | Formula::Or(ps) => ps.iter().for_each(|p| p.visit(cb)),
            Formula::Implies(a, b) => {
                a.visit(cb);
                b.visit(cb);
            }
            Formula::Exists(_, body) | Formula::Forall(_, body) => body.visit(cb),
            _ => {}
        }
    }

    /// All atoms, in order of appearance.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Atom(a) = f {
                out.push(a.clone());
            }
        });
        out
    }

    /// Checks that no variable is quantified twice along a root-to-leaf path.
    pub fn validate(&self) -> Result<()> {
        fn go(f: &Formula, bound: &mut Vec<VarId>) -> Result<()> {
            match f {
                Formula::Not(a) => go(a, bound),
                Formula::And(ps) | Formula::Or(ps) => ps.iter().try_for_each(|p| go(p, bound)),
                Formula::Implies(a, b) => {
                    go(a, bound)?;
                    go(b, bound)
                }
                Formula::Exists(vs, body) | Formula::Forall(vs, body) => {
                    let depth = bound.len();
                    for v in vs {
                        if bound.contains(v) {
                            return Err(Error::Rebound(v.to_string()));
                        }
                        bound.push(v.clone());
                    }
                    go(body, bound)?;
                    bound.truncate(depth);
                    Ok(())
                }
                _ => Ok(()),
            }
        }
        go(self, &mut Vec::new())
    }

    /// Replaces free occurrences of the bound variables. Rejects bindings for
    /// quantified variables and bindings whose expressions would be captured.
    pub fn substitute(&self, bindings: &BTreeMap<VarId, AffineExpr>) -> Result<Formula> {
        let bound = self.bound_vars();
        for (v, e) in bindings {
            if bound.contains(v) {
                return Err(Error::BoundVariable(v.to_string()));
            }
            if let Some(w) = e.vars().find(|w| bound.contains(*w)) {
                return Err(Error::BoundVariable(w.to_string()));
            }
        }
        Ok(self.map_atoms(&|a| Formula::atom(a.substitute(bindings))))
    }

    /// Replaces variables by constants.
    pub fn instantiate(&self, values: &Point) -> Result<Formula> {
        let bindings = values.iter().map(|(v, x)| (v.clone(), AffineExpr::constant(x.clone()))).collect();
        self.substitute(&bindings)
    }

    /// Rebuilds the formula with every atom rewritten, folding constants.
    pub fn map_atoms(&self, f: &impl Fn(&Atom) -> Formula) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => f(a),
            Formula::Not(a) => Formula::not(a.map_atoms(f)),
            Formula::And(ps) => Formula::and(ps.iter().map(|p| p.map_atoms(f)).collect()),
            Formula::Or(ps) => Formula::or(ps.iter().map(|p| p.map_atoms(f)).collect()),
            Formula::Implies(a, b) => match (a.map_atoms(f), b.map_atoms(f)) {
                (Formula::False, _) | (_, Formula::True) => Formula::True,
                (Formula::True, b) => b,
                (a, Formula::False) => Formula::not(a),
                (a, b) => Formula::implies(a, b),
            },
            Formula::Exists(vs, body) => Formula::exists(vs.clone(), body.map_atoms(f)),
            Formula::Forall(vs, body) => Formula::forall(vs.clone(), body.map_atoms(f)),
        }
    }

    /// Truth at a point; quantifier-free formulas only.
    pub fn holds(&self, point: &Point) -> Result<bool> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => a.holds(point)?,
            Formula::Not(a) => !a.holds(point)?,
            Formula::And(ps) => {
                for p in ps {
                    if !p.holds(point)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(ps) => {
                for p in ps {
                    if p.holds(point)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Implies(a, b) => !a.holds(point)? || b.holds(point)?,
            Formula::Exists(..) | Formula::Forall(..) => return Err(Error::Quantified),
        })
    }

    /// Negation normal form: only `And`, `Or`, atoms, constants and
    /// quantifiers remain; negations are absorbed into atoms.
    pub fn nnf(&self) -> Formula {
        self.nnf_signed(true)
    }

    fn nnf_signed(&self, positive: bool) -> Formula {
        match (self, positive) {
            (Formula::True, true) | (Formula::False, false) => Formula::True,
            (Formula::True, false) | (Formula::False, true) => Formula::False,
            (Formula::Atom(a), true) => Formula::Atom(a.clone()),
            (Formula::Atom(a), false) => a.negate(),
            (Formula::Not(a), p) => a.nnf_signed(!p),
            (Formula::And(ps), true) => Formula::and(ps.iter().map(|p| p.nnf_signed(true)).collect()),
            (Formula::And(ps), false) => Formula::or(ps.iter().map(|p| p.nnf_signed(false)).collect()),
            (Formula::Or(ps), true) => Formula::or(ps.iter().map(|p| p.nnf_signed(true)).collect()),
            (Formula::Or(ps), false) => Formula::and(ps.iter().map(|p| p.nnf_signed(false)).collect()),
            (Formula::Implies(a, b), true) => Formula::or(vec![a.nnf_signed(false), b.nnf_signed(true)]),
            (Formula::Implies(a, b), false) => Formula::and(vec![a.nnf_signed(true), b.nnf_signed(false)]),
            (Formula::Exists(vs, body), true) => Formula::exists(vs.clone(), body.nnf_signed(true)),
            (Formula::Exists(vs, body), false) => Formula::forall(vs.clone(), body.nnf_signed(false)),
            (Formula::Forall(vs, body), true) => Formula::forall(vs.clone(), body.nnf_signed(true)),
            (Formula::Forall(vs, body), false) => Formula::exists(vs.clone(), body.nnf_signed(false)),
        }
    }

    /// Number of top-level disjuncts (1 for anything that is not a disjunction).
    pub fn disjunct_count(&self) -> usize {
        match self {
            Formula::Or(ps) => ps.len(),
            Formula::False => 0,
            _ => 1,
        }
    }

    /// Number of top-level conjuncts.
    pub fn conjunct_count(&self) -> usize {
        match self {
            Formula::And(ps) => ps.len(),
            Formula::True => 0,
            _ => 1,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::parse::write_formula(f, self)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A conjunction of atoms: a convex, possibly open, possibly empty set.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Polyhedron {
    atoms: Vec<Atom>,
}

impl Polyhedron {
    /// Canonical, sorted and deduplicated; tautologies are dropped.
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Polyhedron {
        let mut atoms: Vec<Atom> = atoms.into_iter().map(Atom::canonicalize).filter(|a| !a.is_tautology()).collect();
        atoms.sort();
        atoms.dedup();
        if atoms.iter().any(Atom::is_contradiction) {
            atoms = vec![Atom::contradiction()];
        }
        Polyhedron { atoms }
    }

    pub fn universe() -> Polyhedron {
        Polyhedron::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty_conjunction(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.atoms.iter().flat_map(|a| a.vars().cloned()).collect()
    }

    pub fn holds(&self, point: &Point) -> Result<bool> {
        for a in &self.atoms {
            if !a.holds(point)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn with(&self, extra: impl IntoIterator<Item = Atom>) -> Polyhedron {
        Polyhedron::new(self.atoms.iter().cloned().chain(extra))
    }

    pub fn substitute(&self, bindings: &BTreeMap<VarId, AffineExpr>) -> Polyhedron {
        Polyhedron::new(self.atoms.iter().map(|a| a.substitute(bindings)))
    }

    pub fn instantiate(&self, values: &Point) -> Polyhedron {
        Polyhedron::new(self.atoms.iter().map(|a| a.instantiate(values)))
    }

    pub fn to_formula(&self) -> Formula {
        Formula::and(self.atoms.iter().cloned().map(Formula::atom).collect())
    }

    pub fn is_closed(&self) -> bool {
        self.atoms.iter().all(|a| !a.rel.is_strict())
    }
}

impl fmt::Display for Polyhedron {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Polyhedron {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Disjunction of cells as a formula.
pub fn cells_to_formula(cells: &[Polyhedron]) -> Formula {
    Formula::or(cells.iter().map(Polyhedron::to_formula).collect())
}

/// Disjunctive normal form of a quantifier-free formula: cells whose union is
/// the solution set. Empty cells are pruned during expansion.
pub fn to_dnf(f: &Formula) -> Result<Vec<Polyhedron>> {
    if !f.is_quantifier_free() {
        return Err(Error::Quantified);
    }
    Ok(crate::qe::cubes::enumerate_cells(&f.nnf()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{point, var};
    use crate::parse::parse_formula;
    use crate::rat::rat;

    fn x() -> AffineExpr {
        AffineExpr::var(var("x"))
    }

    #[test]
    fn canonicalize_examples() {
        // 2x - 4 <= 0  ->  x - 2 <= 0
        let a = Atom::new(x().scale(&rat(2, 1)) - AffineExpr::constant(rat(4, 1)), Rel::Le);
        assert_eq!(a.to_string(), "x <= 2");
        // -3x + 6 > 0  ->  x - 2 < 0
        let b = Atom::new(x().scale(&rat(-3, 1)) + AffineExpr::constant(rat(6, 1)), Rel::Gt);
        assert_eq!(b.to_string(), "x < 2");
        // 0 <= 0 -> true marker
        let c = Atom::new(AffineExpr::zero(), Rel::Le);
        assert!(c.is_tautology());
        assert_eq!(c, Atom::tautology());
        // idempotent
        assert_eq!(b.clone().canonicalize(), b);
        // rational coefficients become primitive integers
        let d = Atom::new(x().scale(&rat(1, 2)) + AffineExpr::term(var("y"), rat(-1, 3)), Rel::Ge);
        assert_eq!(d.to_string(), "3*x - 2*y >= 0");
    }

    #[test]
    fn equal_atoms_compare_equal() {
        let a = Atom::new(x().scale(&rat(5, 3)) - AffineExpr::constant(rat(5, 1)), Rel::Lt);
        let b = Atom::new(x() - AffineExpr::constant(rat(3, 1)), Rel::Lt);
        assert_eq!(a, b);
    }

    #[test]
    fn substitute_examples() {
        let f = parse_formula("t4 - 20 <= 0").unwrap();
        let b = [(var("t4"), AffineExpr::constant(rat(20, 1)))].into_iter().collect();
        assert_eq!(f.substitute(&b).unwrap(), Formula::True);

        let g = parse_formula("E x. x + y <= 0").unwrap();
        let bx = [(var("x"), AffineExpr::zero())].into_iter().collect();
        assert!(matches!(g.substitute(&bx), Err(Error::BoundVariable(_))));
        let by = [(var("y"), AffineExpr::var(var("x")))].into_iter().collect();
        assert!(matches!(g.substitute(&by), Err(Error::BoundVariable(_))));
    }

    #[test]
    fn nnf_pushes_negation() {
        let f = parse_formula("!(x <= 1 -> y = 0)").unwrap();
        let n = f.nnf();
        assert_eq!(n.to_string(), "x <= 1 & (y < 0 | y > 0)");
        let p = point([("x", rat(0, 1)), ("y", rat(1, 1))]);
        assert_eq!(f.holds(&p).unwrap(), n.holds(&p).unwrap());
    }

    #[test]
    fn validate_rejects_rebinding() {
        let f = parse_formula("E x. A x. x <= 0").unwrap();
        assert!(matches!(f.validate(), Err(Error::Rebound(_))));
        assert!(parse_formula("(E x. x <= 0) & (E x. x >= 0)").unwrap().validate().is_ok());
    }

    #[test]
    fn dnf_distributes() {
        let f = parse_formula("(a >= 0 | b >= 0) & c >= 0").unwrap();
        let cells = to_dnf(&f).unwrap();
        assert_eq!(cells.len(), 2);
        for c in &cells {
            assert!(c.atoms().iter().any(|a| a.to_string() == "c >= 0"));
        }
    }

    #[test]
    fn dnf_prunes_empty_cells() {
        let f = parse_formula("(x <= 0 | x >= 2) & x >= 1 & x <= 3").unwrap();
        let cells = to_dnf(&f).unwrap();
        assert_eq!(cells.len(), 1);
        assert!(to_dnf(&parse_formula("x > 0 & x < 0").unwrap()).unwrap().is_empty());
    }
}
