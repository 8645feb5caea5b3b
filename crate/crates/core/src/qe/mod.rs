//! Quantifier elimination for linear real arithmetic.

pub mod cubes;
pub mod fm;
pub mod simplex;
pub mod smt;

use crate::error::{Error, Result};
use crate::expr::VarId;
use crate::formula::{Atom, Formula, Polyhedron};

pub use cubes::Options;

fn cubes_to_formula(cubes: Vec<Vec<Atom>>) -> Formula {
    Formula::or(cubes.into_iter().map(|c| Polyhedron::new(c).to_formula()).collect())
}

fn require_quantifier_free(f: &Formula) -> Result<()> {
    if f.is_quantifier_free() {
        Ok(())
    } else {
        Err(Error::Quantified)
    }
}

/// `∃ vars. f` as a quantifier-free disjunction of cubes over the other variables.
pub fn eliminate_exists(f: &Formula, vars: &[VarId]) -> Result<Formula> {
    eliminate_exists_with(f, vars, Options::default())
}

pub fn eliminate_exists_with(f: &Formula, vars: &[VarId], opts: Options) -> Result<Formula> {
    require_quantifier_free(f)?;
    let cubes = cubes::enumerate(&f.nnf(), vars, opts);
    Ok(cubes_to_formula(cubes::remove_subsumed(cubes)))
}

/// `∀ vars. f`, computed as `¬∃ vars. ¬f` and returned as a conjunction of clauses.
pub fn eliminate_forall(f: &Formula, vars: &[VarId]) -> Result<Formula> {
    eliminate_forall_with(f, vars, Options::default())
}

pub fn eliminate_forall_with(f: &Formula, vars: &[VarId], opts: Options) -> Result<Formula> {
    require_quantifier_free(f)?;
    let neg = Formula::not(f.clone()).nnf();
    let cubes = cubes::remove_subsumed(cubes::enumerate(&neg, vars, opts));
    Ok(Formula::and(cubes.iter().map(|c| cubes::negate_cube(c)).collect()))
}

/// Eliminates every quantifier, innermost first.
pub fn qe(f: &Formula) -> Result<Formula> {
    f.validate()?;
    qe_inner(f)
}

fn qe_inner(f: &Formula) -> Result<Formula> {
    Ok(match f {
        Formula::True | Formula::False | Formula::Atom(_) => f.clone(),
        Formula::Not(a) => Formula::not(qe_inner(a)?),
        Formula::And(ps) => Formula::and(ps.iter().map(qe_inner).collect::<Result<_>>()?),
        Formula::Or(ps) => Formula::or(ps.iter().map(qe_inner).collect::<Result<_>>()?),
        Formula::Implies(a, b) => Formula::implies(qe_inner(a)?, qe_inner(b)?),
        Formula::Exists(vs, body) => {
            let inner = qe_inner(body)?;
            log::debug!("eliminating E {:?}", vs);
            eliminate_exists(&inner, vs)?
        }
        Formula::Forall(vs, body) => {
            let inner = qe_inner(body)?;
            log::debug!("eliminating A {:?}", vs);
            eliminate_forall(&inner, vs)?
        }
    })
}

/// Quantifier-free result in disjunctive normal form with redundancy removed.
pub fn simplify(f: &Formula) -> Result<Formula> {
    require_quantifier_free(f)?;
    let cubes = cubes::enumerate(&f.nnf(), &[], Options { generalize: true });
    Ok(cubes_to_formula(cubes::remove_subsumed(cubes)))
}

/// Whether the polyhedron has no real point (exact simplex).
pub fn is_empty(p: &Polyhedron) -> bool {
    simplex::find_point(p.atoms()).is_none()
}

/// Emptiness by eliminating every variable with Fourier-Motzkin; kept as an
/// independent cross-check of [`is_empty`].
pub fn is_empty_fm(p: &Polyhedron) -> bool {
    let vars: Vec<VarId> = p.vars().into_iter().collect();
    let projected = fm::project(p.atoms(), &vars);
    projected.iter().any(Atom::is_contradiction)
}

/// Same solution set with every implied atom removed. Pre: `p` non-empty.
pub fn remove_redundant(p: &Polyhedron) -> Polyhedron {
    Polyhedron::new(fm::remove_redundant_atoms(p.atoms().to_vec()))
}

/// Projection of a single cell.
pub fn project(p: &Polyhedron, vars: &[VarId]) -> Polyhedron {
    Polyhedron::new(fm::project(p.atoms(), vars))
}

/// Whether the quantifier-free formula has a solution.
pub fn is_satisfiable(f: &Formula) -> Result<bool> {
    require_quantifier_free(f)?;
    Ok(cubes::find_model(&[], &[&f.nnf()]).is_some())
}

/// Whether `f ⊨ g` for quantifier-free formulas.
pub fn entails(f: &Formula, g: &Formula) -> Result<bool> {
    let both = Formula::and(vec![f.clone(), Formula::not(g.clone())]);
    Ok(!is_satisfiable(&both)?)
}

/// Semantic equivalence, certified by emptiness of both differences.
pub fn equivalent(f: &Formula, g: &Formula) -> Result<bool> {
    Ok(entails(f, g)? && entails(g, f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::var;
    use crate::parse::parse_formula;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    #[test]
    fn exists_one_step() {
        let r = eliminate_exists(&p("x >= a & x <= b"), &[var("x")]).unwrap();
        assert!(equivalent(&r, &p("a <= b")).unwrap());
    }

    #[test]
    fn forall_bound() {
        let r = eliminate_forall(&p("0 <= x & x <= 1 -> x <= c"), &[var("x")]).unwrap();
        assert!(equivalent(&r, &p("c >= 1")).unwrap(), "{r}");
    }

    #[test]
    fn forall_strict_bound() {
        let r = eliminate_forall(&p("0 < x & x < 1 -> x < c"), &[var("x")]).unwrap();
        assert!(equivalent(&r, &p("c >= 1")).unwrap(), "{r}");
        let s = eliminate_forall(&p("0 <= x & x <= 1 -> x < c"), &[var("x")]).unwrap();
        assert!(equivalent(&s, &p("c > 1")).unwrap(), "{s}");
    }

    #[test]
    fn nested_quantifiers() {
        // every x in [0,1] has some y with x + y = c and 0 <= y <= 2
        let f = p("A x. 0 <= x & x <= 1 -> E y. x + y = c & 0 <= y & y <= 2");
        let r = qe(&f).unwrap();
        assert!(equivalent(&r, &p("1 <= c & c <= 2")).unwrap(), "{r}");
    }

    #[test]
    fn emptiness_examples() {
        let cell = |s: &str| match p(s) {
            Formula::And(ps) => Polyhedron::new(ps.into_iter().map(|f| match f {
                Formula::Atom(a) => a,
                _ => unreachable!(),
            })),
            Formula::Atom(a) => Polyhedron::new([a]),
            _ => unreachable!(),
        };
        for (s, empty) in [("x <= 0 & x >= 1", true), ("x > 0 & x < 0", true), ("x >= 0 & x <= 0", false)] {
            assert_eq!(is_empty(&cell(s)), empty, "{s}");
            assert_eq!(is_empty_fm(&cell(s)), empty, "{s}");
        }
    }

    #[test]
    fn simplify_merges() {
        let r = simplify(&p("(x >= 0 & y >= 0) | (x >= 0 & y < 0)")).unwrap();
        assert_eq!(r.to_string(), "x >= 0");
    }
}
