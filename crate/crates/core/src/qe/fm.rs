//! Projection of a single conjunction: Gaussian substitution on equalities,
//! then Fourier-Motzkin on the remaining variables.

use std::collections::BTreeMap;

use crate::expr::{AffineExpr, VarId};
use crate::formula::{Atom, Rel};
use crate::qe::simplex;
use crate::rat::Rat;

/// Sorted, deduplicated, tautologies dropped; a contradiction collapses the cube.
fn tidy(atoms: Vec<Atom>) -> Vec<Atom> {
    let mut atoms: Vec<Atom> = atoms.into_iter().filter(|a| !a.is_tautology()).collect();
    if atoms.iter().any(Atom::is_contradiction) {
        return vec![Atom::contradiction()];
    }
    atoms.sort();
    atoms.dedup();
    keep_tightest(atoms)
}

/// Among atoms sharing a linear form keeps only the tightest bound on each side;
/// detects syntactic contradictions between them.
fn keep_tightest(atoms: Vec<Atom>) -> Vec<Atom> {
    // key: linear form; value: (upper bound on form, strict), (lower bound, strict), equality
    #[derive(Default)]
    struct Bounds {
        upper: Option<(Rat, bool)>,
        lower: Option<(Rat, bool)>,
    }
    let mut by_form: BTreeMap<BTreeMap<VarId, Rat>, Bounds> = BTreeMap::new();
    for a in &atoms {
        // key by the form scaled to leading coefficient 1 (positive for canonical atoms)
        let lead = a.lhs.coeffs().values().next().cloned().unwrap_or_else(Rat::one);
        let inv = lead.recip();
        let form: BTreeMap<VarId, Rat> = a.lhs.coeffs().iter().map(|(v, c)| (v.clone(), c * &inv)).collect();
        let rel = if lead.is_negative() { a.rel.flip() } else { a.rel };
        let b = by_form.entry(form).or_default();
        let k = -(a.lhs.constant_term() * &inv);
        let tighter_upper = |cur: &Option<(Rat, bool)>, k: &Rat, strict: bool| match cur {
            None => true,
            Some((c, s)) => k < c || (k == c && strict && !s),
        };
        let tighter_lower = |cur: &Option<(Rat, bool)>, k: &Rat, strict: bool| match cur {
            None => true,
            Some((c, s)) => k > c || (k == c && strict && !s),
        };
        match rel {
            Rel::Le | Rel::Lt => {
                let strict = rel == Rel::Lt;
                if tighter_upper(&b.upper, &k, strict) {
                    b.upper = Some((k, strict));
                }
            }
            Rel::Ge | Rel::Gt => {
                let strict = rel == Rel::Gt;
                if tighter_lower(&b.lower, &k, strict) {
                    b.lower = Some((k, strict));
                }
            }
            Rel::Eq => {
                if tighter_upper(&b.upper, &k, false) {
                    b.upper = Some((k.clone(), false));
                }
                if tighter_lower(&b.lower, &k, false) {
                    b.lower = Some((k, false));
                }
            }
        }
    }
    let mut out = Vec::with_capacity(atoms.len());
    for (form, b) in by_form {
        let lin = AffineExpr::from_terms(form, Rat::zero());
        let with = |k: &Rat, rel: Rel| Atom::new(&lin - &AffineExpr::constant(k.clone()), rel);
        match (b.lower, b.upper) {
            (Some((lo, ls)), Some((hi, hs))) => {
                if lo > hi || (lo == hi && (ls || hs)) {
                    return vec![Atom::contradiction()];
                }
                if lo == hi {
                    out.push(with(&lo, Rel::Eq));
                } else {
                    out.push(with(&lo, if ls { Rel::Gt } else { Rel::Ge }));
                    out.push(with(&hi, if hs { Rel::Lt } else { Rel::Le }));
                }
            }
            (Some((lo, ls)), None) => out.push(with(&lo, if ls { Rel::Gt } else { Rel::Ge })),
            (None, Some((hi, hs))) => out.push(with(&hi, if hs { Rel::Lt } else { Rel::Le })),
            (None, None) => {}
        }
    }
    out.sort();
    out
}

fn is_empty_atoms(atoms: &[Atom]) -> bool {
    matches!(simplex::check(atoms), simplex::Feasibility::Unsat)
}

/// Drops every atom implied by the others (exact, one feasibility check per atom).
/// An infeasible input collapses to a single contradiction.
pub fn remove_redundant_atoms(atoms: Vec<Atom>) -> Vec<Atom> {
    let mut atoms = tidy(atoms);
    if atoms.len() == 1 && atoms[0].is_contradiction() {
        return atoms;
    }
    if is_empty_atoms(&atoms) {
        return vec![Atom::contradiction()];
    }
    let mut i = atoms.len();
    while i > 0 {
        i -= 1;
        if atoms.len() == 1 {
            break;
        }
        let candidate = atoms[i].clone();
        let mut rest: Vec<Atom> = atoms.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, a)| a.clone()).collect();
        let implied = match candidate.rel {
            Rel::Eq => {
                let n = rest.len();
                rest.push(Atom { lhs: candidate.lhs.clone(), rel: Rel::Lt });
                let below = is_empty_atoms(&rest);
                rest[n] = Atom { lhs: candidate.lhs.clone(), rel: Rel::Gt };
                below && is_empty_atoms(&rest)
            }
            _ => {
                rest.push(candidate.negate_inequality().unwrap());
                is_empty_atoms(&rest)
            }
        };
        if implied {
            atoms.remove(i);
        }
    }
    atoms
}

/// Solves `eq` (an equality mentioning `x`) for `x`.
fn solve_for(eq: &Atom, x: &VarId) -> AffineExpr {
    let c = eq.lhs.coeff(x);
    let mut rest = eq.lhs.clone();
    rest.add_term(x.clone(), &-c.clone());
    rest.scale(&(-c.recip()))
}

fn combine(lo: &Atom, hi: &Atom, x: &VarId) -> Atom {
    // lo: a·x + p ⋈ 0 with a > 0 after orientation as a lower bound, similarly hi.
    let a = lo.lhs.coeff(x);
    let b = hi.lhs.coeff(x);
    // a x + p (≥|>) 0 gives x ≥ -p/a ; b x + q (≤|<) 0 gives x ≤ -q/b (signs normalized below)
    let lo_e = lo.lhs.scale(&a.abs().recip());
    let hi_e = hi.lhs.scale(&b.abs().recip());
    // orient both as "expr ≥ 0" with coefficient of x being +1 for lower and -1 for upper
    let (lo_e, lo_strict) = orient_ge(&lo_e, lo.rel);
    let (hi_e, hi_strict) = orient_ge(&hi_e, hi.rel);
    let sum = lo_e + hi_e;
    debug_assert!(sum.coeff(x).is_zero());
    Atom::new(sum, if lo_strict || hi_strict { Rel::Gt } else { Rel::Ge })
}

fn orient_ge(e: &AffineExpr, rel: Rel) -> (AffineExpr, bool) {
    match rel {
        Rel::Ge => (e.clone(), false),
        Rel::Gt => (e.clone(), true),
        Rel::Le => (-e.clone(), false),
        Rel::Lt => (-e.clone(), true),
        Rel::Eq => unreachable!("equalities are substituted before combination"),
    }
}

/// Whether atom `a` bounds `x` from below (true) or above (false).
fn is_lower(a: &Atom, x: &VarId) -> bool {
    let c = a.lhs.coeff(x);
    match a.rel {
        Rel::Ge | Rel::Gt => c.is_positive(),
        Rel::Le | Rel::Lt => c.is_negative(),
        Rel::Eq => unreachable!(),
    }
}

/// Exact projection of the conjunction `atoms` onto the variables not in `elim`.
/// The result is a redundancy-free conjunction (or a single contradiction).
pub fn project(atoms: &[Atom], elim: &[VarId]) -> Vec<Atom> {
    let mut cur = tidy(atoms.to_vec());
    let mut pending: Vec<VarId> = elim.iter().filter(|v| cur.iter().any(|a| a.lhs.mentions(v))).cloned().collect();

    loop {
        if cur.len() == 1 && cur[0].is_contradiction() {
            return cur;
        }
        pending.retain(|v| cur.iter().any(|a| a.lhs.mentions(v)));
        if pending.is_empty() {
            break;
        }
        // Gaussian substitution through an equality when one is available;
        // merged opposite bounds can turn into new equalities later on
        let pick = cur.iter().enumerate().find_map(|(i, a)| {
            if a.rel != Rel::Eq {
                return None;
            }
            pending.iter().position(|x| a.lhs.mentions(x)).map(|p| (i, p))
        });
        if let Some((i, p)) = pick {
            let eq = cur.remove(i);
            let x = pending.remove(p);
            let val = solve_for(&eq, &x);
            let binding: BTreeMap<VarId, AffineExpr> = [(x, val)].into_iter().collect();
            cur = tidy(cur.iter().map(|a| a.substitute(&binding)).collect());
            continue;
        }
        // fewest lower×upper products first
        let (best, _) = pending
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let (mut l, mut u) = (0usize, 0usize);
                for a in cur.iter().filter(|a| a.lhs.mentions(x)) {
                    if is_lower(a, x) {
                        l += 1;
                    } else {
                        u += 1;
                    }
                }
                (k, l * u)
            })
            .min_by_key(|&(k, cost)| (cost, k))
            .unwrap();
        let x = pending.remove(best);
        let (with_x, mut next): (Vec<Atom>, Vec<Atom>) = cur.into_iter().partition(|a| a.lhs.mentions(&x));
        let (lows, highs): (Vec<Atom>, Vec<Atom>) = with_x.into_iter().partition(|a| is_lower(a, &x));
        for lo in &lows {
            for hi in &highs {
                next.push(combine(lo, hi, &x));
            }
        }
        cur = remove_redundant_atoms(next);
    }
    remove_redundant_atoms(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::var;
    use crate::formula::Formula;
    use crate::parse::parse_formula;

    fn cube(src: &str) -> Vec<Atom> {
        match parse_formula(src).unwrap() {
            Formula::And(ps) => ps
                .into_iter()
                .map(|p| match p {
                    Formula::Atom(a) => a,
                    other => panic!("{other}"),
                })
                .collect(),
            Formula::Atom(a) => vec![a],
            other => panic!("{other}"),
        }
    }

    fn show(atoms: &[Atom]) -> String {
        atoms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" & ")
    }

    #[test]
    fn one_step() {
        let p = project(&cube("x >= a & x <= b"), &[var("x")]);
        assert_eq!(show(&p), "a - b <= 0");
    }

    #[test]
    fn strictness_propagates() {
        let p = project(&cube("x > a & x <= b"), &[var("x")]);
        assert_eq!(show(&p), "a - b < 0");
        let q = project(&cube("x > 0 & x < 0"), &[var("x")]);
        assert!(q[0].is_contradiction());
    }

    #[test]
    fn equalities_substitute() {
        let p = project(&cube("v = v0 + w & w = 2 & v <= U & v >= L"), &[var("v"), var("w")]);
        assert_eq!(show(&p), "L - v0 <= 2 & U - v0 >= 2");
    }

    #[test]
    fn equalities_created_midway() {
        // eliminating x and w leaves y = z, which then substitutes y away
        let p = project(&cube("y <= x & x <= z & y >= w & w >= z & y <= 4"), &[var("x"), var("w"), var("y")]);
        assert_eq!(show(&p), "z <= 4");
    }

    #[test]
    fn redundancy_examples() {
        assert_eq!(show(&remove_redundant_atoms(cube("x <= 1 & x <= 2"))), "x <= 1");
        let r = remove_redundant_atoms(cube("x + y <= 2 & x <= 1 & y <= 1 & x + y <= 3"));
        // x + y <= 2 is implied by the unit bounds as well
        assert_eq!(r.len(), 2);
        assert!(!show(&r).contains("<= 3"));
    }
}
