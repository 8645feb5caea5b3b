//! Thresholds of the three optimization encodings over compact domains:
//!
//! * MIN: `∃u1. (D ∧ g ≤ z)` iff `z ≥ min g`;
//! * MAX-MIN: `∀u2. (∃u1. D → ∃u1. (D ∧ g ≤ z))` iff `z ≥ sup_u2 min_u1 g`;
//! * MIN-MAX-MIN: `∃u3. ((∃u1 u2. D) ∧ ∀u2. (…))` iff `z ▷ inf_u3 sup_u2 min_u1 g`,
//!   with `▷` being `≥` when the infimum is attained and `>` otherwise.
//!
//! An affine `g` keeps the whole encoding linear, so the threshold is read
//! off the output of linear QE. A quadratic `g` goes through KKT candidates
//! and the exact envelope instead, which covers MIN and MAX-MIN with a
//! single `u2`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::algebraic::Algebraic;
use crate::error::{Error, Result};
use crate::expr::{AffineExpr, QuadExpr, VarId};
use crate::formula::{to_dnf, Atom, Formula, Polyhedron, Rel};
use crate::kkt;
use crate::qe;
use crate::rat::Rat;

use super::search::var_bounds;
use super::{worst_case_value, CandidateSet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Structure {
    Min { u1: Vec<VarId> },
    MaxMin { u1: Vec<VarId>, u2: Vec<VarId> },
    MinMaxMin { u1: Vec<VarId>, u2: Vec<VarId>, u3: Vec<VarId> },
}

impl Structure {
    fn groups(&self) -> Vec<&[VarId]> {
        match self {
            Structure::Min { u1 } => vec![u1],
            Structure::MaxMin { u1, u2 } => vec![u1, u2],
            Structure::MinMaxMin { u1, u2, u3 } => vec![u1, u2, u3],
        }
    }
}

/// Shape of the threshold: `z ≥ c` or `z > c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    AtLeast,
    Above,
}

fn fresh_z(taken: &BTreeSet<VarId>) -> VarId {
    (0..).map(|i| VarId::new(if i == 0 { "z".to_string() } else { format!("z{i}") })).find(|v| !taken.contains(v)).unwrap()
}

/// The nested min/max objective as a quantified formula in `z`, for affine `g`.
pub fn encode(d: &Formula, g: &QuadExpr, s: &Structure, z: &VarId) -> Result<Formula> {
    let Some(g) = g.is_affine().then(|| g.affine_part().clone()) else {
        return Err(Error::Nonlinear(g.to_string()));
    };
    let below = Formula::and(vec![d.clone(), Formula::cmp(g, Rel::Le, AffineExpr::var(z.clone()))]);
    let maxmin = |u1: &[VarId], u2: &[VarId]| {
        Formula::forall(
            u2.to_vec(),
            Formula::implies(Formula::exists(u1.to_vec(), d.clone()), Formula::exists(u1.to_vec(), below.clone())),
        )
    };
    Ok(match s {
        Structure::Min { u1 } => Formula::exists(u1.clone(), below.clone()),
        Structure::MaxMin { u1, u2 } => maxmin(u1, u2),
        Structure::MinMaxMin { u1, u2, u3 } => {
            let mut inner = u1.clone();
            inner.extend(u2.iter().cloned());
            Formula::exists(u3.clone(), Formula::and(vec![Formula::exists(inner, d.clone()), maxmin(u1, u2)]))
        }
    })
}

/// The exact threshold `c` and its kind for the given structure.
pub fn check_proposition1(d: &Formula, g: &QuadExpr, s: &Structure) -> Result<(Algebraic, Bound)> {
    let cells = validate(d, g, s)?;
    if g.is_affine() {
        return by_qe(d, g, s);
    }
    match s {
        Structure::Min { u1 } => {
            let mut best: Option<Rat> = None;
            for cell in &cells {
                for c in kkt::kkt_candidates(g, cell, u1, &[])? {
                    if c.region.atoms().iter().any(Atom::is_contradiction) {
                        continue;
                    }
                    let v = c.cost.affine_part().constant_term().clone();
                    best = Some(best.map_or(v.clone(), |b| b.min(v)));
                }
            }
            let c = best.ok_or_else(|| Error::Unsupported("no minimizer found".into()))?;
            Ok((c.into(), Bound::AtLeast))
        }
        Structure::MaxMin { u1, u2 } if u2.len() == 1 => {
            let x = &u2[0];
            let set = CandidateSet::from_cells(g, &cells, u1, x, &[])?;
            let mut best: Option<Algebraic> = None;
            for (lo, hi) in components(&cells, x) {
                let w = worst_case_value(&set.restrict(&[], &lo, &hi), &lo, &hi)?;
                best = Some(best.map_or(w.value.clone(), |b| b.max(w.value)));
            }
            Ok((best.expect("non-empty domain"), Bound::AtLeast))
        }
        _ => Err(Error::Unsupported(
            "quadratic objectives need a single u2 and no u3; the thresholds leave the quadratic irrationals otherwise".into(),
        )),
    }
}

/// Checks the hypotheses and returns the DNF cells of `d`.
fn validate(d: &Formula, g: &QuadExpr, s: &Structure) -> Result<Vec<Polyhedron>> {
    let mut all = BTreeSet::new();
    for group in s.groups() {
        for v in group {
            if !all.insert(v.clone()) {
                return Err(Error::Rebound(v.to_string()));
            }
        }
    }
    if let Some(v) = d.free_vars().into_iter().chain(g.vars()).find(|v| !all.contains(v)) {
        return Err(Error::UnboundVariable(v.to_string()));
    }
    if !d.is_quantifier_free() {
        return Err(Error::Quantified);
    }
    if d.nnf().atoms().iter().any(|a| a.rel.is_strict()) {
        return Err(Error::NonCompact("strict inequality in the domain".into()));
    }
    let cells = to_dnf(d)?;
    if cells.is_empty() {
        return Err(Error::NonCompact("empty domain".into()));
    }
    for cell in &cells {
        for v in &all {
            let (lo, hi) = var_bounds(cell, v);
            if lo.is_none() || hi.is_none() {
                return Err(Error::NonCompact(format!("`{v}` is unbounded")));
            }
        }
    }
    Ok(cells)
}

/// Disjoint closed intervals forming the projection of the cells onto `x`.
fn components(cells: &[Polyhedron], x: &VarId) -> Vec<(Rat, Rat)> {
    let mut ivs: Vec<(Rat, Rat)> = cells
        .iter()
        .map(|c| {
            let (lo, hi) = var_bounds(c, x);
            (lo.expect("bounded"), hi.expect("bounded"))
        })
        .collect();
    ivs.sort();
    let mut out: Vec<(Rat, Rat)> = Vec::new();
    for (lo, hi) in ivs {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.clone().max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn by_qe(d: &Formula, g: &QuadExpr, s: &Structure) -> Result<(Algebraic, Bound)> {
    let mut taken: BTreeSet<VarId> = d.free_vars();
    taken.extend(g.vars());
    let z = fresh_z(&taken);
    let phi = qe::simplify(&qe::qe(&encode(d, g, s, &z)?)?)?;
    let mut best: Option<(Rat, bool)> = None;
    for cell in to_dnf(&phi)? {
        for a in cell.atoms() {
            let c = a.lhs.coeff(&z);
            let lower = match a.rel {
                Rel::Eq => false,
                Rel::Le | Rel::Lt => c.is_negative(),
                Rel::Ge | Rel::Gt => c.is_positive(),
            };
            if !lower {
                continue;
            }
            let root = -(a.lhs.constant_term() / &c);
            let strict = a.rel.is_strict();
            best = match best {
                Some((b, bs)) if b < root || (b == root && !bs) => Some((b, bs)),
                _ => Some((root, strict)),
            };
        }
    }
    let (c, strict) = best.ok_or_else(|| Error::Unsupported(format!("`{phi}` is not a lower threshold on {z}")))?;
    let rel = if strict { Rel::Gt } else { Rel::Ge };
    let expected = Formula::cmp(AffineExpr::var(z.clone()), rel, AffineExpr::constant(c.clone()));
    if !qe::equivalent(&phi, &expected)? {
        return Err(Error::Unsupported(format!("`{phi}` is not a lower threshold on {z}")));
    }
    Ok((c.into(), if strict { Bound::Above } else { Bound::AtLeast }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::var;
    use crate::parse::{parse_formula, parse_quad};
    use crate::rat::rat;

    fn vs(names: &[&str]) -> Vec<VarId> {
        names.iter().map(|n| var(n)).collect()
    }

    #[test]
    fn min_of_identity() {
        let d = parse_formula("u >= 0 & u <= 1").unwrap();
        let r = check_proposition1(&d, &parse_quad("u").unwrap(), &Structure::Min { u1: vs(&["u"]) }).unwrap();
        assert_eq!(r, (rat(0, 1).into(), Bound::AtLeast));
    }

    #[test]
    fn maxmin_of_squared_difference() {
        let d = parse_formula("u1 >= 0 & u1 <= 1 & u2 >= 0 & u2 <= 1").unwrap();
        let g = parse_quad("u1^2 - 2*u1*u2 + u2^2").unwrap();
        let r = check_proposition1(&d, &g, &Structure::MaxMin { u1: vs(&["u1"]), u2: vs(&["u2"]) }).unwrap();
        assert_eq!(r, (rat(0, 1).into(), Bound::AtLeast));
    }

    #[test]
    fn nonconvex_min_and_maxmin() {
        // -u² on [-1, 2]: minimum -4 at the far end
        let d = parse_formula("u >= -1 & u <= 2").unwrap();
        let r = check_proposition1(&d, &parse_quad("-u^2").unwrap(), &Structure::Min { u1: vs(&["u"]) }).unwrap();
        assert_eq!(r.0, rat(-4, 1));
        // min over u1 ∈ [0,1] of (u1 - u2)² + u2 for u2 ∈ [0, 2]: sup at u2 = 2 is 1 + 2
        let d = parse_formula("u1 >= 0 & u1 <= 1 & u2 >= 0 & u2 <= 2").unwrap();
        let g = parse_quad("u1^2 - 2*u1*u2 + u2^2 + u2").unwrap();
        let r = check_proposition1(&d, &g, &Structure::MaxMin { u1: vs(&["u1"]), u2: vs(&["u2"]) }).unwrap();
        assert_eq!(r.0, rat(3, 1));
    }

    #[test]
    fn affine_thresholds_by_qe() {
        let d = parse_formula("u1 >= 0 & u1 <= 1 & u2 >= 0 & u2 <= 1 & u1 + u2 >= 1").unwrap();
        let g = parse_quad("u1").unwrap();
        let r = check_proposition1(&d, &g, &Structure::MaxMin { u1: vs(&["u1"]), u2: vs(&["u2"]) }).unwrap();
        assert_eq!(r, (rat(1, 1).into(), Bound::AtLeast));
        let r = check_proposition1(&d, &g, &Structure::Min { u1: vs(&["u1", "u2"]) }).unwrap();
        assert_eq!(r, (rat(0, 1).into(), Bound::AtLeast));
    }

    #[test]
    fn minmaxmin_attained_and_unattained() {
        // the worst case 1 - u3 decreases to its minimum at u3 = 1
        let d = parse_formula("u3 >= 0 & u3 <= 1 & u2 >= 0 & u2 <= 1 - u3 & u1 = u2").unwrap();
        let s = Structure::MinMaxMin { u1: vs(&["u1"]), u2: vs(&["u2"]), u3: vs(&["u3"]) };
        assert_eq!(check_proposition1(&d, &parse_quad("u1").unwrap(), &s).unwrap(), (rat(0, 1).into(), Bound::AtLeast));
        // as before for u3 < 1, but at u3 = 1 the slice also contains [1, 2]
        let d = parse_formula("u1 = u2 & ((u3 >= 0 & u3 <= 1 & u2 >= 0 & u2 <= 1 - u3) | (u3 = 1 & u2 >= 1 & u2 <= 2))").unwrap();
        let (c, kind) = check_proposition1(&d, &parse_quad("u1").unwrap(), &s).unwrap();
        assert_eq!((c, kind), (rat(0, 1).into(), Bound::Above));
    }

    #[test]
    fn hypotheses_enforced() {
        let open = parse_formula("u > 0 & u <= 1").unwrap();
        let g = parse_quad("u").unwrap();
        assert!(matches!(check_proposition1(&open, &g, &Structure::Min { u1: vs(&["u"]) }), Err(Error::NonCompact(_))));
        let ray = parse_formula("u >= 0").unwrap();
        assert!(matches!(check_proposition1(&ray, &g, &Structure::Min { u1: vs(&["u"]) }), Err(Error::NonCompact(_))));
        let d = parse_formula("u >= 0 & u <= 1 & w >= 0 & w <= 1").unwrap();
        assert!(matches!(check_proposition1(&d, &g, &Structure::Min { u1: vs(&["u"]) }), Err(Error::UnboundVariable(_))));
        let s = Structure::MinMaxMin { u1: vs(&["u"]), u2: vs(&["w"]), u3: vec![] };
        assert!(matches!(check_proposition1(&d, &parse_quad("u^2").unwrap(), &s), Err(Error::Unsupported(_))));
    }
}
