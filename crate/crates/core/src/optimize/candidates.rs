//! Minimizer candidates grouped by controller, with regions compiled for
//! fast instantiation at grid points.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{Point, QuadExpr, VarId};
use crate::formula::{Polyhedron, Rel};
use crate::kkt;
use crate::model::Controller;
use crate::rat::Rat;

use super::UnivariateCandidate;

/// One controller with every parameter region where it is a minimizer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    /// Decision variable ↦ affine expression in `x` and the outer parameters.
    pub assignment: Controller,
    pub cost: QuadExpr,
    pub regions: Vec<Polyhedron>,
}

/// `coef_x·x + Σ coef_i·outer_i + constant rel 0`.
#[derive(Clone, Debug)]
struct CompiledAtom {
    x: Rat,
    outer: Vec<Rat>,
    constant: Rat,
    rel: Rel,
}

#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub x: VarId,
    pub outer: Vec<VarId>,
    pub candidates: Vec<Candidate>,
    compiled: Vec<Vec<Vec<CompiledAtom>>>,
}

impl CandidateSet {
    /// KKT candidates of `g` over every cell, merged by controller.
    pub fn from_cells(g: &QuadExpr, cells: &[Polyhedron], tvars: &[VarId], x: &VarId, outer: &[VarId]) -> Result<CandidateSet> {
        let mut params = vec![x.clone()];
        params.extend(outer.iter().cloned());
        let per_cell: Vec<Vec<kkt::KktCandidate>> =
            cells.par_iter().map(|cell| kkt::kkt_candidates(g, cell, tvars, &params)).collect::<Result<_>>()?;
        let mut grouped: BTreeMap<Controller, (QuadExpr, Vec<Polyhedron>)> = BTreeMap::new();
        for c in per_cell.into_iter().flatten() {
            let entry = grouped.entry(c.assignment).or_insert_with(|| (c.cost, Vec::new()));
            entry.1.push(c.region);
        }
        let candidates = grouped
            .into_iter()
            .map(|(assignment, (cost, mut regions))| {
                regions.sort();
                regions.dedup();
                Candidate { assignment, cost, regions }
            })
            .collect();
        CandidateSet::new(x.clone(), outer.to_vec(), candidates)
    }

    pub fn new(x: VarId, outer: Vec<VarId>, candidates: Vec<Candidate>) -> Result<CandidateSet> {
        let mut compiled = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let mut regions = Vec::with_capacity(c.regions.len());
            for r in &c.regions {
                let mut atoms = Vec::with_capacity(r.len());
                for a in r.atoms() {
                    if let Some(v) = a.vars().find(|v| **v != x && !outer.contains(v)) {
                        return Err(Error::UnboundVariable(v.to_string()));
                    }
                    atoms.push(CompiledAtom {
                        x: a.lhs.coeff(&x),
                        outer: outer.iter().map(|v| a.lhs.coeff(v)).collect(),
                        constant: a.lhs.constant_term().clone(),
                        rel: a.rel,
                    });
                }
                regions.push(atoms);
            }
            compiled.push(regions);
        }
        Ok(CandidateSet { x, outer, candidates, compiled })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Candidates applicable somewhere in `[lo, hi]` once the outer
    /// parameters take `values`. Regions are treated as closed.
    pub fn restrict(&self, values: &[Rat], lo: &Rat, hi: &Rat) -> Vec<UnivariateCandidate> {
        assert_eq!(values.len(), self.outer.len());
        let point: Point = self.outer.iter().cloned().zip(values.iter().cloned()).collect();
        let mut out = Vec::new();
        for (c, regions) in self.candidates.iter().zip(&self.compiled) {
            let intervals: Vec<(Rat, Rat)> = regions.iter().filter_map(|r| interval(r, values, lo, hi)).collect();
            if intervals.is_empty() {
                continue;
            }
            let cost = c.cost.instantiate(&point).univariate(&self.x).expect("cost depends only on x and the outer parameters");
            let controller = c.assignment.iter().map(|(t, e)| (t.clone(), e.instantiate(&point))).collect();
            out.push(UnivariateCandidate { intervals, cost, controller });
        }
        out
    }
}

/// The region's slice at the outer point, intersected with `[lo, hi]`.
fn interval(atoms: &[CompiledAtom], values: &[Rat], lo: &Rat, hi: &Rat) -> Option<(Rat, Rat)> {
    let (mut a, mut b) = (lo.clone(), hi.clone());
    for atom in atoms {
        let mut k = atom.constant.clone();
        for (c, v) in atom.outer.iter().zip(values) {
            if !c.is_zero() {
                k += &(c * v);
            }
        }
        // atom.x · x + k  rel  0
        if atom.x.is_zero() {
            let ok = match atom.rel {
                Rel::Eq => k.is_zero(),
                Rel::Le | Rel::Lt => !k.is_positive(),
                Rel::Ge | Rel::Gt => !k.is_negative(),
            };
            if !ok {
                return None;
            }
            continue;
        }
        let root = -(&k / &atom.x);
        let upper = matches!(atom.rel, Rel::Le | Rel::Lt) == atom.x.is_positive();
        if atom.rel == Rel::Eq || upper {
            b = b.min(root.clone());
        }
        if atom.rel == Rel::Eq || !upper {
            a = a.max(root);
        }
        if a > b {
            return None;
        }
    }
    Some((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::var;
    use crate::parse::{parse_affine, parse_formula, parse_quad};
    use crate::rat::{q, rat};

    fn poly(src: &str) -> Polyhedron {
        let f = parse_formula(src).unwrap();
        Polyhedron::new(f.atoms())
    }

    #[test]
    fn regions_slice_to_intervals() {
        let cand = Candidate {
            assignment: [(var("t"), parse_affine("x - L").unwrap())].into_iter().collect(),
            cost: parse_quad("x^2 + L").unwrap(),
            regions: vec![poly("x >= L & x <= 2*L + 1"), poly("x = U"), poly("L >= 5 & x <= 0")],
        };
        let set = CandidateSet::new(var("x"), vec![var("L"), var("U")], vec![cand]).unwrap();
        let r = set.restrict(&[rat(1, 1), rat(7, 2)], &rat(0, 1), &rat(10, 1));
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].intervals, vec![(rat(1, 1), rat(3, 1)), (q("3.5"), q("3.5"))]);
        assert_eq!(r[0].cost, [rat(1, 1), rat(0, 1), rat(1, 1)]);
        assert_eq!(r[0].controller[&var("t")].to_string(), "x - 1");
        assert!(set.restrict(&[rat(1, 1), rat(20, 1)], &rat(4, 1), &rat(10, 1)).is_empty());
    }

    #[test]
    fn foreign_variables_rejected() {
        let cand = Candidate { assignment: Controller::new(), cost: parse_quad("x").unwrap(), regions: vec![poly("y <= 1")] };
        assert!(matches!(CandidateSet::new(var("x"), vec![], vec![cand]), Err(Error::UnboundVariable(_))));
    }
}
