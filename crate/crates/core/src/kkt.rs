//! Parametric minimization of a quadratic over a polyhedral cell by active-set
//! enumeration.
//!
//! For a fixed parameter point the minimum of `g` over the (closed, bounded)
//! cell is attained at a point that is the unique stationary point of `g` on
//! the affine hull of some face, with non-negative multipliers on the tight
//! inequalities. Enumerating linearly independent active sets, solving the
//! stationarity and tightness equations symbolically in the parameters and
//! keeping the parameter region where the solution is primal and dual
//! feasible yields a finite list of affine candidates containing a minimizer
//! for every parameter point.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{AffineExpr, QuadExpr, VarId};
use crate::formula::{Atom, Polyhedron, Rel};
use crate::linalg::{self, Matrix};
use crate::qe::{fm, simplex};
use crate::rat::Rat;

/// Atoms of the cell treated as equalities, with their multipliers as
/// functions of the parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSet {
    /// Indices into the cell's atom list.
    pub atoms: Vec<usize>,
    /// `mu1, mu2, …` in the order of `atoms`; sign-constrained for inequalities.
    pub multipliers: BTreeMap<VarId, AffineExpr>,
}

/// A minimizer candidate: where it applies, what it sets the switching
/// times to, and the resulting cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KktCandidate {
    pub cell: usize,
    pub active: ActiveSet,
    /// Independent equations determining the decision variables: the active
    /// atoms plus stationarity along the face with multipliers eliminated.
    pub equations: Vec<Atom>,
    /// Decision variable ↦ affine expression in the parameters.
    pub assignment: BTreeMap<VarId, AffineExpr>,
    /// Parameter points where the assignment lies in the (closed) cell, and
    /// for [`kkt_candidates`] also where every inequality multiplier is ≥ 0.
    pub region: Polyhedron,
    pub cost: QuadExpr,
}

/// Closure of a cell: strict atoms made non-strict.
pub fn closure(cell: &Polyhedron) -> Polyhedron {
    Polyhedron::new(cell.atoms().iter().map(|a| {
        let rel = match a.rel {
            Rel::Lt => Rel::Le,
            Rel::Gt => Rel::Ge,
            r => r,
        };
        Atom::new(a.lhs.clone(), rel)
    }))
}

/// The atom as `e ≥ 0` (inequalities) or `e = 0`.
fn oriented(a: &Atom) -> AffineExpr {
    match a.rel {
        Rel::Le | Rel::Lt => -a.lhs.clone(),
        _ => a.lhs.clone(),
    }
}

fn t_row(e: &AffineExpr, tvars: &[VarId]) -> Vec<Rat> {
    tvars.iter().map(|t| e.coeff(t)).collect()
}

/// `e` without its decision-variable terms.
fn param_part(e: &AffineExpr, tvars: &[VarId]) -> AffineExpr {
    let mut p = e.clone();
    for t in tvars {
        let c = p.coeff(t);
        if !c.is_zero() {
            p.add_term(t.clone(), &-c);
        }
    }
    p
}

fn check_bounded(cell: &Polyhedron, tvars: &[VarId]) -> Result<()> {
    if simplex::find_point(cell.atoms()).is_none() {
        return Ok(());
    }
    // recession directions: the homogeneous system in the decision variables
    let homogeneous: Vec<Atom> = cell
        .atoms()
        .iter()
        .map(|a| {
            let lin = AffineExpr::from_terms(tvars.iter().map(|t| (t.clone(), a.lhs.coeff(t))), Rat::zero());
            let rel = match a.rel {
                Rel::Lt => Rel::Le,
                Rel::Gt => Rel::Ge,
                r => r,
            };
            Atom::new(lin, rel)
        })
        .collect();
    for t in tvars {
        for sign in [1, -1] {
            let mut sys = homogeneous.clone();
            sys.push(Atom::new(AffineExpr::term(t.clone(), Rat::from_int(sign)) - AffineExpr::constant(Rat::one()), Rel::Ge));
            if simplex::find_point(&sys).is_some() {
                return Err(Error::Unbounded(t.to_string()));
            }
        }
    }
    Ok(())
}

fn mu(k: usize) -> VarId {
    VarId::new(format!("mu{}", k + 1))
}

/// Every linearly independent active set with a unique stationary point,
/// regions restricted only by primal feasibility.
pub fn active_set_solutions(g: &QuadExpr, cell: &Polyhedron, tvars: &[VarId], params: &[VarId]) -> Result<Vec<KktCandidate>> {
    solutions(g, cell, tvars, params, false)
}

/// Candidates whose union contains a minimizer of `g` over the closure of
/// `cell` for every parameter point where the cell is non-empty.
pub fn kkt_candidates(g: &QuadExpr, cell: &Polyhedron, tvars: &[VarId], params: &[VarId]) -> Result<Vec<KktCandidate>> {
    solutions(g, cell, tvars, params, true)
}

fn solutions(g: &QuadExpr, cell: &Polyhedron, tvars: &[VarId], params: &[VarId], dual: bool) -> Result<Vec<KktCandidate>> {
    for v in cell.vars().into_iter().chain(g.vars()) {
        if !tvars.contains(&v) && !params.contains(&v) {
            return Err(Error::UnboundVariable(v.to_string()));
        }
    }
    check_bounded(cell, tvars)?;
    let closed = closure(cell);
    let atoms = closed.atoms();
    let n = tvars.len();

    let hess: Matrix = tvars.iter().map(|a| tvars.iter().map(|b| g.hessian(a, b)).collect()).collect();
    let grad_params: Vec<AffineExpr> = tvars.iter().map(|t| param_part(&g.gradient(t), tvars)).collect();

    // equalities are always active; keep an independent subset
    let mut base: Vec<usize> = Vec::new();
    let mut base_rows: Matrix = Vec::new();
    let mut free: Vec<usize> = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        let row = t_row(&a.lhs, tvars);
        if row.iter().all(Rat::is_zero) {
            continue;
        }
        if a.rel == Rel::Eq {
            let mut trial = base_rows.clone();
            trial.push(row.clone());
            if linalg::rank(&trial) == trial.len() {
                base.push(i);
                base_rows = trial;
            }
        } else {
            free.push(i);
        }
    }

    let mut out = Vec::new();
    let mut chosen = base.clone();
    let mut tight: Vec<Atom> = atoms.to_vec();
    for &i in &base {
        tight[i] = Atom::new(atoms[i].lhs.clone(), Rel::Eq);
    }
    let mut skipped = false;
    let ctx = Ctx { g, atoms, tvars, hess: &hess, grad_params: &grad_params, dual, n };
    if simplex::find_point(&tight).is_some() {
        ctx.search(&free, 0, &mut chosen, &mut tight, &mut out, &mut skipped);
    }
    if skipped && dual {
        // singular systems are covered by the argument above; vertices are
        // added anyway so that a gap in that argument cannot lose a minimizer
        let mut vertices = Vec::new();
        let ctx = Ctx { dual: false, ..ctx };
        let mut chosen = base.clone();
        let mut tight = tight.clone();
        ctx.vertices(&free, 0, &mut chosen, &mut tight, &mut vertices);
        out.extend(vertices);
    }
    dedup(&mut out);
    Ok(out)
}

struct Ctx<'a> {
    g: &'a QuadExpr,
    atoms: &'a [Atom],
    tvars: &'a [VarId],
    hess: &'a Matrix,
    grad_params: &'a [AffineExpr],
    dual: bool,
    n: usize,
}

impl Ctx<'_> {
    fn rows(&self, chosen: &[usize]) -> Matrix {
        chosen.iter().map(|&i| t_row(&oriented(&self.atoms[i]), self.tvars)).collect()
    }

    fn search(&self, free: &[usize], from: usize, chosen: &mut Vec<usize>, tight: &mut Vec<Atom>, out: &mut Vec<KktCandidate>, skipped: &mut bool) {
        match self.solve(chosen) {
            Some(c) => out.extend(c),
            None => *skipped = true,
        }
        if chosen.len() == self.n {
            return;
        }
        for k in from..free.len() {
            let i = free[k];
            chosen.push(i);
            if linalg::rank(&self.rows(chosen)) == chosen.len() {
                let saved = std::mem::replace(&mut tight[i], Atom::new(self.atoms[i].lhs.clone(), Rel::Eq));
                if simplex::find_point(tight).is_some() {
                    self.search(free, k + 1, chosen, tight, out, skipped);
                }
                tight[i] = saved;
            }
            chosen.pop();
        }
    }

    fn vertices(&self, free: &[usize], from: usize, chosen: &mut Vec<usize>, tight: &mut Vec<Atom>, out: &mut Vec<KktCandidate>) {
        if chosen.len() == self.n {
            if let Some(Some(c)) = self.solve(chosen) {
                out.push(c);
            }
            return;
        }
        for k in from..free.len() {
            let i = free[k];
            chosen.push(i);
            if linalg::rank(&self.rows(chosen)) == chosen.len() {
                let saved = std::mem::replace(&mut tight[i], Atom::new(self.atoms[i].lhs.clone(), Rel::Eq));
                if simplex::find_point(tight).is_some() {
                    self.vertices(free, k + 1, chosen, tight, out);
                }
                tight[i] = saved;
            }
            chosen.pop();
        }
    }

    /// Solves stationarity on the face of `chosen`; `None` when singular,
    /// `Some(None)` when the region is empty.
    fn solve(&self, chosen: &[usize]) -> Option<Option<KktCandidate>> {
        let n = self.n;
        let c_rows = self.rows(chosen);
        let z = linalg::nullspace(&c_rows, n);
        let mut m: Matrix = Vec::with_capacity(n);
        let mut rhs: Vec<AffineExpr> = Vec::with_capacity(n);
        let mut equations = Vec::with_capacity(n);
        for (&i, row) in chosen.iter().zip(&c_rows) {
            m.push(row.clone());
            let e = oriented(&self.atoms[i]);
            rhs.push(-param_part(&e, self.tvars));
            equations.push(Atom::new(e, Rel::Eq));
        }
        for zv in &z {
            // zᵀ(H t + b) = 0
            let row: Vec<Rat> = (0..n).map(|j| (0..n).map(|i| &zv[i] * &self.hess[i][j]).sum()).collect();
            let b = zv.iter().zip(self.grad_params).fold(AffineExpr::zero(), |acc, (zi, bi)| &acc + &bi.scale(zi));
            let mut eq = b.clone();
            for (t, c) in self.tvars.iter().zip(&row) {
                eq.add_term(t.clone(), c);
            }
            equations.push(Atom::new(eq, Rel::Eq));
            m.push(row);
            rhs.push(-b);
        }
        let t = linalg::solve_affine(&m, &rhs)?;
        let assignment: BTreeMap<VarId, AffineExpr> = self.tvars.iter().cloned().zip(t.iter().cloned()).collect();

        // multipliers: (C Cᵀ) μ = C (H t + b)
        let grad: Vec<AffineExpr> = (0..n)
            .map(|i| (0..n).fold(self.grad_params[i].clone(), |acc, j| &acc + &t[j].scale(&self.hess[i][j])))
            .collect();
        let k = chosen.len();
        let gram: Matrix = (0..k).map(|a| (0..k).map(|b| (0..n).map(|j| &c_rows[a][j] * &c_rows[b][j]).sum()).collect()).collect();
        let proj: Vec<AffineExpr> =
            (0..k).map(|a| (0..n).fold(AffineExpr::zero(), |acc, j| &acc + &grad[j].scale(&c_rows[a][j]))).collect();
        let mus = linalg::solve_affine(&gram, &proj).expect("independent active rows");

        let mut region: Vec<Atom> = self.atoms.iter().map(|a| a.substitute(&assignment)).collect();
        if self.dual {
            for (&i, m) in chosen.iter().zip(&mus) {
                if self.atoms[i].rel != Rel::Eq {
                    region.push(Atom::new(m.clone(), Rel::Ge));
                }
            }
        }
        let region = fm::remove_redundant_atoms(region);
        if region.iter().any(Atom::is_contradiction) {
            return Some(None);
        }
        let multipliers = mus.into_iter().enumerate().map(|(j, m)| (mu(j), m)).collect();
        let cost = self.g.substitute(&assignment);
        Some(Some(KktCandidate {
            cell: 0,
            active: ActiveSet { atoms: chosen.to_vec(), multipliers },
            equations,
            assignment,
            region: Polyhedron::new(region),
            cost,
        }))
    }
}

fn dedup(out: &mut Vec<KktCandidate>) {
    let mut seen = std::collections::BTreeSet::new();
    out.retain(|c| seen.insert((c.assignment.clone(), c.region.clone())));
}

/// Whether the candidate's equations fix every decision variable uniquely.
pub fn verify_uniqueness(c: &KktCandidate, tvars: &[VarId]) -> bool {
    equations_determine(&c.equations, tvars)
}

/// Whether the equality atoms have full column rank in `tvars`.
pub fn equations_determine(equations: &[Atom], tvars: &[VarId]) -> bool {
    let rows: Matrix = equations.iter().filter(|a| a.rel == Rel::Eq).map(|a| t_row(&a.lhs, tvars)).collect();
    linalg::rank(&rows) == tvars.len()
}

/// `g` with the candidate's assignment substituted: a quadratic in the parameters.
pub fn instantiate_cost(g: &QuadExpr, c: &KktCandidate) -> QuadExpr {
    g.substitute(&c.assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::var;
    use crate::parse::{parse_formula, parse_quad};
    use crate::formula::Formula;

    fn cell(src: &str) -> Polyhedron {
        match parse_formula(src).unwrap() {
            Formula::And(ps) => Polyhedron::new(ps.into_iter().map(|p| match p {
                Formula::Atom(a) => a,
                other => panic!("{other}"),
            })),
            Formula::Atom(a) => Polyhedron::new([a]),
            other => panic!("{other}"),
        }
    }

    fn values(cs: &[KktCandidate], t: &str) -> Vec<String> {
        let mut v: Vec<String> = cs.iter().map(|c| c.assignment[&var(t)].to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn one_dimensional_parabola() {
        let g = parse_quad("(t - 1)^2").unwrap();
        let d = cell("0 <= t & t <= 3");
        let all = active_set_solutions(&g, &d, &[var("t")], &[]).unwrap();
        assert_eq!(values(&all, "t"), ["0", "1", "3"]);
        let kkt = kkt_candidates(&g, &d, &[var("t")], &[]).unwrap();
        assert_eq!(values(&kkt, "t"), ["1"]);
    }

    #[test]
    fn parametric_projection() {
        // min (t - p)^2 over [0, 1]: t = 0 for p <= 0, t = p inside, t = 1 for p >= 1
        let g = parse_quad("(t - p)^2").unwrap();
        let d = cell("0 <= t & t <= 1 & -5 <= p & p <= 5");
        let kkt = kkt_candidates(&g, &d, &[var("t")], &[var("p")]).unwrap();
        assert_eq!(values(&kkt, "t"), ["0", "1", "p"]);
        for c in &kkt {
            let s = c.region.to_string();
            match c.assignment[&var("t")].to_string().as_str() {
                "0" => assert_eq!(s, "p <= 0 & p >= -5"),
                "1" => assert_eq!(s, "p <= 5 & p >= 1"),
                _ => assert_eq!(s, "p <= 1 & p >= 0"),
            }
            assert!(verify_uniqueness(c, &[var("t")]));
        }
    }

    #[test]
    fn unbounded_cells_are_rejected() {
        let g = parse_quad("t").unwrap();
        let err = kkt_candidates(&g, &cell("t >= 0"), &[var("t")], &[]).unwrap_err();
        assert!(matches!(err, Error::Unbounded(_)));
    }

    #[test]
    fn rank_of_equation_systems() {
        let ts = [var("t1"), var("t2")];
        let under = cell("t1 - t2 = 0");
        assert!(!equations_determine(under.atoms(), &ts));
        let full = cell("t1 - t2 = 0 & t1 + t2 = 4");
        assert!(equations_determine(full.atoms(), &ts));
    }

    #[test]
    fn instantiated_cost_is_in_parameters_only() {
        let g = parse_quad("(t - p)^2 + p").unwrap();
        let d = cell("0 <= t & t <= 1 & -5 <= p & p <= 5");
        for c in kkt_candidates(&g, &d, &[var("t")], &[var("p")]).unwrap() {
            let cost = instantiate_cost(&g, &c);
            assert!(!cost.vars().contains(&var("t")));
        }
    }
}
