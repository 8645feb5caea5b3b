//! Exhaustive search of grid stable intervals for the best worst case.
//!
//! Pairs are visited with `L` ascending, then `U` ascending. A pair is skipped
//! only when a lower bound on its worst case is strictly above the best
//! value found so far, so every optimal pair is still evaluated. The bound
//! comes from the loosest admissible interval `[L0, U0]`: for `[L, U]` inside
//! it, every schedule feasible from `v0` under `(L, U)` is feasible under
//! `(L0, U0)`, hence the worst case of `[L, U]` is at least the inner minimum
//! under `(L0, U0)` at any grid point of `[L, U]`.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebraic::Algebraic;
use crate::error::{Error, Result};
use crate::expr::{point, VarId};
use crate::formula::{to_dnf, Formula, Polyhedron};
use crate::model::{self, Constraints, Model};
use crate::qe;
use crate::rat::Rat;

use super::{partition_regions, worst_case_value, CandidateSet, PartitionCell, UnivariateCandidate, WorstCase};

/// Pairs evaluated between two updates of the incumbent; fixed so results
/// do not depend on the number of workers.
const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Rat,
    pub upper: Rat,
    pub step: Rat,
}

impl GridSpec {
    pub fn new(lower: Rat, upper: Rat, step: Rat) -> Result<GridSpec> {
        if !step.is_positive() {
            return Err(Error::Unsupported(format!("grid step must be positive, got {step}")));
        }
        if lower > upper {
            return Err(Error::Unsupported(format!("empty grid [{lower}, {upper}]")));
        }
        Ok(GridSpec { lower, upper, step })
    }

    /// The smallest box `[min L, max U]` allowed by the admissible formula,
    /// discretized with `step`.
    pub fn covering(admissible: &Formula, l: &VarId, u: &VarId, step: Rat) -> Result<GridSpec> {
        let mut lower: Option<Rat> = None;
        let mut upper: Option<Rat> = None;
        for cell in to_dnf(admissible)? {
            let lo = var_bounds(&cell, l).0.ok_or_else(|| Error::NonCompact(format!("`{l}` is unbounded below")))?;
            let hi = var_bounds(&cell, u).1.ok_or_else(|| Error::NonCompact(format!("`{u}` is unbounded above")))?;
            lower = Some(lower.map_or(lo.clone(), |x| x.min(lo)));
            upper = Some(upper.map_or(hi.clone(), |x| x.max(hi)));
        }
        match (lower, upper) {
            (Some(lo), Some(hi)) => GridSpec::new(lo, hi, step),
            _ => Err(Error::NoAdmissiblePair),
        }
    }

    pub fn points(&self) -> Vec<Rat> {
        let mut out = Vec::new();
        let mut x = self.lower.clone();
        while x <= self.upper {
            out.push(x.clone());
            x += &self.step;
        }
        out
    }
}

/// Bounds of `v` over a non-empty cell, from its projection.
pub(crate) fn var_bounds(cell: &Polyhedron, v: &VarId) -> (Option<Rat>, Option<Rat>) {
    let others: Vec<VarId> = cell.vars().into_iter().filter(|x| x != v).collect();
    let (mut lo, mut hi): (Option<Rat>, Option<Rat>) = (None, None);
    for a in qe::project(cell, &others).atoms() {
        let c = a.lhs.coeff(v);
        if c.is_zero() {
            continue;
        }
        let root = -(a.lhs.constant_term() / &c);
        let (is_upper, is_lower) = match a.rel {
            crate::formula::Rel::Eq => (true, true),
            rel => {
                let le = matches!(rel, crate::formula::Rel::Le | crate::formula::Rel::Lt);
                (le == c.is_positive(), le != c.is_positive())
            }
        };
        if is_upper {
            hi = Some(hi.map_or(root.clone(), |h| h.min(root.clone())));
        }
        if is_lower {
            lo = Some(lo.map_or(root.clone(), |l| l.max(root)));
        }
    }
    (lo, hi)
}

/// Everything the search needs, derived once from a model.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub model: Model,
    pub constraints: Constraints,
    /// Quantifier-free safety condition, valid under C2.
    pub safe: Formula,
    pub admissible: Formula,
    pub cells: Vec<Polyhedron>,
    pub candidates: CandidateSet,
}

impl Pipeline {
    /// Fails with [`Error::MarginViolated`] when the rectification margin does
    /// not cover the measurement and timing errors.
    pub fn build(model: &Model) -> Result<Pipeline> {
        model::deviation_margin(model, model.switch_points())?;
        let constraints = model::build_constraints(model)?;
        let safe = model::eliminate_safety(&constraints)?;
        let admissible = model::derive_admissible_from(&constraints, &safe)?;
        Pipeline::with_admissible(model, constraints, safe, admissible)
    }

    pub fn with_admissible(model: &Model, constraints: Constraints, safe: Formula, admissible: Formula) -> Result<Pipeline> {
        if !qe::is_satisfiable(&admissible)? {
            return Err(Error::NoAdmissiblePair);
        }
        let cells = model::derive_feasible_cells(&constraints, &admissible, &safe)?;
        let x = model::vars();
        let g = model::build_objective(model);
        let candidates = CandidateSet::from_cells(&g, &cells, &model.switch_vars(), &x.v0, &[x.l, x.u])?;
        Ok(Pipeline { model: model.clone(), constraints, safe, admissible, cells, candidates })
    }

    pub fn is_admissible(&self, l: &Rat, u: &Rat) -> Result<bool> {
        self.admissible.holds(&point([("L", l.clone()), ("U", u.clone())]))
    }

    pub fn restrict(&self, l: &Rat, u: &Rat) -> Vec<UnivariateCandidate> {
        self.candidates.restrict(&[l.clone(), u.clone()], l, u)
    }

    pub fn worst_case(&self, l: &Rat, u: &Rat) -> Result<WorstCase> {
        worst_case_value(&self.restrict(l, u), l, u)
    }

    pub fn partition(&self, l: &Rat, u: &Rat) -> Result<Vec<PartitionCell>> {
        partition_regions(&self.restrict(l, u), &model::vars().v0, l, u)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchOptions {
    /// Evaluate this pair first; it must be an admissible grid pair.
    pub start: Option<(Rat, Rat)>,
    /// Evaluate every pair, even those the lower bound rules out.
    pub exhaustive: bool,
}

/// One line of the per-pair log.
#[derive(Clone, Debug, PartialEq)]
pub struct GridLogEntry {
    pub l: Rat,
    pub u: Rat,
    /// `None` when the pair was skipped.
    pub value: Option<Algebraic>,
    pub attained: Option<bool>,
    pub lower_bound: Option<Algebraic>,
    pub seconds: f64,
}

impl GridLogEntry {
    pub const CSV_HEADER: &'static str = "L,U,value,decimal,attained,seconds,status";

    pub fn csv_row(&self) -> String {
        let mut row = String::new();
        let _ = write!(row, "{},{},", self.l, self.u);
        match &self.value {
            Some(v) => {
                let attained = self.attained.map_or(String::new(), |a| a.to_string());
                let _ = write!(row, "{v},{:.6},{attained},{:.6},evaluated", v.to_f64(), self.seconds);
            }
            None => {
                let bound = self.lower_bound.as_ref().map_or(String::new(), |b| format!("{:.6}", b.to_f64()));
                let _ = write!(row, ",{bound},,{:.6},pruned", self.seconds);
            }
        }
        row
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub lower: Rat,
    pub upper: Rat,
    pub value: Algebraic,
    pub value_decimal: String,
    pub attained: bool,
    pub pieces: Vec<PartitionCell>,
    /// Every grid pair reaching the optimum, in lexicographic order.
    pub optimal_pairs: Vec<(Rat, Rat)>,
    pub evaluated: usize,
    pub pruned: usize,
    #[serde(skip)]
    pub log: Vec<GridLogEntry>,
}

/// Search the grid for the admissible pair with the smallest worst case.
pub fn synthesize(p: &Pipeline, grid: &GridSpec, opts: &SearchOptions) -> Result<SynthesisResult> {
    let pts = grid.points();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..pts.len() {
        for j in i..pts.len() {
            if p.is_admissible(&pts[i], &pts[j])? {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoAdmissiblePair);
    }
    if let Some((l, u)) = &opts.start {
        let pos = pairs
            .iter()
            .position(|&(i, j)| &pts[i] == l && &pts[j] == u)
            .ok_or_else(|| Error::Unsupported(format!("start pair ({l}, {u}) is not an admissible grid pair")))?;
        let first = pairs.remove(pos);
        pairs.insert(0, first);
    }
    let bounds = if opts.exhaustive { None } else { grid_bounds(p, &pts, &pairs)? };
    let range_bound = |i: usize, j: usize| -> Option<Algebraic> {
        let b = bounds.as_ref()?;
        let vals: Vec<&Rat> = b[i..=j].iter().map(Option::as_ref).collect::<Option<Vec<_>>>()?;
        vals.into_iter().max().cloned().map(Algebraic::from)
    };

    let mut best: Option<Algebraic> = None;
    let mut evaluated: Vec<((Rat, Rat), WorstCase)> = Vec::new();
    let mut log = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(CHUNK) {
        let jobs: Vec<(usize, usize, Option<Algebraic>, bool)> = chunk
            .iter()
            .map(|&(i, j)| {
                let bound = range_bound(i, j);
                let skip = matches!((&bound, &best), (Some(b), Some(v)) if b > v);
                (i, j, bound, skip)
            })
            .collect();
        let results: Vec<Option<(Result<WorstCase>, f64)>> = jobs
            .par_iter()
            .map(|(i, j, _, skip)| {
                (!skip).then(|| {
                    let t0 = Instant::now();
                    let r = p.worst_case(&pts[*i], &pts[*j]);
                    (r, t0.elapsed().as_secs_f64())
                })
            })
            .collect();
        for ((i, j, bound, _), r) in jobs.into_iter().zip(results) {
            let (l, u) = (pts[i].clone(), pts[j].clone());
            match r {
                None => log.push(GridLogEntry { l, u, value: None, attained: None, lower_bound: bound, seconds: 0.0 }),
                Some((w, seconds)) => {
                    let w = w?;
                    log.push(GridLogEntry {
                        l: l.clone(),
                        u: u.clone(),
                        value: Some(w.value.clone()),
                        attained: Some(w.attained),
                        lower_bound: bound,
                        seconds,
                    });
                    if best.as_ref().map_or(true, |b| w.value < *b) {
                        best = Some(w.value.clone());
                    }
                    evaluated.push(((l, u), w));
                }
            }
        }
    }
    let value = best.expect("at least one pair is evaluated");
    let mut optimal: Vec<&((Rat, Rat), WorstCase)> = evaluated.iter().filter(|(_, w)| w.value == value).collect();
    optimal.sort_by(|a, b| a.0.cmp(&b.0));
    let optimal_pairs: Vec<(Rat, Rat)> = optimal.iter().map(|(lu, _)| lu.clone()).collect();
    let ((lower, upper), w) = optimal[0].clone();
    let pieces = p.partition(&lower, &upper)?;
    Ok(SynthesisResult {
        value_decimal: decimal(&value),
        lower,
        upper,
        value,
        attained: w.attained,
        pieces,
        optimal_pairs,
        evaluated: evaluated.len(),
        pruned: log.len() - evaluated.len(),
        log,
    })
}

pub(crate) fn decimal(v: &Algebraic) -> String {
    match v.to_rational() {
        Some(r) => r.to_decimal(6),
        None => format!("{:.6}", v.to_f64()),
    }
}

/// Inner minimum under the loosest admissible interval at every grid point,
/// or `None` when that interval is not itself admissible.
fn grid_bounds(p: &Pipeline, pts: &[Rat], pairs: &[(usize, usize)]) -> Result<Option<Vec<Option<Rat>>>> {
    let lo = pairs.iter().map(|&(i, _)| i).min().expect("non-empty");
    let hi = pairs.iter().map(|&(_, j)| j).max().expect("non-empty");
    let (l0, u0) = (&pts[lo], &pts[hi]);
    if !p.is_admissible(l0, u0)? {
        return Ok(None);
    }
    let base = p.restrict(l0, u0);
    let eval = |c: &UnivariateCandidate, x: &Rat| &(&(&c.cost[0] * x) + &c.cost[1]) * x + &c.cost[2];
    let bounds = pts
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            if k < lo || k > hi {
                return None;
            }
            base.iter().filter(|c| c.intervals.iter().any(|(a, b)| a <= x && x <= b)).map(|c| eval(c, x)).min()
        })
        .collect();
    Ok(Some(bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::var;
    use crate::parse::parse_formula;
    use crate::rat::q;

    #[test]
    fn grid_points_include_both_ends() {
        let g = GridSpec::new(q("5.1"), q("5.4"), q("0.1")).unwrap();
        assert_eq!(g.points(), vec![q("5.1"), q("5.2"), q("5.3"), q("5.4")]);
        let g = GridSpec::new(q("1"), q("1.25"), q("0.1")).unwrap();
        assert_eq!(g.points().last(), Some(&q("1.2")));
    }

    #[test]
    fn grid_rejects_bad_specs() {
        assert!(GridSpec::new(q("0"), q("1"), q("0")).is_err());
        assert!(GridSpec::new(q("2"), q("1"), q("0.1")).is_err());
    }

    #[test]
    fn covering_box_of_the_admissible_set() {
        let (l, u) = (var("L"), var("U"));
        let adm = parse_formula("L >= 5.1 & U <= 24.9 & U - L >= 2.4").unwrap();
        let g = GridSpec::covering(&adm, &l, &u, q("0.1")).unwrap();
        assert_eq!((g.lower, g.upper), (q("5.1"), q("24.9")));
        let two = parse_formula("(L >= 1 & U <= 3 & L <= U) | (L >= 0.5 & U <= 2 & L <= U)").unwrap();
        let g = GridSpec::covering(&two, &l, &u, q("0.5")).unwrap();
        assert_eq!((g.lower, g.upper), (q("0.5"), q("3")));
        let open = parse_formula("L >= 1 & L <= U").unwrap();
        assert!(matches!(GridSpec::covering(&open, &l, &u, q("0.1")), Err(Error::NonCompact(_))));
        assert!(matches!(GridSpec::covering(&Formula::False, &l, &u, q("0.1")), Err(Error::NoAdmissiblePair)));
    }

    #[test]
    fn log_rows() {
        let e = GridLogEntry {
            l: q("5.1"),
            u: q("7.5"),
            value: Some(Algebraic::from(q("1/4"))),
            attained: Some(true),
            lower_bound: None,
            seconds: 0.5,
        };
        assert_eq!(e.csv_row(), "51/10,15/2,1/4,0.250000,true,0.500000,evaluated");
        let p = GridLogEntry { value: None, attained: None, lower_bound: Some(Algebraic::from(q("8"))), ..e };
        assert_eq!(p.csv_row(), "51/10,15/2,,8.000000,,0.500000,pruned");
        assert_eq!(GridLogEntry::CSV_HEADER.split(',').count(), p.csv_row().split(',').count());
    }
}
