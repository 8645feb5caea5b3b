//! Worst case over the cycle-start volume and the grid search for the best
//! stable interval.
//!
//! After the outer parameters are fixed, every minimizer candidate becomes a
//! univariate quadratic cost on a union of closed intervals of `x`. The
//! inner minimum is their lower envelope; the worst case is its supremum.
//! Both are computed exactly: the envelope switches at interval endpoints
//! and at real roots of cost differences, which are quadratic irrationals.

mod candidates;
mod search;
mod thresholds;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::algebraic::Algebraic;
use crate::error::{Error, Result};
use crate::expr::{AffineExpr, QuadExpr, VarId};
use crate::model::Controller;
use crate::rat::Rat;

pub use candidates::{Candidate, CandidateSet};
pub use search::{synthesize, GridLogEntry, GridSpec, Pipeline, SearchOptions, SynthesisResult};
pub use thresholds::{check_proposition1, Bound, Structure};

/// A minimizer candidate after the outer parameters are fixed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnivariateCandidate {
    /// Closed intervals where the candidate applies.
    pub intervals: Vec<(Rat, Rat)>,
    /// `[a, b, c]` of `a·x² + b·x + c`.
    pub cost: [Rat; 3],
    pub controller: Controller,
}

/// A piece of the optimal controller: on this interval `controller` attains
/// the pointwise minimum `cost`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCell {
    pub lo: Algebraic,
    pub hi: Algebraic,
    pub lo_open: bool,
    pub hi_open: bool,
    pub cost: QuadExpr,
    pub controller: Controller,
}

impl PartitionCell {
    pub fn contains(&self, x: &Algebraic) -> bool {
        let above = if self.lo_open { x > &self.lo } else { x >= &self.lo };
        let below = if self.hi_open { x < &self.hi } else { x <= &self.hi };
        above && below
    }
}

/// The supremum of the inner minimum over an interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorstCase {
    pub value: Algebraic,
    /// Whether some point of the interval reaches the supremum.
    pub attained: bool,
    /// Where the supremum is reached, or approached.
    pub argmax: Algebraic,
}

/// Maximum of `a·x² + b·x + c` over `[lo, hi]` and a point where it is reached.
pub fn sup_quadratic_on_interval(q: &[Rat; 3], lo: &Rat, hi: &Rat) -> (Rat, Rat) {
    assert!(lo <= hi, "empty interval");
    let eval = |x: &Rat| &(&(&q[0] * x) + &q[1]) * x + &q[2];
    let mut best = (eval(lo), lo.clone());
    let at_hi = eval(hi);
    if at_hi > best.0 {
        best = (at_hi, hi.clone());
    }
    if q[0].is_negative() {
        let vertex = -(&q[1] / &(&q[0] * &Rat::from_int(2)));
        if lo < &vertex && &vertex < hi {
            best = (eval(&vertex), vertex);
        }
    }
    best
}

/// Worst case of the lower envelope of `cands` over `[lo, hi]`.
pub fn worst_case_value(cands: &[UnivariateCandidate], lo: &Rat, hi: &Rat) -> Result<WorstCase> {
    Envelope::new(cands, lo, hi).worst_case()
}

/// Disjoint cells covering `[lo, hi]`, each with a single candidate that is
/// pointwise minimal on it.
pub fn partition_regions(cands: &[UnivariateCandidate], x: &VarId, lo: &Rat, hi: &Rat) -> Result<Vec<PartitionCell>> {
    Envelope::new(cands, lo, hi).partition(x)
}

struct Item {
    lo: Algebraic,
    hi: Algebraic,
    cand: usize,
}

/// Open interval on which one candidate is minimal.
#[derive(Debug)]
struct Piece {
    lo: Algebraic,
    hi: Algebraic,
    cand: usize,
}

struct Envelope<'a> {
    cands: &'a [UnivariateCandidate],
    /// Tie-break order: position of each candidate when sorted by controller.
    rank: Vec<usize>,
    items: Vec<Item>,
    lo: Rat,
    hi: Rat,
}

fn diff(p: &[Rat; 3], q: &[Rat; 3]) -> [Rat; 3] {
    [&p[0] - &q[0], &p[1] - &q[1], &p[2] - &q[2]]
}

impl<'a> Envelope<'a> {
    fn new(cands: &'a [UnivariateCandidate], lo: &Rat, hi: &Rat) -> Envelope<'a> {
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&i, &j| cands[i].controller.cmp(&cands[j].controller).then(i.cmp(&j)));
        let mut rank = vec![0; cands.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        let mut items = Vec::new();
        for (cand, c) in cands.iter().enumerate() {
            for (a, b) in &c.intervals {
                let (a, b) = (a.clone().max(lo.clone()), b.clone().min(hi.clone()));
                if a <= b {
                    items.push(Item { lo: a.into(), hi: b.into(), cand });
                }
            }
        }
        Envelope { cands, rank, items, lo: lo.clone(), hi: hi.clone() }
    }

    fn value(&self, cand: usize, x: &Algebraic) -> Algebraic {
        Algebraic::eval_quadratic(&self.cands[cand].cost, x)
    }

    /// Whether `j` is strictly below `c` on some `(x, x + ε)`, ties broken by rank.
    fn better_right(&self, j: usize, c: usize, x: &Algebraic) -> bool {
        let d = diff(&self.cands[j].cost, &self.cands[c].cost);
        let s = Algebraic::eval_quadratic(&d, x).signum();
        if s != Ordering::Equal {
            return s == Ordering::Less;
        }
        let slope = [Rat::zero(), &d[0] * &Rat::from_int(2), d[1].clone()];
        let s = Algebraic::eval_quadratic(&slope, x).signum();
        if s != Ordering::Equal {
            return s == Ordering::Less;
        }
        if !d[0].is_zero() {
            return d[0].is_negative();
        }
        self.rank[j] < self.rank[c]
    }

    /// Candidates whose closed intervals contain `x`, ordered by value then rank.
    fn minimal_at(&self, x: &Algebraic) -> Vec<(Algebraic, usize)> {
        let mut seen = vec![false; self.cands.len()];
        let mut best: Vec<(Algebraic, usize)> = Vec::new();
        for it in &self.items {
            if seen[it.cand] || &it.lo > x || &it.hi < x {
                continue;
            }
            seen[it.cand] = true;
            let v = self.value(it.cand, x);
            match best.first().map(|(b, _)| v.cmp(b)) {
                None | Some(Ordering::Equal) => best.push((v, it.cand)),
                Some(Ordering::Less) => best = vec![(v, it.cand)],
                Some(Ordering::Greater) => {}
            }
        }
        best.sort_by_key(|(_, c)| self.rank[*c]);
        best
    }

    fn gap(&self, at: &Algebraic) -> Error {
        Error::CoverageGap { lo: self.lo.clone(), hi: self.hi.clone(), at: at.to_string() }
    }

    /// Open pieces of the envelope covering `(lo, hi)`, split at every event.
    fn sweep(&self) -> Result<Vec<Piece>> {
        let end = Algebraic::from(self.hi.clone());
        let mut x = Algebraic::from(self.lo.clone());
        let mut pieces = Vec::new();
        while x < end {
            let mut cur: Option<usize> = None;
            let mut cur_end = x.clone();
            for it in self.items.iter().filter(|it| it.lo <= x && it.hi > x) {
                match cur {
                    Some(c) if c == it.cand => cur_end = cur_end.max(it.hi.clone()),
                    Some(c) if !self.better_right(it.cand, c, &x) => {}
                    _ => {
                        cur = Some(it.cand);
                        cur_end = it.hi.clone();
                    }
                }
            }
            let c = cur.ok_or_else(|| self.gap(&x))?;
            // the chosen candidate may continue through another of its items
            for it in self.items.iter().filter(|it| it.cand == c && it.lo <= x && it.hi > x) {
                cur_end = cur_end.max(it.hi.clone());
            }
            let mut next = cur_end.min(end.clone());
            for it in &self.items {
                if it.cand == c || it.hi <= x || it.lo >= next {
                    continue;
                }
                if it.lo > x {
                    if it.lo == it.hi || self.better_right(it.cand, c, &it.lo) {
                        next = it.lo.clone();
                        continue;
                    }
                }
                let start = if it.lo > x { &it.lo } else { &x };
                let d = diff(&self.cands[it.cand].cost, &self.cands[c].cost);
                if !d[0].is_zero() && (&(&d[1] * &d[1]) - &(&(&d[0] * &d[2]) * &Rat::from_int(4))).signum() <= 0 {
                    continue; // no sign change
                }
                let Some(roots) = Algebraic::roots(&d) else { continue };
                if let Some(r) = roots.into_iter().find(|r| r > start) {
                    if r < next && r < it.hi {
                        next = r;
                    }
                }
            }
            pieces.push(Piece { lo: x, hi: next.clone(), cand: c });
            x = next;
        }
        Ok(pieces)
    }

    fn worst_case(&self) -> Result<WorstCase> {
        if self.lo == self.hi {
            let x = Algebraic::from(self.lo.clone());
            let (value, _) = self.minimal_at(&x).into_iter().next().ok_or_else(|| self.gap(&x))?;
            return Ok(WorstCase { value, attained: true, argmax: x });
        }
        let pieces = self.sweep()?;
        let mut best: Option<(Algebraic, Vec<Algebraic>)> = None;
        for p in &pieces {
            let q = &self.cands[p.cand].cost;
            let mut points = vec![p.lo.clone(), p.hi.clone()];
            if q[0].is_negative() {
                let vertex = Algebraic::from(-(&q[1] / &(&q[0] * &Rat::from_int(2))));
                if p.lo < vertex && vertex < p.hi {
                    points.push(vertex);
                }
            }
            for x in points {
                let v = Algebraic::eval_quadratic(q, &x);
                match &mut best {
                    Some((b, at)) if *b == v => at.push(x),
                    Some((b, _)) if *b > v => {}
                    _ => best = Some((v, vec![x])),
                }
            }
        }
        let (value, points) = best.expect("non-degenerate interval has pieces");
        let reached = points.iter().find(|x| self.minimal_at(x).first().is_some_and(|(v, _)| *v == value));
        Ok(WorstCase {
            attained: reached.is_some(),
            argmax: reached.unwrap_or(&points[0]).clone(),
            value,
        })
    }

    fn cell(&self, x: &VarId, lo: Algebraic, hi: Algebraic, lo_open: bool, hi_open: bool, cand: usize) -> PartitionCell {
        let [a, b, c] = &self.cands[cand].cost;
        let mut cost = QuadExpr::from_affine(AffineExpr::from_terms([(x.clone(), b.clone())], c.clone()));
        cost.add_quad(x.clone(), x.clone(), a);
        PartitionCell { lo, hi, lo_open, hi_open, cost, controller: self.cands[cand].controller.clone() }
    }

    fn partition(&self, x: &VarId) -> Result<Vec<PartitionCell>> {
        if self.lo == self.hi {
            let p = Algebraic::from(self.lo.clone());
            let (_, c) = self.minimal_at(&p).into_iter().next().ok_or_else(|| self.gap(&p))?;
            return Ok(vec![self.cell(x, p.clone(), p, false, false, c)]);
        }
        let pieces = self.sweep()?;
        let mut cells: Vec<PartitionCell> = Vec::new();
        // `open_cell` is the cell still growing to the right, if any
        let mut open_cell: Option<(Algebraic, bool, usize)> = None;
        for k in 0..=pieces.len() {
            let left = k.checked_sub(1).map(|i| &pieces[i]);
            let right = pieces.get(k);
            let at = right.map_or_else(|| left.unwrap().hi.clone(), |p| p.lo.clone());
            let minimal = self.minimal_at(&at);
            let owner = |c: Option<&Piece>| c.filter(|p| minimal.iter().any(|(_, m)| *m == p.cand)).map(|p| p.cand);
            let point_cand = owner(right).or_else(|| owner(left)).or_else(|| minimal.first().map(|(_, c)| *c)).ok_or_else(|| self.gap(&at))?;
            let joins_left = left.is_some_and(|p| p.cand == point_cand);
            let joins_right = right.is_some_and(|p| p.cand == point_cand);
            if let Some((start, start_open, cand)) = open_cell.take() {
                let merge = joins_left && joins_right;
                if merge {
                    open_cell = Some((start, start_open, cand));
                    continue;
                }
                cells.push(self.cell(x, start, at.clone(), start_open, !joins_left, cand));
            }
            if !joins_left && !joins_right {
                cells.push(self.cell(x, at.clone(), at.clone(), false, false, point_cand));
            }
            if let Some(p) = right {
                open_cell = Some((at, !joins_right, p.cand));
            }
        }
        Ok(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::var;
    use crate::parse::parse_affine;
    use crate::rat::{q, rat};
    use proptest::prelude::*;

    fn cand(intervals: &[(&str, &str)], cost: [i64; 3], tag: &str) -> UnivariateCandidate {
        UnivariateCandidate {
            intervals: intervals.iter().map(|(a, b)| (q(a), q(b))).collect(),
            cost: cost.map(|c| rat(c, 1)),
            controller: [(var("t1"), parse_affine(tag).unwrap())].into_iter().collect(),
        }
    }

    fn eval(c: &[Rat; 3], x: &Rat) -> Rat {
        &(&(&c[0] * x) + &c[1]) * x + &c[2]
    }

    /// Exact pointwise minimum, the oracle for partitions.
    fn brute_min(cands: &[UnivariateCandidate], x: &Rat) -> Option<Rat> {
        cands.iter().filter(|c| c.intervals.iter().any(|(a, b)| a <= x && x <= b)).map(|c| eval(&c.cost, x)).min()
    }

    #[test]
    fn sup_examples() {
        let sq = [rat(1, 1), rat(0, 1), rat(0, 1)];
        assert_eq!(sup_quadratic_on_interval(&sq, &rat(-1, 1), &rat(2, 1)), (rat(4, 1), rat(2, 1)));
        let concave = [rat(-1, 1), rat(2, 1), rat(-1, 1)];
        assert_eq!(sup_quadratic_on_interval(&concave, &rat(0, 1), &rat(3, 1)), (rat(0, 1), rat(1, 1)));
        // (1300 v0² + 20420 v0 + 634817) / 114400
        let vaav = [rat(1300, 114400), rat(20420, 114400), rat(634817, 114400)];
        assert_eq!(sup_quadratic_on_interval(&vaav, &q("5.1"), &q("7.5")), (rat(215273, 28600), q("7.5")));
    }

    #[test]
    fn disjoint_candidates_unchanged() {
        let cs = [cand(&[("0", "1")], [0, 1, 0], "1"), cand(&[("1", "2")], [0, 0, 5], "2")];
        let cells = partition_regions(&cs, &var("x"), &rat(0, 1), &rat(2, 1)).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!((cells[0].lo.clone(), cells[0].hi.clone(), cells[0].hi_open), (rat(0, 1).into(), rat(1, 1).into(), false));
        assert_eq!(cells[1].cost.to_string(), "5");
        assert!(cells[1].lo_open);
    }

    #[test]
    fn overlapping_candidates_split_at_crossing() {
        let cs = [cand(&[("0", "2")], [0, 1, 0], "1"), cand(&[("1", "3")], [0, -1, 2], "2")];
        let cells = partition_regions(&cs, &var("x"), &rat(0, 1), &rat(3, 1)).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].hi, rat(1, 1));
        assert_eq!(cells[0].cost.to_string(), "x");
        assert_eq!(cells[1].cost.to_string(), "-x + 2");
        for k in 0..=100 {
            let x = rat(3 * k, 100);
            let cell = cells.iter().find(|c| c.contains(&x.clone().into())).unwrap();
            assert_eq!(cell.cost.evaluate(&crate::expr::point([("x", x.clone())])).unwrap(), brute_min(&cs, &x).unwrap());
        }
        let w = worst_case_value(&cs, &rat(0, 1), &rat(3, 1)).unwrap();
        assert_eq!((w.value, w.attained), (rat(1, 1).into(), true));
    }

    #[test]
    fn irrational_crossing() {
        // x² and 2 cross at √2
        let cs = [cand(&[("0", "3")], [1, 0, 0], "1"), cand(&[("0", "3")], [0, 0, 2], "2")];
        let cells = partition_regions(&cs, &var("x"), &rat(0, 1), &rat(3, 1)).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].hi, Algebraic::new(rat(0, 1), rat(1, 1), rat(2, 1)));
        let w = worst_case_value(&cs, &rat(0, 1), &rat(3, 1)).unwrap();
        assert_eq!(w.value, rat(2, 1));
    }

    #[test]
    fn unattained_supremum() {
        // value 1 on [0, 1) and a lower candidate only at the point 1
        let cs = [cand(&[("0", "1")], [0, 1, 0], "1"), cand(&[("1", "1")], [0, 0, 0], "2")];
        let w = worst_case_value(&cs, &rat(0, 1), &rat(1, 1)).unwrap();
        assert_eq!((w.value, w.attained), (rat(1, 1).into(), false));
        let cells = partition_regions(&cs, &var("x"), &rat(0, 1), &rat(1, 1)).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells[0].hi_open && cells[1].lo == cells[1].hi);
    }

    #[test]
    fn degenerate_interval() {
        let cs = [cand(&[("0", "3")], [1, 0, 0], "1"), cand(&[("2", "3")], [0, 0, 1], "2")];
        let w = worst_case_value(&cs, &rat(2, 1), &rat(2, 1)).unwrap();
        assert_eq!((w.value, w.attained), (rat(1, 1).into(), true));
        let cells = partition_regions(&cs, &var("x"), &rat(2, 1), &rat(2, 1)).unwrap();
        assert_eq!(cells.len(), 1);
    }

    #[test]
    fn gaps_are_errors() {
        let cs = [cand(&[("0", "1")], [0, 1, 0], "1"), cand(&[("2", "3")], [0, 0, 1], "2")];
        assert!(matches!(worst_case_value(&cs, &rat(0, 1), &rat(3, 1)), Err(Error::CoverageGap { .. })));
        assert!(matches!(worst_case_value(&cs, &rat(3, 2), &rat(3, 2)), Err(Error::CoverageGap { .. })));
    }

    #[test]
    fn equal_costs_break_ties_by_controller() {
        let cs = [cand(&[("0", "1")], [0, 1, 0], "2"), cand(&[("0", "1")], [0, 1, 0], "1")];
        let cells = partition_regions(&cs, &var("x"), &rat(0, 1), &rat(1, 1)).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].controller[&var("t1")].to_string(), "1");
    }

    fn arb_candidate() -> impl Strategy<Value = UnivariateCandidate> {
        (prop::collection::vec((0i64..20, 0i64..8), 1..3), [-3i64..4, -6i64..7, -10i64..11], 0i64..5).prop_map(|(ivs, cost, tag)| {
            UnivariateCandidate {
                intervals: ivs.into_iter().map(|(a, w)| (rat(a, 2), rat(a + w, 2))).collect(),
                cost: cost.map(|c| rat(c, 1)),
                controller: [(var("t1"), AffineExpr::constant(rat(tag, 1)))].into_iter().collect(),
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn partition_is_pointwise_minimum(mut cs in prop::collection::vec(arb_candidate(), 1..7)) {
            // guarantee coverage of [0, 10]
            cs.push(UnivariateCandidate { intervals: vec![(rat(0, 1), rat(10, 1))], cost: [rat(0, 1), rat(0, 1), rat(30, 1)], controller: Controller::new() });
            let cells = partition_regions(&cs, &var("x"), &rat(0, 1), &rat(10, 1)).unwrap();
            for w in cells.windows(2) {
                prop_assert!(w[0].hi == w[1].lo && w[0].hi_open != w[1].lo_open);
            }
            let mut best = Rat::from_int(-1000);
            for k in 0..=400 {
                let x = rat(k, 40);
                let owners: Vec<_> = cells.iter().filter(|c| c.contains(&x.clone().into())).collect();
                prop_assert_eq!(owners.len(), 1);
                let got = owners[0].cost.evaluate(&crate::expr::point([("x", x.clone())])).unwrap();
                let want = brute_min(&cs, &x).unwrap();
                prop_assert_eq!(&got, &want);
                best = best.max(want);
            }
            let w = worst_case_value(&cs, &rat(0, 1), &rat(10, 1)).unwrap();
            prop_assert!(w.value >= Algebraic::from(best));
        }
    }
}
