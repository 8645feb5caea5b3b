//! Exact feasibility of a conjunction of linear atoms.
//!
//! General simplex over bounded variables with Bland's rule. Strict bounds use
//! values `a + b·δ` for an infinitesimal `δ > 0`; a concrete rational witness
//! is recovered by choosing `δ` small enough once the tableau is feasible.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use crate::expr::{Point, VarId};
use crate::formula::{Atom, Rel};
use crate::rat::Rat;

/// `real + inf·δ`, ordered lexicographically.
#[derive(Clone, PartialEq, Eq, Debug)]
struct DeltaRat {
    real: Rat,
    inf: Rat,
}

impl DeltaRat {
    fn new(real: Rat, inf: Rat) -> Self {
        DeltaRat { real, inf }
    }

    fn zero() -> Self {
        DeltaRat::new(Rat::zero(), Rat::zero())
    }

    fn scale(&self, k: &Rat) -> Self {
        DeltaRat::new(&self.real * k, &self.inf * k)
    }
}

impl PartialOrd for DeltaRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DeltaRat {
    fn cmp(&self, other: &Self) -> Ordering {
        self.real.cmp(&other.real).then_with(|| self.inf.cmp(&other.inf))
    }
}

impl Add<&DeltaRat> for &DeltaRat {
    type Output = DeltaRat;
    fn add(self, rhs: &DeltaRat) -> DeltaRat {
        DeltaRat::new(&self.real + &rhs.real, &self.inf + &rhs.inf)
    }
}

impl Sub<&DeltaRat> for &DeltaRat {
    type Output = DeltaRat;
    fn sub(self, rhs: &DeltaRat) -> DeltaRat {
        DeltaRat::new(&self.real - &rhs.real, &self.inf - &rhs.inf)
    }
}

impl Mul<&Rat> for &DeltaRat {
    type Output = DeltaRat;
    fn mul(self, k: &Rat) -> DeltaRat {
        self.scale(k)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Place {
    Basic,
    Nonbasic,
}

struct Tableau {
    /// Dense rows: `x[basic[r]] = Σ_k rows[r][k]·x[k]` over nonbasic `k`.
    rows: Vec<Vec<Rat>>,
    basic: Vec<usize>,
    place: Vec<Place>,
    value: Vec<DeltaRat>,
    lower: Vec<Option<DeltaRat>>,
    upper: Vec<Option<DeltaRat>>,
    /// Index of the atom that set each bound.
    lower_src: Vec<usize>,
    upper_src: Vec<usize>,
}

impl Tableau {
    fn violated(&self, v: usize) -> Option<Ordering> {
        if let Some(l) = &self.lower[v] {
            if self.value[v] < *l {
                return Some(Ordering::Less);
            }
        }
        if let Some(u) = &self.upper[v] {
            if self.value[v] > *u {
                return Some(Ordering::Greater);
            }
        }
        None
    }

    fn can_increase(&self, v: usize) -> bool {
        self.upper[v].as_ref().map_or(true, |u| self.value[v] < *u)
    }

    fn can_decrease(&self, v: usize) -> bool {
        self.lower[v].as_ref().map_or(true, |l| self.value[v] > *l)
    }

    fn pivot_and_update(&mut self, r: usize, j: usize, target: DeltaRat) {
        let b = self.basic[r];
        let a = self.rows[r][j].clone();
        let theta = (&target - &self.value[b]).scale(&a.recip());
        self.value[b] = target;
        self.value[j] = &self.value[j] + &theta;
        for (k, row) in self.rows.iter().enumerate() {
            if k != r && !row[j].is_zero() {
                let bk = self.basic[k];
                self.value[bk] = &self.value[bk] + &(&theta * &row[j]);
            }
        }
        self.pivot(r, j);
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let b = self.basic[r];
        let inv = self.rows[r][j].recip();
        let mut pivot_row = std::mem::take(&mut self.rows[r]);
        for (k, c) in pivot_row.iter_mut().enumerate() {
            *c = if k == j {
                Rat::zero()
            } else if k == b {
                inv.clone()
            } else if c.is_zero() {
                continue;
            } else {
                -(&*c * &inv)
            };
        }
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[j].is_zero() {
                continue;
            }
            let f = std::mem::replace(&mut row[j], Rat::zero());
            for (k, c) in pivot_row.iter().enumerate() {
                if !c.is_zero() {
                    row[k] = &row[k] + &(&f * c);
                }
            }
        }
        self.rows[r] = pivot_row;
        self.basic[r] = j;
        self.place[j] = Place::Basic;
        self.place[b] = Place::Nonbasic;
    }

    /// `Err` carries the atoms of a conflicting row.
    fn check(&mut self) -> Result<(), Vec<usize>> {
        loop {
            // Bland's rule: smallest violating basic variable, smallest eligible entering one.
            let mut leaving: Option<(usize, usize, Ordering)> = None;
            for (r, &b) in self.basic.iter().enumerate() {
                if let Some(dir) = self.violated(b) {
                    if leaving.map_or(true, |(_, lb, _)| b < lb) {
                        leaving = Some((r, b, dir));
                    }
                }
            }
            let Some((r, b, dir)) = leaving else { return Ok(()) };
            let mut entering: Option<usize> = None;
            for (k, a) in self.rows[r].iter().enumerate() {
                if a.is_zero() || self.place[k] == Place::Basic {
                    continue;
                }
                let ok = match dir {
                    Ordering::Less => (a.is_positive() && self.can_increase(k)) || (a.is_negative() && self.can_decrease(k)),
                    _ => (a.is_positive() && self.can_decrease(k)) || (a.is_negative() && self.can_increase(k)),
                };
                if ok && entering.map_or(true, |e| k < e) {
                    entering = Some(k);
                }
            }
            let Some(j) = entering else { return Err(self.explain(r, dir)) };
            let target = match dir {
                Ordering::Less => self.lower[b].clone().unwrap(),
                _ => self.upper[b].clone().unwrap(),
            };
            self.pivot_and_update(r, j, target);
        }
    }

    /// Bounds that pin a row whose basic variable cannot be repaired.
    fn explain(&self, r: usize, dir: Ordering) -> Vec<usize> {
        let b = self.basic[r];
        let below = dir == Ordering::Less;
        let mut core = vec![if below { self.lower_src[b] } else { self.upper_src[b] }];
        for (k, a) in self.rows[r].iter().enumerate() {
            if a.is_zero() || self.place[k] == Place::Basic {
                continue;
            }
            // the variable sits at the bound that blocks the repair
            core.push(if a.is_positive() == below { self.upper_src[k] } else { self.lower_src[k] });
        }
        core.sort_unstable();
        core.dedup();
        core
    }

    /// A `δ` small enough that every bound holds for the concrete values.
    fn concrete_delta(&self) -> Rat {
        let mut delta = Rat::one();
        let mut tighten = |lo: &DeltaRat, hi: &DeltaRat| {
            // need lo.real + lo.inf·δ ≤ hi.real + hi.inf·δ
            if lo.real < hi.real && lo.inf > hi.inf {
                let d = (&hi.real - &lo.real) / (&lo.inf - &hi.inf);
                if d < delta {
                    delta = d;
                }
            }
        };
        for v in 0..self.value.len() {
            if let Some(l) = &self.lower[v] {
                tighten(l, &self.value[v]);
            }
            if let Some(u) = &self.upper[v] {
                tighten(&self.value[v], u);
            }
        }
        delta
    }
}

/// Outcome of a feasibility check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    /// A rational point satisfying every atom (variables not mentioned are absent).
    Sat(Point),
    Unsat,
}

/// Decides whether the conjunction of `atoms` has a real (equivalently, rational) solution.
pub fn check(atoms: &[Atom]) -> Feasibility {
    match solve(atoms) {
        Ok(p) => Feasibility::Sat(p),
        Err(_) => Feasibility::Unsat,
    }
}

/// A satisfying point, or the indices of an infeasible subset of `atoms`.
pub fn solve(atoms: &[Atom]) -> Result<Point, Vec<usize>> {
    let mut var_index: BTreeMap<VarId, usize> = BTreeMap::new();
    for (i, a) in atoms.iter().enumerate() {
        if a.is_contradiction() {
            return Err(vec![i]);
        }
        for v in a.vars() {
            let n = var_index.len();
            var_index.entry(v.clone()).or_insert(n);
        }
    }
    let n = var_index.len();
    let mut lower: Vec<Option<DeltaRat>> = vec![None; n];
    let mut upper: Vec<Option<DeltaRat>> = vec![None; n];
    let mut lower_src: Vec<usize> = vec![usize::MAX; n];
    let mut upper_src: Vec<usize> = vec![usize::MAX; n];
    // one slack per distinct linear form
    let mut slack_of: BTreeMap<Vec<(usize, Rat)>, usize> = BTreeMap::new();
    let mut slack_rows: Vec<Vec<(usize, Rat)>> = Vec::new();

    let mut assert_bound = |v: usize, rel: Rel, bound: Rat, src: usize, lower: &mut Vec<Option<DeltaRat>>, upper: &mut Vec<Option<DeltaRat>>| {
        if lower_src.len() <= v {
            lower_src.resize(v + 1, usize::MAX);
            upper_src.resize(v + 1, usize::MAX);
        }
        let (lo, hi) = match rel {
            Rel::Lt => (None, Some(DeltaRat::new(bound, -Rat::one()))),
            Rel::Le => (None, Some(DeltaRat::new(bound, Rat::zero()))),
            Rel::Eq => (Some(DeltaRat::new(bound.clone(), Rat::zero())), Some(DeltaRat::new(bound, Rat::zero()))),
            Rel::Ge => (Some(DeltaRat::new(bound, Rat::zero())), None),
            Rel::Gt => (Some(DeltaRat::new(bound, Rat::one())), None),
        };
        if let Some(lo) = lo {
            if lower[v].as_ref().map_or(true, |cur| lo > *cur) {
                lower[v] = Some(lo);
                lower_src[v] = src;
            }
        }
        if let Some(hi) = hi {
            if upper[v].as_ref().map_or(true, |cur| hi < *cur) {
                upper[v] = Some(hi);
                upper_src[v] = src;
            }
        }
    };

    for (i, a) in atoms.iter().enumerate() {
        if a.is_tautology() {
            continue;
        }
        let form: Vec<(usize, Rat)> = a.lhs.coeffs().iter().map(|(v, c)| (var_index[v], c.clone())).collect();
        let bound = -a.lhs.constant_term().clone();
        if form.len() == 1 {
            let (v, c) = &form[0];
            let rel = if c.is_negative() { a.rel.flip() } else { a.rel };
            assert_bound(*v, rel, &bound / c, i, &mut lower, &mut upper);
            continue;
        }
        let s = match slack_of.get(&form) {
            Some(&s) => s,
            None => {
                slack_rows.push(form.clone());
                lower.push(None);
                upper.push(None);
                let s = n + slack_rows.len() - 1;
                slack_of.insert(form, s);
                s
            }
        };
        assert_bound(s, a.rel, bound, i, &mut lower, &mut upper);
    }
    drop(assert_bound);
    lower_src.resize(lower.len(), usize::MAX);
    upper_src.resize(lower.len(), usize::MAX);
    for v in 0..lower.len() {
        if let (Some(l), Some(u)) = (&lower[v], &upper[v]) {
            if l > u {
                let mut core = vec![lower_src[v], upper_src[v]];
                core.dedup();
                return Err(core);
            }
        }
    }

    let total = lower.len();
    let mut value = vec![DeltaRat::zero(); total];
    for v in 0..n {
        value[v] = match (&lower[v], &upper[v]) {
            (Some(l), _) => l.clone(),
            (None, Some(u)) => u.clone(),
            (None, None) => DeltaRat::zero(),
        };
    }
    let mut rows = Vec::with_capacity(slack_rows.len());
    let mut basic = Vec::with_capacity(slack_rows.len());
    let mut place = vec![Place::Nonbasic; total];
    for (r, form) in slack_rows.iter().enumerate() {
        let mut row = vec![Rat::zero(); total];
        let mut val = DeltaRat::zero();
        for (v, c) in form {
            row[*v] = c.clone();
            val = &val + &(&value[*v] * c);
        }
        let s = n + r;
        value[s] = val;
        rows.push(row);
        basic.push(s);
        place[s] = Place::Basic;
    }
    let mut t = Tableau { rows, basic, place, value, lower, upper, lower_src, upper_src };
    t.check()?;
    let delta = t.concrete_delta();
    Ok(var_index
        .into_iter()
        .map(|(v, i)| {
            let x = &t.value[i];
            (v, &x.real + &(&x.inf * &delta))
        })
        .collect())
}

/// Convenience wrapper: a satisfying point, if any.
pub fn find_point(atoms: &[Atom]) -> Option<Point> {
    match check(atoms) {
        Feasibility::Sat(p) => Some(p),
        Feasibility::Unsat => None,
    }
}
