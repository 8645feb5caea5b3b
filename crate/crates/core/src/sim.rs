//! Exact simulation of synthesized controllers, safety checks on the
//! resulting traces, and a brute-force grid oracle for the optimum.
//!
//! Everything here evaluates the plant directly from the model description:
//! no formula, QE or KKT code is involved, so the oracle is an independent
//! check of the symbolic pipeline.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebraic::Algebraic;
use crate::error::{Error, Result};
use crate::expr::{point, VarId};
use crate::model::{Model, SafetySpec};
use crate::optimize::PartitionCell;
use crate::rat::Rat;

/// Bounds of the sampled disturbances; each error is drawn uniformly from a
/// 2001-point grid on `[-bound, bound]`, endpoints included.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Volume measurement error.
    pub eps: Rat,
    /// Switching time error.
    pub delta: Rat,
    /// Deviation of each segment's consumption rate from its nominal value,
    /// further clipped to the segment's band.
    pub fluctuation: Rat,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> NoiseModel {
        NoiseModel { eps: Rat::zero(), delta: Rat::zero(), fluctuation: Rat::zero(), seed: 0 }
    }

    /// The model's own error bounds, with the widest band half-width as fluctuation.
    pub fn from_model(model: &Model, seed: u64) -> NoiseModel {
        let half = Rat::new(1, 2);
        let fluctuation =
            model.consumption.iter().map(|s| (&s.rate_hi - &s.rate_lo) * half.clone()).max().unwrap_or_else(Rat::zero);
        NoiseModel { eps: model.safety.eps.clone(), delta: model.safety.delta.clone(), fluctuation, seed }
    }

    fn sample(rng: &mut ChaCha8Rng, bound: &Rat) -> Rat {
        if bound.is_zero() {
            return Rat::zero();
        }
        bound * &Rat::new(rng.gen_range(-1000i64..=1000), 1000)
    }
}

/// One simulated cycle. Times are local to the cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub v0: Rat,
    pub measured_v0: Rat,
    /// Commanded switch times; a pair equal to the period is not executed.
    pub planned: Vec<Rat>,
    /// Switch times as executed.
    pub actual: Vec<Rat>,
    /// Consumption rate on each segment.
    pub rates: Vec<Rat>,
    /// Breakpoints `(t, v)` of the piecewise-affine volume.
    pub knots: Vec<(Rat, Rat)>,
    /// Largest gap between the volume and its prediction from measured values.
    pub max_deviation: Rat,
}

impl Cycle {
    pub fn end_volume(&self) -> &Rat {
        &self.knots.last().expect("non-empty cycle").1
    }

    fn pump_on(&self, t: &Rat) -> bool {
        self.actual.chunks(2).any(|p| &p[0] <= t && t < &p[1])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub period: Rat,
    pub cycles: Vec<Cycle>,
}

impl Trace {
    /// `(t, v, pump on)` at multiples of `step`, with `t` global.
    pub fn samples(&self, step: &Rat) -> Vec<(Rat, Rat, bool)> {
        let mut out = Vec::new();
        for (k, c) in self.cycles.iter().enumerate() {
            let offset = &self.period * &Rat::from_int(k as i64);
            let mut t = Rat::zero();
            while t < self.period || (k + 1 == self.cycles.len() && t == self.period) {
                out.push((&offset + &t, interpolate(&c.knots, &t), c.pump_on(&t)));
                t += step;
            }
        }
        out
    }

    pub fn write_csv(&self, step: &Rat, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "t,v,pump_state")?;
        for (t, v, on) in self.samples(step) {
            writeln!(w, "{},{},{}", t.to_decimal(3), v.to_decimal(6), u8::from(on))?;
        }
        Ok(())
    }
}

fn interpolate(knots: &[(Rat, Rat)], t: &Rat) -> Rat {
    let k = knots.partition_point(|(x, _)| x <= t);
    if k == 0 {
        return knots[0].1.clone();
    }
    if k == knots.len() {
        return knots[k - 1].1.clone();
    }
    let ((x0, y0), (x1, y1)) = (&knots[k - 1], &knots[k]);
    y0 + &(&(y1 - y0) * &((t - x0) / (x1 - x0)))
}

/// Length of `[a, b] ∩ [0, t]`.
fn overlap(a: &Rat, b: &Rat, t: &Rat) -> Rat {
    let hi = b.clone().min(t.clone());
    if &hi > a { hi - a } else { Rat::zero() }
}

/// Volume at local time `t` from the start volume, executed switch times and segment rates.
fn volume(model: &Model, v0: &Rat, switches: &[Rat], rates: &[Rat], t: &Rat) -> Rat {
    let mut v = v0.clone();
    for p in switches.chunks(2) {
        v += &(&model.pump.rate * &overlap(&p[0], &p[1], t));
    }
    for (s, r) in model.consumption.iter().zip(rates) {
        v -= &(r * &overlap(&s.t0, &s.t1, t));
    }
    v
}

/// Switch times of the piece covering `v0`, ordered `t1, t2, …`.
fn schedule(pieces: &[PartitionCell], v0: &Rat, cycle: usize) -> Result<Vec<Rat>> {
    let at: Algebraic = v0.clone().into();
    let cell = pieces.iter().find(|c| c.contains(&at)).ok_or_else(|| Error::ControllerSelection { cycle, v0: v0.clone() })?;
    let mut named: Vec<(&VarId, Rat)> = Vec::new();
    let p = point([("v0", v0.clone())]);
    for (t, e) in &cell.controller {
        named.push((t, e.evaluate(&p)?));
    }
    named.sort_by_key(|(t, _)| t.name().trim_start_matches(|c: char| !c.is_ascii_digit()).parse::<usize>().unwrap_or(usize::MAX));
    Ok(named.into_iter().map(|(_, v)| v).collect())
}

/// Range `[lo, hi]` covered by the pieces, if its ends are rational.
fn stable_range(pieces: &[PartitionCell]) -> Option<(Rat, Rat)> {
    let lo = pieces.iter().map(|c| &c.lo).min()?.to_rational()?.clone();
    let hi = pieces.iter().map(|c| &c.hi).max()?.to_rational()?.clone();
    Some((lo, hi))
}

/// Runs `cycles` cycles from `v_init`. The measured start volume is clamped
/// to the controller's range before a piece is chosen, which never moves it
/// further from the true volume.
pub fn simulate(model: &Model, pieces: &[PartitionCell], v_init: &Rat, cycles: usize, noise: &NoiseModel) -> Result<Trace> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let period = &model.period;
    let range = stable_range(pieces);
    let mut v0 = v_init.clone();
    let mut out = Vec::with_capacity(cycles);
    for k in 0..cycles {
        let mut measured = &v0 + &NoiseModel::sample(&mut rng, &noise.eps);
        if let Some((lo, hi)) = &range {
            measured = measured.max(lo.clone()).min(hi.clone());
        }
        let planned = schedule(pieces, &measured, k)?;
        let mut actual = Vec::with_capacity(planned.len());
        for p in planned.chunks(2) {
            if p[0] >= *period {
                actual.extend([period.clone(), period.clone()]);
                continue;
            }
            for t in p {
                let shifted = if t < period { t + &NoiseModel::sample(&mut rng, &noise.delta) } else { t.clone() };
                let floor = actual.last().cloned().unwrap_or_else(Rat::zero);
                actual.push(shifted.max(floor).min(period.clone()));
            }
        }
        let rates: Vec<Rat> = model
            .consumption
            .iter()
            .map(|s| {
                let mid = (&s.rate_lo + &s.rate_hi) * Rat::new(1, 2);
                let r = &mid + &NoiseModel::sample(&mut rng, &noise.fluctuation);
                r.max(s.rate_lo.clone()).min(s.rate_hi.clone())
            })
            .collect();
        let mut times: Vec<Rat> = vec![Rat::zero(), period.clone()];
        times.extend(model.consumption.iter().map(|s| s.t0.clone()));
        times.extend(actual.iter().cloned());
        times.extend(planned.iter().filter(|t| *t <= period).cloned());
        times.sort();
        times.dedup();
        let mut knots = Vec::with_capacity(times.len());
        let mut max_deviation = Rat::zero();
        for t in &times {
            let v = volume(model, &v0, &actual, &rates, t);
            let predicted = volume(model, &measured, &planned, &rates, t);
            max_deviation = max_deviation.max((&v - &predicted).abs());
            knots.push((t.clone(), v));
        }
        let next = knots.last().expect("period is a knot").1.clone();
        out.push(Cycle { v0: v0.clone(), measured_v0: measured, planned, actual, rates, knots, max_deviation });
        v0 = next;
    }
    Ok(Trace { period: period.clone(), cycles: out })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleVerdict {
    pub cycle: usize,
    /// End volume inside the stable interval.
    pub inductive: bool,
    /// Volume inside the safety window throughout.
    pub level: bool,
    /// Commanded switches at least one latency apart.
    pub latency: bool,
    /// First knot time violating the safety window, if any.
    pub level_violation_at: Option<Rat>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub cycles: Vec<CycleVerdict>,
    pub pass: bool,
    pub min_volume: Option<Rat>,
    pub max_volume: Option<Rat>,
    pub max_deviation: Rat,
}

/// Per-cycle verdicts. Volumes are checked at the knots, where a
/// piecewise-affine function takes its extremes. The latency check runs on
/// commanded times, across cycle boundaries too.
pub fn check_safety(trace: &Trace, safety: &SafetySpec, stable: (&Rat, &Rat), latency: &Rat) -> SafetyReport {
    let mut verdicts = Vec::with_capacity(trace.cycles.len());
    let mut last_event: Option<Rat> = None;
    let (mut lo, mut hi): (Option<Rat>, Option<Rat>) = (None, None);
    let mut max_deviation = Rat::zero();
    for (k, c) in trace.cycles.iter().enumerate() {
        let offset = &trace.period * &Rat::from_int(k as i64);
        let violation = c.knots.iter().find(|(_, v)| v < &safety.vmin || v > &safety.vmax).map(|(t, _)| &offset + t);
        for (_, v) in &c.knots {
            lo = Some(lo.map_or(v.clone(), |x| x.min(v.clone())));
            hi = Some(hi.map_or(v.clone(), |x| x.max(v.clone())));
        }
        let end = c.end_volume();
        let mut latency_ok = true;
        for p in c.planned.chunks(2) {
            if p[0] >= trace.period {
                continue;
            }
            for t in p {
                let at = &offset + t;
                if let Some(prev) = &last_event {
                    if &(&at - prev) < latency {
                        latency_ok = false;
                    }
                }
                last_event = Some(at);
            }
        }
        max_deviation = max_deviation.max(c.max_deviation.clone());
        verdicts.push(CycleVerdict {
            cycle: k,
            inductive: stable.0 <= end && end <= stable.1,
            level: violation.is_none(),
            latency: latency_ok,
            level_violation_at: violation,
        });
    }
    let pass = verdicts.iter().all(|v| v.inductive && v.level && v.latency);
    SafetyReport { cycles: verdicts, pass, min_volume: lo, max_volume: hi, max_deviation }
}

/// Exact time average of the volume over the whole trace.
pub fn mean_average_volume(trace: &Trace) -> Option<Rat> {
    if trace.cycles.is_empty() {
        return None;
    }
    let mut integral = Rat::zero();
    for c in &trace.cycles {
        for w in c.knots.windows(2) {
            let ((t0, v0), (t1, v1)) = (&w[0], &w[1]);
            integral += &(&(t1 - t0) * &(v0 + v1)) * &Rat::new(1, 2);
        }
    }
    Some(integral / (&trace.period * &Rat::from_int(trace.cycles.len() as i64)))
}

/// Grid description shared by the oracle's per-volume minimizations.
struct OracleGrid {
    steps: usize,
    latency: usize,
    h: Rat,
    /// Cumulative consumption bounds at every grid time.
    out_lo: Vec<Rat>,
    out_hi: Vec<Rat>,
    /// Contribution to the average volume of pumping from 0 to each grid time.
    pumped_cost: Vec<Rat>,
    /// Average of the nominal cumulative consumption.
    drain: Rat,
}

fn steps_of(x: &Rat, h: &Rat, what: &str) -> Result<usize> {
    let n = x / h;
    if !n.is_integer() || n.is_negative() {
        return Err(Error::Unsupported(format!("{what} {x} is not a multiple of the time step {h}")));
    }
    Ok(n.numer().try_into().map_err(|_| Error::Unsupported("time grid too fine".into()))?)
}

impl OracleGrid {
    fn new(model: &Model, h: &Rat) -> Result<OracleGrid> {
        let period = &model.period;
        let steps = steps_of(period, h, "period")?;
        let latency = steps_of(&model.pump.latency, h, "latency")?;
        let mut out_lo = Vec::with_capacity(steps + 1);
        let mut out_hi = Vec::with_capacity(steps + 1);
        for j in 0..=steps {
            let t = h * &Rat::from_int(j as i64);
            let (mut lo, mut hi) = (Rat::zero(), Rat::zero());
            for s in &model.consumption {
                let d = overlap(&s.t0, &s.t1, &t);
                lo += &(&s.rate_lo * &d);
                hi += &(&s.rate_hi * &d);
            }
            out_lo.push(lo);
            out_hi.push(hi);
        }
        // pumping at time t adds rate·(period − t)/period to the average
        let k = &model.pump.rate / period;
        let pumped_cost = (0..=steps)
            .map(|j| {
                let t = h * &Rat::from_int(j as i64);
                &k * &(&(period * &t) - &(&(&t * &t) * &Rat::new(1, 2)))
            })
            .collect();
        let mut drain = Rat::zero();
        for s in &model.consumption {
            let nominal = (&s.rate_lo + &s.rate_hi) * Rat::new(1, 2);
            let mid = (&s.t0 + &s.t1) * Rat::new(1, 2);
            drain += &(&(&nominal * &(&s.t1 - &s.t0)) * &(period - &mid));
        }
        drain = drain / period.clone();
        Ok(OracleGrid { steps, latency, h: h.clone(), out_lo, out_hi, pumped_cost, drain })
    }
}

/// Best grid schedule found by the oracle for one start volume.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleSchedule {
    pub value: Rat,
    /// `t1 … t2n`; unused activations sit at the period.
    pub times: Vec<Rat>,
}

/// Minimum over grid schedules of the average volume from `v0`, for the
/// stable interval `[l, u]`. Schedules satisfy the latency and activation
/// limits; safety is checked at every grid time, which contains every
/// breakpoint of the piecewise-affine volume.
pub fn oracle_min_at(model: &Model, l: &Rat, u: &Rat, v0: &Rat, t_step: &Rat) -> Result<OracleSchedule> {
    let grid = OracleGrid::new(model, t_step)?;
    oracle_min_on(model, &grid, l, u, v0)
}

/// Cost with the grid index of the predecessor switch.
type Table = Vec<Vec<Option<(Rat, usize)>>>;

fn better(slot: &mut Option<(Rat, usize)>, v: Rat, from: usize) {
    if slot.as_ref().map_or(true, |(s, _)| v < *s) {
        *slot = Some((v, from));
    }
}

fn oracle_min_on(model: &Model, grid: &OracleGrid, l: &Rat, u: &Rat, v0: &Rat) -> Result<OracleSchedule> {
    let n = grid.steps;
    let lat = grid.latency;
    let m = &model.rectify_margin;
    let (floor, ceil) = (&model.safety.vmin + m, &model.safety.vmax - m);
    let (end_lo, end_hi) = (l + m, u - m);
    let unit = &model.pump.rate * &grid.h;
    // ok[e][j]: safe at time j after e steps of pumping (e ≤ j)
    let ok: Vec<Vec<bool>> = (0..=n)
        .map(|e| {
            let level = v0 + &(&unit * &Rat::from_int(e as i64));
            (0..=n)
                .map(|j| {
                    if e > j {
                        return false;
                    }
                    let (lo, hi) = (&level - &grid.out_hi[j], &level - &grid.out_lo[j]);
                    lo >= floor && hi <= ceil && (j < n || (lo >= end_lo && hi <= end_hi))
                })
                .collect()
        })
        .collect();

    // ends[k][e][j]: best cost with the k-th switch-off (or the cycle start) at j
    let mut ends: Vec<Table> = Vec::new();
    let mut starts: Vec<Table> = Vec::new();
    let mut first: Table = vec![vec![None; n + 1]; n + 1];
    first[0][0] = Some((Rat::zero(), 0));
    ends.push(first);
    // (cost, activations, e, j) of the best completed schedule
    let mut best: Option<(Rat, usize, usize, usize)> = None;
    for k in 0..=model.pump.activations {
        let end = &ends[k];
        // remain off until the end of the cycle
        for e in 0..=n {
            let mut reach: Option<(Rat, usize)> = None;
            for j in 0..=n {
                if !ok[e][j] {
                    reach = None;
                    continue;
                }
                if let Some((c, _)) = &end[e][j] {
                    better(&mut reach, c.clone(), j);
                }
            }
            if let Some((c, j)) = reach {
                if best.as_ref().map_or(true, |b| c < b.0) {
                    best = Some((c, k, e, j));
                }
            }
        }
        if k == model.pump.activations {
            break;
        }
        // off for at least one latency, then switch on at j
        let mut start: Table = vec![vec![None; n + 1]; n + 1];
        for e in 0..=n {
            let mut window: Option<(Rat, usize)> = None;
            let mut since = 0;
            for j in 0..=n {
                if !ok[e][j] {
                    window = None;
                    since = j + 1;
                    continue;
                }
                if j >= lat && j - lat >= since {
                    if let Some((c, _)) = &end[e][j - lat] {
                        better(&mut window, c.clone(), j - lat);
                    }
                }
                start[e][j] = window.clone();
            }
        }
        // on for at least one latency along the diagonal j − e = d, then off at j
        let mut next: Table = vec![vec![None; n + 1]; n + 1];
        for d in 0..=n {
            let mut window: Option<(Rat, usize)> = None;
            let mut since = 0;
            for i in 0..=n - d {
                let j = d + i;
                if !ok[i][j] {
                    window = None;
                    since = i + 1;
                    continue;
                }
                if i >= lat && i - lat >= since {
                    if let Some((c, _)) = &start[i - lat][j - lat] {
                        better(&mut window, c - &grid.pumped_cost[j - lat], j - lat);
                    }
                }
                if let Some((w, a)) = &window {
                    next[i][j] = Some((w + &grid.pumped_cost[j], *a));
                }
            }
        }
        starts.push(start);
        ends.push(next);
    }
    let (cost, k, mut e, mut j) = best.ok_or_else(|| Error::OracleInfeasible(v0.clone()))?;
    let at = |j: usize| &grid.h * &Rat::from_int(j as i64);
    let mut times = vec![model.period.clone(); 2 * model.pump.activations];
    for phase in (1..=k).rev() {
        let (_, a) = ends[phase][e][j].clone().expect("traceback follows stored cells");
        let ea = e - (j - a);
        times[2 * phase - 2] = at(a);
        times[2 * phase - 1] = at(j);
        let (_, s) = starts[phase - 1][ea][a].clone().expect("traceback follows stored cells");
        e = ea;
        j = s;
    }
    Ok(OracleSchedule { value: v0 - &grid.drain + cost, times })
}

/// Worst case over `v0` on a grid of `[l, u]` (with `u` always included) of
/// the best grid schedule.
pub fn brute_force_oracle(model: &Model, l: &Rat, u: &Rat, t_step: &Rat, v0_step: &Rat) -> Result<Rat> {
    if !t_step.is_positive() || !v0_step.is_positive() {
        return Err(Error::Unsupported("oracle steps must be positive".into()));
    }
    let grid = OracleGrid::new(model, t_step)?;
    let mut v0s = Vec::new();
    let mut v = l.clone();
    while &v < u {
        v0s.push(v.clone());
        v += v0_step;
    }
    v0s.push(u.clone());
    let values: Vec<Result<Rat>> = v0s.par_iter().map(|v0| oracle_min_on(model, &grid, l, u, v0).map(|s| s.value)).collect();
    // sequential pass so the reported failure is the smallest volume
    let values: Vec<Rat> = values.into_iter().collect::<Result<_>>()?;
    Ok(values.into_iter().max().expect("at least one volume"))
}

/// Lipschitz-based resolution of the oracle: `max |∂g/∂t_i| · t_step · dim(t)`.
pub fn oracle_resolution(model: &Model, t_step: &Rat) -> Rat {
    // |∂g/∂t| = rate·|period − t|/period ≤ rate on [0, period]
    &(&model.pump.rate * t_step) * &Rat::from_int(2 * model.pump.activations as i64)
}
