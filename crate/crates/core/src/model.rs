//! Declarative plant description and the constraint system derived from it.
//!
//! A cycle of length `period` starts with volume `v0`. A consumer draws oil at
//! a piecewise-constant rate known only up to a band per segment; a pump adds
//! oil at a fixed rate while on, switched at times `t1 ≤ … ≤ t2n`. Safety asks
//! that the volume stay inside `[vmin, vmax]` and end the cycle inside the
//! stable interval `[L, U]`, both tightened by a measurement margin.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{var, AffineExpr, QuadExpr, VarId};
use crate::formula::{Formula, Polyhedron, Rel};
use crate::qe;
use crate::rat::Rat;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: Rat,
    pub t1: Rat,
    pub rate_lo: Rat,
    pub rate_hi: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub rate: Rat,
    pub latency: Rat,
    pub activations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetySpec {
    pub vmin: Rat,
    pub vmax: Rat,
    pub eps: Rat,
    pub delta: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    pub period: Rat,
    pub consumption: Vec<Segment>,
    pub pump: PumpSpec,
    pub safety: SafetySpec,
    pub rectify_margin: Rat,
}

/// Cumulative consumption bound at the start of each segment.
#[derive(Clone, Debug)]
pub struct ConsumptionProfile {
    pub segments: Vec<Segment>,
    /// `(lower, upper)` cumulative volume at each segment start, plus the end.
    pub knots: Vec<(Rat, Rat)>,
}

impl ConsumptionProfile {
    /// Cumulative lower and upper bound of consumption at time `t` in segment `k`.
    pub fn bounds_at(&self, k: usize, t: &AffineExpr) -> (AffineExpr, AffineExpr) {
        let s = &self.segments[k];
        let (lo0, hi0) = &self.knots[k];
        let dt = t - &AffineExpr::constant(s.t0.clone());
        (dt.scale(&s.rate_lo) + AffineExpr::constant(lo0.clone()), dt.scale(&s.rate_hi) + AffineExpr::constant(hi0.clone()))
    }

    /// Nominal (mid-band) cumulative consumption at a breakpoint-free time.
    pub fn nominal_at(&self, t: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for s in &self.segments {
            if *t <= s.t0 {
                break;
            }
            let end = if *t < s.t1 { t.clone() } else { s.t1.clone() };
            acc += nominal_rate(s) * (end - &s.t0);
        }
        acc
    }

    /// `∫₀^period` of the nominal cumulative consumption.
    pub fn nominal_integral(&self) -> Rat {
        let mut acc = Rat::zero();
        let mut cum = Rat::zero();
        for s in &self.segments {
            let len = &s.t1 - &s.t0;
            let r = nominal_rate(s);
            // trapezoid is exact for the affine cumulative curve
            acc += &len * (&cum + &(&cum + &(&r * &len))) / Rat::from_int(2);
            cum += &r * &len;
        }
        acc
    }
}

/// Mid-band rate of a segment; the nominal consumption used by the objective.
pub fn nominal_rate(s: &Segment) -> Rat {
    (&s.rate_lo + &s.rate_hi) / Rat::from_int(2)
}

impl Model {
    pub fn from_json(text: &str) -> Result<Model> {
        let m: Model = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        Model::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.period.is_positive() {
            return Err(Error::Model("period must be positive".into()));
        }
        let mut at = Rat::zero();
        for (k, s) in self.consumption.iter().enumerate() {
            if s.t0 != at {
                return Err(Error::Model(format!("segment {k} starts at {} but the previous one ends at {at}", s.t0)));
            }
            if s.t1 <= s.t0 {
                return Err(Error::Model(format!("segment {k} is empty")));
            }
            if s.rate_lo > s.rate_hi || s.rate_lo.is_negative() {
                return Err(Error::Model(format!("segment {k} has an invalid rate band")));
            }
            at = s.t1.clone();
        }
        if at != self.period {
            return Err(Error::Model(format!("consumption profile ends at {at}, not at the period {}", self.period)));
        }
        if !self.pump.rate.is_positive() || self.pump.latency.is_negative() {
            return Err(Error::Model("pump rate must be positive and latency non-negative".into()));
        }
        let m = &self.rectify_margin;
        if &self.safety.vmin + m >= &self.safety.vmax - m {
            return Err(Error::Model("rectified safety window is empty".into()));
        }
        Ok(())
    }

    pub fn profile(&self) -> ConsumptionProfile {
        let mut knots = vec![(Rat::zero(), Rat::zero())];
        for s in &self.consumption {
            let (lo, hi) = knots.last().unwrap().clone();
            let len = &s.t1 - &s.t0;
            knots.push((lo + &s.rate_lo * &len, hi + &s.rate_hi * &len));
        }
        ConsumptionProfile { segments: self.consumption.clone(), knots }
    }

    pub fn switch_points(&self) -> usize {
        2 * self.pump.activations
    }

    /// `t1 … t2n`.
    pub fn switch_vars(&self) -> Vec<VarId> {
        (1..=self.switch_points()).map(|i| var(&format!("t{i}"))).collect()
    }
}

/// Names of the variables shared by every constraint.
pub struct Vars {
    pub t: VarId,
    pub v: VarId,
    pub vin: VarId,
    pub vout: VarId,
    pub v0: VarId,
    pub l: VarId,
    pub u: VarId,
}

pub fn vars() -> Vars {
    Vars { t: var("t"), v: var("v"), vin: var("Vin"), vout: var("Vout"), v0: var("v0"), l: var("L"), u: var("U") }
}

fn av(v: &VarId) -> AffineExpr {
    AffineExpr::var(v.clone())
}

fn ac(c: &Rat) -> AffineExpr {
    AffineExpr::constant(c.clone())
}

fn between(lo: AffineExpr, x: AffineExpr, hi: AffineExpr) -> Formula {
    Formula::and(vec![Formula::cmp(lo, Rel::Le, x.clone()), Formula::cmp(x, Rel::Le, hi)])
}

/// The constraint system of a model, one formula per constraint, plus the
/// safety condition.
#[derive(Clone, Debug)]
pub struct Constraints {
    /// Consumption envelope.
    pub c1: Formula,
    /// Switching schedules respecting the pump latency.
    pub c2: Formula,
    /// Pumped volume as a function of time and switching times.
    pub c3: Formula,
    /// Volume balance.
    pub c4: Formula,
    /// End-of-cycle volume inside the rectified stable interval.
    pub c5: Formula,
    /// Volume inside the rectified safety window.
    pub c6: Formula,
    /// Cycle-start volume inside the stable interval.
    pub c7: Formula,
    /// Safety for every time and consumption: `∀ t, v, Vin, Vout. (C1 ∧ C3 ∧ C4 → C5 ∧ C6)`.
    pub safe: Formula,
    /// Stable-interval condition: `∀ v0. (C7 → ∃ t1 … t2n. (C2 ∧ safe))`.
    pub c8: Formula,
}

pub fn build_constraints(model: &Model) -> Result<Constraints> {
    model.validate()?;
    let x = vars();
    let period = &model.period;
    let t = av(&x.t);
    let profile = model.profile();

    let c1 = Formula::and(
        (0..profile.segments.len())
            .map(|k| {
                let s = &profile.segments[k];
                let (lo, hi) = profile.bounds_at(k, &t);
                Formula::implies(between(ac(&s.t0), t.clone(), ac(&s.t1)), between(lo, av(&x.vout), hi))
            })
            .collect(),
    );

    let ts = model.switch_vars();
    let n = model.pump.activations;
    let lat = &model.pump.latency;
    let c2 = Formula::or(
        (0..=n)
            .rev()
            .map(|k| {
                let mut parts = Vec::new();
                if k > 0 {
                    parts.push(Formula::cmp(av(&ts[0]), Rel::Ge, ac(lat)));
                    for i in 1..2 * k {
                        parts.push(Formula::cmp(av(&ts[i]) - av(&ts[i - 1]), Rel::Ge, ac(lat)));
                    }
                    parts.push(Formula::cmp(av(&ts[2 * k - 1]), Rel::Le, ac(period)));
                }
                for tj in &ts[2 * k..] {
                    parts.push(Formula::cmp(av(tj), Rel::Eq, ac(period)));
                }
                Formula::and(parts)
            })
            .collect(),
    );
    // with no switch variables the single schedule is trivially admissible
    let c2 = if ts.is_empty() { Formula::True } else { c2 };

    let rate = &model.pump.rate;
    let mut bounds: Vec<AffineExpr> = vec![AffineExpr::zero()];
    bounds.extend(ts.iter().map(av));
    bounds.push(ac(period));
    let mut c3_parts = Vec::new();
    let mut pumped = AffineExpr::zero();
    for i in 0..bounds.len() - 1 {
        let (a, b) = (&bounds[i], &bounds[i + 1]);
        let on = i % 2 == 1;
        let vin_here = if on { &pumped + &(&t - a).scale(rate) } else { pumped.clone() };
        c3_parts.push(Formula::implies(between(a.clone(), t.clone(), b.clone()), Formula::cmp(av(&x.vin), Rel::Eq, vin_here)));
        if on {
            pumped = &pumped + &(b - a).scale(rate);
        }
    }
    let c3 = Formula::and(c3_parts);

    let c4 = Formula::cmp(av(&x.v), Rel::Eq, av(&x.v0) + av(&x.vin) - av(&x.vout));
    let m = &model.rectify_margin;
    let c5 = Formula::implies(
        Formula::cmp(t.clone(), Rel::Eq, ac(period)),
        between(av(&x.l) + ac(m), av(&x.v), av(&x.u) - ac(m)),
    );
    let c6 = Formula::implies(
        between(AffineExpr::zero(), t.clone(), ac(period)),
        between(ac(&(&model.safety.vmin + m)), av(&x.v), ac(&(&model.safety.vmax - m))),
    );
    let c7 = between(av(&x.l), av(&x.v0), av(&x.u));
    let safe = Formula::forall(
        vec![x.t.clone(), x.v.clone(), x.vin.clone(), x.vout.clone()],
        Formula::implies(Formula::and(vec![c1.clone(), c3.clone(), c4.clone()]), Formula::and(vec![c5.clone(), c6.clone()])),
    );
    let c8 = Formula::forall(
        vec![x.v0.clone()],
        Formula::implies(c7.clone(), Formula::exists(ts.clone(), Formula::and(vec![c2.clone(), safe.clone()]))),
    );
    Ok(Constraints { c1, c2, c3, c4, c5, c6, c7, safe, c8 })
}

/// Quantifier-free safety condition over `(t1 … t2n, v0, L, U)`.
///
/// The result is only meaningful together with C2: it agrees with `safe` on
/// every schedule satisfying C2 and is unconstrained elsewhere. Restricting
/// the search to valid schedules keeps the number of cubes small.
pub fn eliminate_safety(c: &Constraints) -> Result<Formula> {
    let Formula::Forall(vs, body) = &c.safe else { unreachable!("safety is universally quantified") };
    qe::eliminate_forall(&Formula::implies(c.c2.clone(), (**body).clone()), vs)
}

/// The admissible stable intervals: QE of C8, a constraint on `(L, U)` only.
pub fn derive_admissible(c: &Constraints) -> Result<Formula> {
    derive_admissible_from(c, &eliminate_safety(c)?)
}

/// As [`derive_admissible`], reusing an already eliminated safety condition.
pub fn derive_admissible_from(c: &Constraints, safe_qf: &Formula) -> Result<Formula> {
    let x = vars();
    let ts: Vec<VarId> = c2_vars(c);
    let inner = Formula::and(vec![c.c2.clone(), safe_qf.clone()]);
    let exists_t = qe::eliminate_exists(&inner, &ts)?;
    let body = Formula::implies(c.c7.clone(), exists_t);
    let admissible = qe::eliminate_forall(&body, &[x.v0.clone()])?;
    // an empty stable interval satisfies C8 vacuously; it is not a candidate
    let nonempty = qe::eliminate_exists(&c.c7, &[x.v0])?;
    qe::simplify(&Formula::and(vec![nonempty, admissible]))
}

fn c2_vars(c: &Constraints) -> Vec<VarId> {
    let Formula::Forall(_, body) = &c.c8 else { unreachable!() };
    let Formula::Implies(_, rhs) = &**body else { unreachable!() };
    match &**rhs {
        Formula::Exists(vs, _) => vs.clone(),
        _ => Vec::new(),
    }
}

/// Cells of `C2 ∧ C7 ∧ admissible ∧ safe`, each non-empty; their union is the
/// set of `(L, U, v0, t)` with a safe schedule.
pub fn derive_feasible_cells(c: &Constraints, admissible: &Formula, safe_qf: &Formula) -> Result<Vec<Polyhedron>> {
    let domain = Formula::and(vec![c.c2.clone(), c.c7.clone(), admissible.clone(), safe_qf.clone()]);
    crate::formula::to_dnf(&domain)
}

/// Average volume over a cycle, `(1/period)·∫ v dt`, under nominal consumption.
pub fn build_objective(model: &Model) -> QuadExpr {
    let x = vars();
    let period = &model.period;
    let ts = model.switch_vars();
    let profile = model.profile();
    let k = &model.pump.rate / period;
    // each on-interval [a, b] contributes rate·(b − a)·(period − (a + b)/2)
    let mut g = QuadExpr::from_affine(av(&x.v0) - ac(&(profile.nominal_integral() / period)));
    let half = Rat::new(1, 2);
    for pair in ts.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let len = av(b) - av(a);
        let rest = ac(period) - (av(a) + av(b)).scale(&half);
        g = g + len.mul_affine(&rest).scale(&k);
    }
    g
}

/// Worst-case deviation between predicted and true volume: `rate·switch_points·δ + ε`.
/// Fails unless it is strictly below the model's rectification margin.
pub fn deviation_margin(model: &Model, switch_points: usize) -> Result<Rat> {
    let exact = &model.pump.rate * &Rat::from_int(switch_points as i64) * &model.safety.delta + &model.safety.eps;
    if exact >= model.rectify_margin {
        return Err(Error::MarginViolated { exact, declared: model.rectify_margin.clone() });
    }
    Ok(exact)
}

/// Switch-time assignment as affine maps of the cycle-start volume.
pub type Controller = BTreeMap<VarId, AffineExpr>;

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::expr::point;
    use crate::parse::parse_quad;
    use crate::rat::{q, rat};

    pub fn oilpump(activations: usize, margin: &str) -> Model {
        let seg = |t0: i64, t1: i64, lo: &str, hi: &str| Segment { t0: rat(t0, 1), t1: rat(t1, 1), rate_lo: q(lo), rate_hi: q(hi) };
        Model {
            period: rat(20, 1),
            consumption: vec![
                seg(0, 2, "0", "0"),
                seg(2, 4, "1.1", "1.3"),
                seg(4, 8, "0", "0"),
                seg(8, 10, "1.1", "1.3"),
                seg(10, 12, "2.4", "2.6"),
                seg(12, 14, "0", "0"),
                seg(14, 16, "1.6", "1.8"),
                seg(16, 18, "0.4", "0.6"),
                seg(18, 20, "0", "0"),
            ],
            pump: PumpSpec { rate: q("2.2"), latency: rat(2, 1), activations },
            safety: SafetySpec { vmin: q("4.9"), vmax: q("25.1"), eps: q("0.06"), delta: q("0.015") },
            rectify_margin: q(margin),
        }
    }

    #[test]
    fn envelope_matches_known_knots() {
        let p = oilpump(2, "0.2").profile();
        let knots: Vec<(String, String)> = p.knots.iter().map(|(a, b)| (a.to_decimal(1), b.to_decimal(1))).collect();
        let expect = [
            ("0.0", "0.0"),
            ("0.0", "0.0"),
            ("2.2", "2.6"),
            ("2.2", "2.6"),
            ("4.4", "5.2"),
            ("9.2", "10.4"),
            ("9.2", "10.4"),
            ("12.4", "14.0"),
            ("13.2", "15.2"),
            ("13.2", "15.2"),
        ];
        for (k, (a, b)) in expect.iter().enumerate() {
            assert_eq!((knots[k].0.as_str(), knots[k].1.as_str()), (*a, *b), "knot {k}");
        }
    }

    #[test]
    fn objective_closed_form_two_activations() {
        let g = build_objective(&oilpump(2, "0.2"));
        let expect = parse_quad("(20*v0 + 1.1*(t1^2 - t2^2 + t3^2 - t4^2 - 40*t1 + 40*t2 - 40*t3 + 40*t4) - 132.2)/20").unwrap();
        assert_eq!(g, expect);
    }

    #[test]
    fn objective_closed_form_three_activations() {
        let g = build_objective(&oilpump(3, "0.3"));
        let expect = parse_quad(
            "(20*v0 + 1.1*(t1^2 - t2^2 + t3^2 - t4^2 + t5^2 - t6^2 - 40*t1 + 40*t2 - 40*t3 + 40*t4 - 40*t5 + 40*t6) - 132.2)/20",
        )
        .unwrap();
        assert_eq!(g, expect);
    }

    #[test]
    fn objective_without_pump_is_mean_of_constant_drain() {
        // constant rate r over [0, 20]: g = v0 − 10r
        let mut m = oilpump(0, "0.2");
        m.consumption = vec![Segment { t0: rat(0, 1), t1: rat(20, 1), rate_lo: q("0.5"), rate_hi: q("0.7") }];
        let g = build_objective(&m);
        assert_eq!(g, parse_quad("v0 - 6").unwrap());
    }

    #[test]
    fn never_on_cost() {
        let g = build_objective(&oilpump(2, "0.2"));
        let p = point([("v0", rat(25, 1)), ("t1", rat(20, 1)), ("t2", rat(20, 1)), ("t3", rat(20, 1)), ("t4", rat(20, 1))]);
        assert_eq!(g.evaluate(&p).unwrap(), q("18.39"));
    }

    #[test]
    fn constraint_shapes() {
        let c = build_constraints(&oilpump(2, "0.2")).unwrap();
        assert_eq!(c.c2.disjunct_count(), 3);
        assert_eq!(c.c3.conjunct_count(), 5);
        assert_eq!(c.c1.conjunct_count(), 9);
        let c = build_constraints(&oilpump(3, "0.3")).unwrap();
        assert_eq!(c.c2.disjunct_count(), 4);
        assert_eq!(c.c3.conjunct_count(), 7);
        let c = build_constraints(&oilpump(0, "0.2")).unwrap();
        assert_eq!(c.c2, Formula::True);
        assert_eq!(c.c3.conjunct_count(), 1);
    }

    #[test]
    fn margins() {
        assert_eq!(deviation_margin(&oilpump(2, "0.2"), 4).unwrap(), rat(24, 125));
        assert_eq!(deviation_margin(&oilpump(3, "0.3"), 6).unwrap(), rat(129, 500));
        assert!(matches!(deviation_margin(&oilpump(3, "0.2"), 6), Err(Error::MarginViolated { .. })));
        let mut m = oilpump(0, "0.2");
        m.safety.eps = Rat::zero();
        assert_eq!(deviation_margin(&m, 0).unwrap(), Rat::zero());
    }

    #[test]
    fn malformed_profiles_rejected() {
        let mut m = oilpump(2, "0.2");
        m.consumption[3].t0 = rat(9, 1);
        assert!(matches!(m.validate(), Err(Error::Model(_))));
        let mut m = oilpump(2, "0.2");
        m.consumption.pop();
        assert!(matches!(m.validate(), Err(Error::Model(_))));
    }
}
