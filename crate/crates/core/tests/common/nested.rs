//! Random compact instances of the three nested objectives and a nested
//! grid search to compare against.
//!
//! Domains are difference constraints `u_i − u_j ≤ c` with integer `c` inside
//! the box `[0, 2]`. Rounding a feasible point down to the half-integer grid
//! keeps it feasible, also within a slice at fixed outer variables, so the
//! nested grid optimum is within `Lip(g)·h` per level of the exact threshold.

use proptest::prelude::*;
use qesynth::optimize::{check_proposition1, Structure};
use qesynth::{var, AffineExpr, Atom, Formula, QuadExpr, Rat, Rel, VarId};

const SCALE: i64 = 2;
const BOX: i64 = 2;

#[derive(Clone, Debug)]
pub struct Instance {
    pub groups: Vec<usize>,
    /// `(i, j, c)`: `u_i − u_j ≤ c`.
    pub diffs: Vec<(usize, usize, i64)>,
    pub coef: Vec<i64>,
    pub constant: i64,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.groups.iter().sum()
    }

    pub fn names(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for (g, &k) in self.groups.iter().enumerate() {
            for i in 0..k {
                out.push(var(&format!("u{}_{}", g + 1, i)));
            }
        }
        out
    }

    pub fn domain(&self) -> Formula {
        let names = self.names();
        let u = |i: usize| AffineExpr::var(names[i].clone());
        let mut atoms = Vec::new();
        for v in &names {
            atoms.push(Formula::cmp(AffineExpr::var(v.clone()), Rel::Ge, AffineExpr::zero()));
            atoms.push(Formula::cmp(AffineExpr::var(v.clone()), Rel::Le, AffineExpr::constant(Rat::from_int(BOX))));
        }
        for &(i, j, c) in &self.diffs {
            atoms.push(Formula::Atom(Atom::new(&(&u(i) - &u(j)) - &AffineExpr::constant(Rat::from_int(c)), Rel::Le)));
        }
        Formula::and(atoms)
    }

    pub fn objective(&self) -> QuadExpr {
        let mut e = AffineExpr::constant(Rat::from_int(self.constant));
        for (v, &c) in self.names().iter().zip(&self.coef) {
            e = &e + &AffineExpr::var(v.clone()).scale(&Rat::from_int(c));
        }
        QuadExpr::from_affine(e)
    }

    pub fn structure(&self) -> Structure {
        let names = self.names();
        let mut cut = Vec::new();
        let mut at = 0;
        for &k in &self.groups {
            cut.push(names[at..at + k].to_vec());
            at += k;
        }
        match cut.len() {
            1 => Structure::Min { u1: cut.remove(0) },
            2 => Structure::MaxMin { u1: cut[0].clone(), u2: cut[1].clone() },
            _ => Structure::MinMaxMin { u1: cut[0].clone(), u2: cut[1].clone(), u3: cut[2].clone() },
        }
    }

    /// `Σ|coef|·h` per nesting level.
    pub fn resolution(&self) -> Rat {
        let lip: i64 = self.coef.iter().map(|c| c.abs()).sum();
        Rat::new(lip * self.groups.len() as i64, SCALE)
    }

    pub fn feasible(&self, p: &[i64]) -> bool {
        self.diffs.iter().all(|&(i, j, c)| p[i] - p[j] <= c * SCALE)
    }

    /// Scaled objective `SCALE·g`.
    pub fn value(&self, p: &[i64]) -> i64 {
        self.constant * SCALE + self.coef.iter().zip(p).map(|(c, x)| c * x).sum::<i64>()
    }

    /// Nested grid optimum, or `None` when no grid point is feasible.
    pub fn grid(&self) -> Option<Rat> {
        let mut p = vec![0; self.n()];
        let offsets: Vec<usize> = self.groups.iter().scan(0, |s, &k| { let o = *s; *s += k; Some(o) }).collect();
        self.level(self.groups.len() - 1, &offsets, &mut p).map(|v| Rat::new(v, SCALE))
    }

    /// Level 0 minimizes, level 1 maximizes, level 2 minimizes; `None` for an
    /// empty slice.
    fn level(&self, lvl: usize, offsets: &[usize], p: &mut Vec<i64>) -> Option<i64> {
        let (off, k) = (offsets[lvl], self.groups[lvl]);
        let mut best: Option<i64> = None;
        let count = (BOX * SCALE + 1).pow(k as u32);
        for code in 0..count {
            let mut c = code;
            for i in 0..k {
                p[off + i] = c % (BOX * SCALE + 1);
                c /= BOX * SCALE + 1;
            }
            let v = if lvl == 0 {
                self.feasible(p).then(|| self.value(p))
            } else {
                self.level(lvl - 1, offsets, p)
            };
            if let Some(v) = v {
                best = Some(match best {
                    None => v,
                    Some(b) if lvl == 1 => b.max(v),
                    Some(b) => b.min(v),
                });
            }
        }
        best
    }
}

pub fn instance(levels: usize) -> impl Strategy<Value = Instance> {
    prop::collection::vec(1usize..=3, levels).prop_flat_map(|groups| {
        let n: usize = groups.iter().sum();
        (
            prop::collection::vec((0..n, 0..n, -1i64..=2), 1..=6),
            prop::collection::vec(-3i64..=3, n),
            0i64..=3,
        )
            .prop_map(move |(diffs, coef, constant)| Instance {
                groups: groups.clone(),
                diffs: diffs.into_iter().filter(|(i, j, _)| i != j).collect(),
                coef,
                constant,
            })
    })
}

/// Compares `check_proposition1` with the grid optimum.
pub fn check(inst: &Instance) -> Result<(), TestCaseError> {
    let Some(grid) = inst.grid() else {
        // rounding keeps feasibility, so an empty grid means an empty domain
        prop_assert!(check_proposition1(&inst.domain(), &inst.objective(), &inst.structure()).is_err());
        return Ok(());
    };
    let (c, _) = check_proposition1(&inst.domain(), &inst.objective(), &inst.structure())
        .map_err(|e| TestCaseError::fail(format!("{e}")))?;
    let c = c.to_rational().expect("affine thresholds are rational").clone();
    prop_assert!((&c - &grid).abs() <= inst.resolution(), "threshold {} vs grid {} for {:?}", c, grid, inst);
    Ok(())
}
