//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use qesynth::algebraic::Algebraic;
use qesynth::model::Model;
use qesynth::optimize::PartitionCell;
use qesynth::{parse_affine, parse_quad, q, var};

pub mod nested;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load(name: &str) -> Model {
    Model::load(&fixture(name)).unwrap()
}

/// Cycle average of the two-activation optimum on [5.1, 7.5].
pub const COST: &str = "(1300*v0^2 + 20420*v0 + 634817)/114400";

/// Switch times of the two-activation optimum on [5.1, 7.5].
pub const CONTROLLER: [(&str, &str); 4] =
    [("t1", "10/13*v0 - 25/13"), ("t2", "10/13*v0 + 1/13"), ("t3", "5/11*v0 + 153/22"), ("t4", "157/11")];

pub fn piece(lo: &str, hi: &str, cost: &str, ctl: &[(&str, &str)]) -> PartitionCell {
    PartitionCell {
        lo: Algebraic::from(q(lo)),
        hi: Algebraic::from(q(hi)),
        lo_open: false,
        hi_open: false,
        cost: parse_quad(cost).unwrap(),
        controller: ctl.iter().map(|(t, e)| (var(t), parse_affine(e).unwrap())).collect(),
    }
}

pub fn controller() -> Vec<PartitionCell> {
    vec![piece("5.1", "7.5", COST, &CONTROLLER)]
}
