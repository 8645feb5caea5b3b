mod common;

use std::fs;

use common::fixture;

use qesynth::model::{build_constraints, deviation_margin, Model};
use qesynth::optimize::Pipeline;
use qesynth::{parse_formula, q, Error};

#[test]
fn models_load_and_validate() {
    for (name, acts) in [("oilpump2.json", 2), ("oilpump3.json", 3), ("empty_window.json", 2)] {
        let m = Model::load(&fixture(name)).unwrap();
        m.validate().unwrap();
        assert_eq!(m.pump.activations, acts, "{name}");
        assert_eq!(m.switch_points(), 2 * acts);
    }
}

#[test]
fn declared_margins_cover_the_deviation() {
    let m2 = Model::load(&fixture("oilpump2.json")).unwrap();
    let m3 = Model::load(&fixture("oilpump3.json")).unwrap();
    assert_eq!(deviation_margin(&m2, 4).unwrap(), q("24/125"));
    assert_eq!(deviation_margin(&m3, 6).unwrap(), q("129/500"));
    // the two-activation margin is too tight for six switch points
    assert!(matches!(deviation_margin(&m2, 6), Err(Error::MarginViolated { .. })));
}

#[test]
fn admissibility_fixture_is_the_model_constraint() {
    let m = Model::load(&fixture("oilpump2.json")).unwrap();
    let text = fs::read_to_string(fixture("oilpump2_c8.txt")).unwrap();
    let c = build_constraints(&m).unwrap();
    assert_eq!(text.trim(), c.c8.to_string());
    assert_eq!(parse_formula(&text).unwrap(), c.c8);
}

#[test]
fn empty_window_has_no_admissible_pair() {
    let m = Model::load(&fixture("empty_window.json")).unwrap();
    assert!(matches!(Pipeline::build(&m), Err(Error::NoAdmissiblePair)));
}

#[test]
fn malformed_models_are_rejected() {
    assert!(Model::from_json("{").is_err());
    let mut m = Model::load(&fixture("oilpump2.json")).unwrap();
    m.consumption[1].rate_lo = q("2");
    assert!(m.validate().is_err());
}
