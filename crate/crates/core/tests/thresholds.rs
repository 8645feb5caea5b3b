//! Nested objective thresholds against a grid oracle, plus hand-built
//! attained and unattained cases.

mod common;

use common::nested::{check, instance};
use proptest::prelude::*;
use qesynth::algebraic::Algebraic;
use qesynth::optimize::{check_proposition1, Bound, Structure};
use qesynth::{parse_formula, parse_quad, var, Rat};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn min_matches_grid(inst in instance(1)) {
        check(&inst)?;
    }

    #[test]
    fn maxmin_matches_grid(inst in instance(2)) {
        check(&inst)?;
    }

    #[test]
    fn minmaxmin_matches_grid(inst in instance(3)) {
        check(&inst)?;
    }
}

#[test]
fn simple_thresholds() {
    let u = vec![var("u")];
    let (c, b) = check_proposition1(&parse_formula("0 <= u & u <= 1").unwrap(), &parse_quad("u").unwrap(), &Structure::Min { u1: u }).unwrap();
    assert_eq!((c, b), (Algebraic::from(Rat::zero()), Bound::AtLeast));
    let s = Structure::MaxMin { u1: vec![var("a")], u2: vec![var("b")] };
    let square = parse_formula("0 <= a & a <= 1 & 0 <= b & b <= 1").unwrap();
    let (c, b) = check_proposition1(&square, &parse_quad("(a - b)^2").unwrap(), &s).unwrap();
    assert_eq!((c, b), (Algebraic::from(Rat::zero()), Bound::AtLeast));
}

#[test]
fn open_and_closed_infimum() {
    let s = Structure::MinMaxMin { u1: vec![var("u1")], u2: vec![var("u2")], u3: vec![var("u3")] };
    let g = parse_quad("u1").unwrap();
    let open = parse_formula("u1 = u2 & ((u3 >= 0 & u3 <= 1 & u2 >= 0 & u2 <= 1 - u3) | (u3 = 1 & u2 >= 1 & u2 <= 2))").unwrap();
    assert_eq!(check_proposition1(&open, &g, &s).unwrap(), (Algebraic::from(Rat::zero()), Bound::Above));
    let closed = parse_formula("u1 = u2 & u3 >= 0 & u3 <= 1 & u2 >= 0 & u2 <= 1 - u3").unwrap();
    assert_eq!(check_proposition1(&closed, &g, &s).unwrap(), (Algebraic::from(Rat::zero()), Bound::AtLeast));
}

#[test]
fn open_domains_are_rejected() {
    let s = Structure::Min { u1: vec![var("u")] };
    assert!(check_proposition1(&parse_formula("0 < u & u <= 1").unwrap(), &parse_quad("u").unwrap(), &s).is_err());
    assert!(check_proposition1(&parse_formula("0 <= u").unwrap(), &parse_quad("u").unwrap(), &s).is_err());
}
