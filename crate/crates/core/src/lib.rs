//! Exact synthesis of optimal switching controllers by quantifier elimination.
//!
//! The pipeline: build linear constraints for a switched plant, eliminate
//! quantifiers to obtain admissible design parameters and feasible cells,
//! minimize a quadratic cost on each cell through KKT active sets, then
//! search a grid of outer parameters for the best worst case.

pub mod error;
pub mod expr;
pub mod formula;
pub mod algebraic;
pub mod kkt;
mod linalg;
pub mod model;
pub mod optimize;
pub mod parse;
pub mod qe;
pub mod rat;
pub mod sim;

pub use error::{Error, Result};
pub use expr::{point, var, AffineExpr, Point, QuadExpr, VarId};
pub use formula::{to_dnf, Atom, Formula, Polyhedron, Rel};
pub use parse::{parse_affine, parse_formula, parse_quad};
pub use rat::{q, rat, Rat};
