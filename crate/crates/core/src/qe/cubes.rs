//! Model-guided cube enumeration over formulas in negation normal form.
//!
//! A depth-first search finds a point satisfying a formula together with a
//! set of blocking clauses; the atoms of the formula that hold at that point
//! form an implicant (a satisfiable cube), which is projected and then
//! blocked. Repeating until no point remains yields a finite disjunction of
//! cubes covering exactly the projection.

use crate::expr::{Point, VarId};
use crate::formula::{Atom, Formula, Polyhedron};
use crate::qe::smt::{atom_holds, Solver};
use crate::qe::{fm, simplex};
use crate::rat::Rat;

/// Evaluates a quantifier-free formula, reading absent variables as zero.
fn holds_default(f: &Formula, model: &Point) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => atom_holds(a, model),
        Formula::Not(a) => !holds_default(a, model),
        Formula::And(ps) => ps.iter().all(|p| holds_default(p, model)),
        Formula::Or(ps) => ps.iter().any(|p| holds_default(p, model)),
        Formula::Implies(a, b) => !holds_default(a, model) || holds_default(b, model),
        Formula::Exists(..) | Formula::Forall(..) => panic!("quantifier inside cube search"),
    }
}

/// A point satisfying `assumptions` and every formula in `goals` (all NNF).
pub fn find_model(assumptions: &[Atom], goals: &[&Formula]) -> Option<Point> {
    let mut s = Solver::new();
    for a in assumptions {
        s.assert_atom(a);
    }
    for g in goals {
        s.assert_formula(g);
    }
    s.solve()
}

/// Atoms of `f` that witness its truth at `model`: one true disjunct per `Or`.
fn implicant(f: &Formula, model: &Point, out: &mut Vec<Atom>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Atom(a) => out.push(a.clone()),
        Formula::And(ps) => ps.iter().for_each(|p| implicant(p, model, out)),
        Formula::Or(ps) => {
            let pick = ps
                .iter()
                .filter(|p| holds_default(p, model))
                .min_by_key(|p| atom_count(p))
                .expect("model satisfies the disjunction");
            implicant(pick, model, out);
        }
        other => panic!("formula not in negation normal form: {other}"),
    }
}

fn atom_count(f: &Formula) -> usize {
    match f {
        Formula::Atom(_) => 1,
        Formula::And(ps) | Formula::Or(ps) => ps.iter().map(atom_count).sum(),
        _ => 0,
    }
}

/// Negation of a cube as an NNF clause.
pub fn negate_cube(atoms: &[Atom]) -> Formula {
    Formula::or(atoms.iter().map(Atom::negate).collect())
}

/// Whether the conjunction `cube` entails the NNF formula `f`.
pub fn cube_entails(cube: &[Atom], not_f: &Formula) -> bool {
    find_model(cube, &[not_f]).is_none()
}

/// Options for [`enumerate`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Options {
    /// Drop implicant atoms that are not needed for entailment before projecting.
    pub generalize: bool,
}

/// Projects the solution set of the NNF formula `f` away from `elim`,
/// returning cubes over the remaining variables whose union is the projection.
/// An empty list means the projection is empty; a single empty cube means it
/// is everything.
pub fn enumerate(f: &Formula, elim: &[VarId], opts: Options) -> Vec<Vec<Atom>> {
    let not_f = if opts.generalize { Some(Formula::not(f.clone()).nnf()) } else { None };
    let mut solver = Solver::new();
    solver.assert_formula(f);
    let mut out: Vec<Vec<Atom>> = Vec::new();
    loop {
        let Some(model) = solver.solve() else { break };
        let mut cube = Vec::new();
        implicant(f, &model, &mut cube);
        let mut cube = fm::remove_redundant_atoms(cube);
        if let Some(not_f) = &not_f {
            cube = generalize(cube, not_f);
        }
        let projected = fm::project(&cube, elim);
        debug_assert!(!(projected.len() == 1 && projected[0].is_contradiction()), "implicant must be satisfiable");
        if projected.is_empty() {
            return vec![Vec::new()];
        }
        log::trace!("cube {} projected to {}", out.len(), Polyhedron::new(projected.clone()));
        solver.assert_formula(&negate_cube(&projected));
        out.push(projected);
    }
    out
}

/// Greedily removes atoms from an implicant while it still entails the formula
/// whose negation is `not_f`.
fn generalize(mut cube: Vec<Atom>, not_f: &Formula) -> Vec<Atom> {
    let mut i = cube.len();
    while i > 0 {
        i -= 1;
        let removed = cube.remove(i);
        if !cube_entails(&cube, not_f) {
            cube.insert(i, removed);
        }
    }
    cube
}

/// Disjunctive normal form of an NNF formula: satisfiable, redundancy-free
/// cells, each grown greedily while it still implies the formula.
pub fn enumerate_cells(f: &Formula) -> Vec<Polyhedron> {
    enumerate(f, &[], Options { generalize: true }).into_iter().map(Polyhedron::new).collect()
}

/// Drops cubes contained in another cube of the list.
pub fn remove_subsumed(cubes: Vec<Vec<Atom>>) -> Vec<Vec<Atom>> {
    let contained = |small: &[Atom], big: &[Atom]| {
        big.iter().all(|b| {
            let neg = b.negate();
            find_model(small, &[&neg]).is_none()
        })
    };
    let mut keep = vec![true; cubes.len()];
    for i in 0..cubes.len() {
        for j in 0..cubes.len() {
            if i != j && keep[j] && keep[i] && contained(&cubes[i], &cubes[j]) {
                // identical cubes: keep the earlier one
                if j < i || !contained(&cubes[j], &cubes[i]) {
                    keep[i] = false;
                }
            }
        }
    }
    cubes.into_iter().zip(keep).filter_map(|(c, k)| k.then_some(c)).collect()
}

/// A rational point inside the cube, if it is non-empty.
pub fn witness(cube: &[Atom]) -> Option<Point> {
    simplex::find_point(cube)
}

/// Reads `model` at `v`, defaulting to zero.
pub fn value_of(model: &Point, v: &VarId) -> Rat {
    model.get(v).cloned().unwrap_or_else(Rat::zero)
}
