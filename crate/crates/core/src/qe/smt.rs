//! Satisfiability of quantifier-free linear formulas: clause learning over a
//! polarity-aware encoding of NNF formulas, with the exact simplex as theory.
//!
//! Formulas are in negation normal form, so every subformula occurs
//! positively and a gate only needs the clauses `g → children`. An atom left
//! false by the Boolean search imposes nothing, and the theory only ever sees
//! the atoms assigned true.

use std::collections::HashMap;

use crate::expr::Point;
use crate::formula::{Atom, Formula};
use crate::qe::simplex;

type Var = u32;

/// `2·var + negated`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
struct Lit(u32);

impl Lit {
    fn pos(v: Var) -> Lit {
        Lit(v << 1)
    }
    fn neg(self) -> Lit {
        Lit(self.0 ^ 1)
    }
    fn var(self) -> Var {
        self.0 >> 1
    }
    fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }
}

#[derive(Clone, Debug)]
enum Node {
    Const(bool),
    Atom(usize),
    And(Vec<Lit>),
    Or(Vec<Lit>),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Value {
    True,
    False,
    Unset,
}

/// Incremental solver; clauses and learned lemmas persist across calls to [`Solver::solve`].
pub struct Solver {
    nodes: Vec<Node>,
    atoms: Vec<Atom>,
    atom_var: HashMap<Atom, Var>,
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    value: Vec<Value>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    head: usize,
    unsat: bool,
    point: Point,
    /// Unit facts waiting to be asserted at level 0.
    pending_units: Vec<Lit>,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new()
    }
}

impl Solver {
    pub fn new() -> Solver {
        let mut s = Solver {
            nodes: Vec::new(),
            atoms: Vec::new(),
            atom_var: HashMap::new(),
            clauses: Vec::new(),
            watches: Vec::new(),
            value: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            head: 0,
            unsat: false,
            point: Point::new(),
            pending_units: Vec::new(),
        };
        // variable 0 is the constant true
        let t = s.new_var(Node::Const(true));
        s.pending_units.push(Lit::pos(t));
        s
    }

    fn new_var(&mut self, node: Node) -> Var {
        let v = self.nodes.len() as Var;
        self.nodes.push(node);
        self.value.push(Value::Unset);
        self.level.push(0);
        self.reason.push(None);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        v
    }

    fn true_lit() -> Lit {
        Lit::pos(0)
    }

    fn encode(&mut self, f: &Formula) -> Lit {
        match f {
            Formula::True => Self::true_lit(),
            Formula::False => Self::true_lit().neg(),
            Formula::Atom(a) => match a.truth() {
                Some(true) => Self::true_lit(),
                Some(false) => Self::true_lit().neg(),
                None => {
                    if let Some(&v) = self.atom_var.get(a) {
                        return Lit::pos(v);
                    }
                    let idx = self.atoms.len();
                    self.atoms.push(a.clone());
                    let v = self.new_var(Node::Atom(idx));
                    self.atom_var.insert(a.clone(), v);
                    Lit::pos(v)
                }
            },
            Formula::And(ps) => {
                let kids: Vec<Lit> = ps.iter().map(|p| self.encode(p)).collect();
                let g = Lit::pos(self.new_var(Node::And(kids.clone())));
                for k in kids {
                    self.add_clause(vec![g.neg(), k]);
                }
                g
            }
            Formula::Or(ps) => {
                let kids: Vec<Lit> = ps.iter().map(|p| self.encode(p)).collect();
                let g = Lit::pos(self.new_var(Node::Or(kids.clone())));
                let mut clause = vec![g.neg()];
                clause.extend(kids);
                self.add_clause(clause);
                g
            }
            other => panic!("formula not in negation normal form: {other}"),
        }
    }

    /// Requires `f` (in negation normal form) to hold in every later model.
    pub fn assert_formula(&mut self, f: &Formula) {
        let l = self.encode(f);
        self.add_clause(vec![l]);
    }

    pub fn assert_atom(&mut self, a: &Atom) {
        self.assert_formula(&Formula::Atom(a.clone()));
    }

    fn add_clause(&mut self, mut lits: Vec<Lit>) {
        self.backtrack(0);
        lits.sort_by_key(|l| l.0);
        lits.dedup();
        if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
            return;
        }
        match lits.len() {
            0 => self.unsat = true,
            1 => self.pending_units.push(lits[0]),
            _ => {
                self.attach(lits);
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>) -> usize {
        let i = self.clauses.len();
        self.watches[lits[0].neg().0 as usize].push(i);
        self.watches[lits[1].neg().0 as usize].push(i);
        self.clauses.push(lits);
        i
    }

    fn lit_value(&self, l: Lit) -> Value {
        match (self.value[l.var() as usize], l.is_neg()) {
            (Value::Unset, _) => Value::Unset,
            (Value::True, false) | (Value::False, true) => Value::True,
            _ => Value::False,
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn assign(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var() as usize;
        self.value[v] = if l.is_neg() { Value::False } else { Value::True };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn backtrack(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let keep = self.trail_lim[lvl];
        for l in self.trail.drain(keep..) {
            let v = l.var() as usize;
            self.value[v] = Value::Unset;
            self.reason[v] = None;
        }
        self.trail_lim.truncate(lvl);
        self.head = self.head.min(keep);
    }

    /// Unit propagation; returns a falsified clause on conflict.
    fn propagate(&mut self) -> Option<usize> {
        while self.head < self.trail.len() {
            let l = self.trail[self.head];
            self.head += 1;
            // clauses watching ¬l, i.e. registered under the index of l
            let mut ws = std::mem::take(&mut self.watches[l.0 as usize]);
            let mut i = 0;
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                let false_lit = l.neg();
                {
                    let c = &mut self.clauses[ci];
                    if c[0] == false_lit {
                        c.swap(0, 1);
                    }
                }
                let first = self.clauses[ci][0];
                if self.lit_value(first) == Value::True {
                    i += 1;
                    continue;
                }
                let len = self.clauses[ci].len();
                let mut moved = false;
                for k in 2..len {
                    let cand = self.clauses[ci][k];
                    if self.lit_value(cand) != Value::False {
                        self.clauses[ci].swap(1, k);
                        self.watches[cand.neg().0 as usize].push(ci);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                match self.lit_value(first) {
                    Value::False => {
                        conflict = Some(ci);
                        break;
                    }
                    Value::Unset => self.assign(first, Some(ci)),
                    Value::True => {}
                }
                i += 1;
            }
            let rest = std::mem::take(&mut self.watches[l.0 as usize]);
            ws.extend(rest);
            self.watches[l.0 as usize] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    /// First-UIP analysis; returns the learned clause (asserting literal first) and the backjump level.
    fn analyze(&self, conflict: &[Lit]) -> (Vec<Lit>, usize) {
        let cur = self.decision_level();
        let mut seen = vec![false; self.nodes.len()];
        let mut learned = vec![Lit(0)];
        let mut open = 0usize;
        let mut clause: Vec<Lit> = conflict.to_vec();
        let mut idx = self.trail.len();
        let mut skip: Option<Lit> = None;
        loop {
            for &q in &clause {
                if Some(q) == skip {
                    continue;
                }
                let v = q.var() as usize;
                if seen[v] || self.level[v] == 0 {
                    continue;
                }
                seen[v] = true;
                if self.level[v] == cur {
                    open += 1;
                } else {
                    learned.push(q);
                }
            }
            let p = loop {
                idx -= 1;
                let p = self.trail[idx];
                if seen[p.var() as usize] {
                    break p;
                }
            };
            open -= 1;
            if open == 0 {
                learned[0] = p.neg();
                break;
            }
            let r = self.reason[p.var() as usize].expect("implied literal has a reason");
            clause = self.clauses[r].clone();
            skip = Some(p);
        }
        let back = learned[1..].iter().map(|l| self.level[l.var() as usize]).max().unwrap_or(0);
        // second watch on a literal of the backjump level
        if learned.len() > 1 {
            let k = 1 + learned[1..].iter().position(|l| self.level[l.var() as usize] == back).unwrap();
            let mut learned = learned;
            learned.swap(1, k);
            return (learned, back);
        }
        (learned, back)
    }

    /// Resolves a conflict; false when it is a contradiction at level 0.
    fn handle_conflict(&mut self, conflict: Vec<Lit>) -> bool {
        let top = conflict.iter().map(|l| self.level[l.var() as usize]).max().unwrap_or(0);
        if top == 0 {
            return false;
        }
        self.backtrack(top);
        let (learned, back) = self.analyze(&conflict);
        self.backtrack(back);
        let first = learned[0];
        let reason = if learned.len() == 1 { None } else { Some(self.attach(learned)) };
        self.assign(first, reason);
        true
    }

    fn node_holds(&self, v: Var) -> bool {
        match &self.nodes[v as usize] {
            Node::Const(b) => *b,
            Node::Atom(i) => atom_holds(&self.atoms[*i], &self.point),
            Node::And(ks) => ks.iter().all(|&k| self.lit_holds(k)),
            Node::Or(ks) => ks.iter().any(|&k| self.lit_holds(k)),
        }
    }

    fn lit_holds(&self, l: Lit) -> bool {
        self.node_holds(l.var()) != l.is_neg()
    }

    /// Theory check of the atoms assigned true; the conflict is a clause of negated atoms.
    fn theory_check(&mut self) -> Option<Vec<Lit>> {
        let mut active: Vec<(Var, usize)> = Vec::new();
        let mut all_hold = true;
        for &l in &self.trail {
            if l.is_neg() {
                continue;
            }
            if let Node::Atom(i) = self.nodes[l.var() as usize] {
                all_hold &= atom_holds(&self.atoms[i], &self.point);
                active.push((l.var(), i));
            }
        }
        if all_hold {
            return None;
        }
        let atoms: Vec<Atom> = active.iter().map(|&(_, i)| self.atoms[i].clone()).collect();
        match simplex::solve(&atoms) {
            Ok(p) => {
                self.point = p;
                None
            }
            Err(core) => Some(core.into_iter().map(|k| Lit::pos(active[k].0).neg()).collect()),
        }
    }

    /// A clause not satisfied when unassigned variables are read as false, and
    /// an unassigned positive literal in it to decide.
    fn pick_decision(&self) -> Option<Lit> {
        for c in &self.clauses {
            let mut candidates = Vec::new();
            let mut satisfied = false;
            for &l in c {
                match self.lit_value(l) {
                    Value::True => {
                        satisfied = true;
                        break;
                    }
                    Value::Unset if l.is_neg() => {
                        satisfied = true;
                        break;
                    }
                    Value::Unset => candidates.push(l),
                    Value::False => {}
                }
            }
            if satisfied || candidates.is_empty() {
                continue;
            }
            // prefer a literal already true at the current point
            return Some(candidates.iter().copied().find(|&l| self.lit_holds(l)).unwrap_or(candidates[0]));
        }
        None
    }

    /// A point satisfying every asserted formula, or `None` if there is none.
    pub fn solve(&mut self) -> Option<Point> {
        if self.unsat {
            return None;
        }
        self.backtrack(0);
        // clauses added since the last call may be falsified at level 0
        self.head = 0;
        for l in std::mem::take(&mut self.pending_units) {
            match self.lit_value(l) {
                Value::True => {}
                Value::False => {
                    self.unsat = true;
                    return None;
                }
                Value::Unset => self.assign(l, None),
            }
        }
        loop {
            if let Some(ci) = self.propagate() {
                let c = self.clauses[ci].clone();
                if !self.handle_conflict(c) {
                    self.unsat = true;
                    return None;
                }
                continue;
            }
            if let Some(c) = self.theory_check() {
                if !self.handle_conflict(c) {
                    self.unsat = true;
                    return None;
                }
                continue;
            }
            match self.pick_decision() {
                Some(l) => {
                    self.trail_lim.push(self.trail.len());
                    self.assign(l, None);
                }
                None => {
                    let mut point = self.point.clone();
                    // variables the theory never constrained read as zero
                    for a in &self.atoms {
                        for v in a.vars() {
                            point.entry(v.clone()).or_insert_with(crate::rat::Rat::zero);
                        }
                    }
                    self.backtrack(0);
                    return Some(point);
                }
            }
        }
    }
}

pub(crate) fn atom_holds(a: &Atom, model: &Point) -> bool {
    let mut acc = a.lhs.constant_term().clone();
    for (v, c) in a.lhs.coeffs() {
        if let Some(x) = model.get(v) {
            acc += c * x;
        }
    }
    a.rel.holds_for(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;

    fn sat(src: &str) -> Option<Point> {
        let f = parse_formula(src).unwrap().nnf();
        let mut s = Solver::new();
        s.assert_formula(&f);
        let p = s.solve();
        if let Some(p) = &p {
            let mut full = p.clone();
            for v in f.free_vars() {
                full.entry(v).or_insert_with(crate::rat::Rat::zero);
            }
            assert!(f.holds(&full).unwrap(), "{src}: {p:?}");
        }
        p
    }

    #[test]
    fn boolean_structure() {
        assert!(sat("(x <= 0 | x >= 10) & (y >= x + 5 | y <= x - 5) & y <= 3 & y >= -20").is_some());
        assert!(sat("(x <= 0 | x >= 10) & x >= 1 & x <= 9").is_none());
        assert!(sat("x < 0 & (x > 1 | y = 2)").is_some());
        assert!(sat("false").is_none());
        assert!(sat("true").is_some());
    }

    #[test]
    fn learning_across_pigeonhole_like_choices() {
        // every choice of one disjunct per clause is infeasible
        let mut parts = Vec::new();
        for i in 0..8 {
            parts.push(format!("(x{i} <= 0 | x{i} >= 2)"));
        }
        parts.push("x0 + x1 + x2 + x3 + x4 + x5 + x6 + x7 = 9".into());
        for i in 0..8 {
            parts.push(format!("x{i} >= 1 & x{i} <= 3"));
        }
        // all x_i in [2, 3], sum 9 < 16: infeasible
        assert!(sat(&parts.join(" & ")).is_none());
    }

    #[test]
    fn incremental_blocking() {
        let f = parse_formula("x >= 0 & x <= 3").unwrap().nnf();
        let mut s = Solver::new();
        s.assert_formula(&f);
        let mut seen = 0;
        while let Some(p) = s.solve() {
            seen += 1;
            assert!(seen < 10);
            let x = p[&crate::expr::var("x")].clone();
            // block a unit interval around the point
            let block = parse_formula(&format!("x < {} | x > {}", x.clone() - crate::rat::Rat::one(), x + crate::rat::Rat::one())).unwrap();
            s.assert_formula(&block.nnf());
        }
        assert!(seen >= 2);
    }
}
