//! Lowering from the structured program AST to a pCFG.
//!
//! Scheme: one deterministic location per `while`/`if` condition with
//! complementary guards; `if *` becomes a nondeterministic location; `if
//! prob(p)` a probabilistic location with branch weights p and 1-p; every
//! assignment becomes an assignment location; `refute(b)` becomes a
//! deterministic location whose b-branch enters a shared absorbing sink that
//! carries the target predicate `true`. The program end is an absorbing
//! deterministic location (the transition relation must be total).
//!
//! A maximal prefix of straight-line deterministic assignments is folded into
//! the initial valuation (exact constant propagation from the all-zeros
//! store), so a program of the shape `x := 2; y := 2; while ...` starts
//! directly at the loop head with the constants in the initial store.

use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use crate::expr::{LinConstraint, Predicate};
use crate::parse::{AnnStmt, Cond, Program, Stmt};
use crate::pcfg::{LocId, LocKind, Pcfg, UpdateKind};
use crate::{Rat, RatPoly};

#[derive(Debug, Error)]
pub enum LowerError {
    #[error("line {0}: probabilistic branch with weight outside (0,1) after folding")]
    DegenerateProb(usize),
}

struct Builder {
    kinds: Vec<LocKind>,
    succs: Vec<Vec<LocId>>,
    updates: BTreeMap<LocId, (u32, UpdateKind)>,
    probs: BTreeMap<LocId, Vec<(LocId, Rat)>>,
    guards: BTreeMap<(LocId, LocId), Predicate<Rat>>,
    invariant: Vec<Predicate<Rat>>,
    target: Vec<Option<Vec<LinConstraint<Rat>>>>,
    sink: Option<LocId>,
    fresh: u32,
}

impl Builder {
    fn alloc(&mut self, kind: LocKind) -> LocId {
        self.kinds.push(kind);
        self.succs.push(Vec::new());
        self.invariant.push(Predicate::top());
        self.target.push(None);
        self.kinds.len() - 1
    }

    fn edge(&mut self, from: LocId, to: LocId) {
        if !self.succs[from].contains(&to) {
            self.succs[from].push(to);
        }
    }

    fn guarded_edge(&mut self, from: LocId, to: LocId, pred: Predicate<Rat>) {
        if pred.disjuncts.is_empty() {
            return; // unsatisfiable guard: no edge
        }
        self.edge(from, to);
        match self.guards.remove(&(from, to)) {
            Some(existing) => {
                self.guards.insert((from, to), existing.or(&pred));
            }
            None => {
                self.guards.insert((from, to), pred);
            }
        }
    }

    fn sink(&mut self) -> LocId {
        if let Some(s) = self.sink {
            return s;
        }
        let s = self.alloc(LocKind::Det);
        self.guarded_edge(s, s, Predicate::top());
        self.target[s] = Some(Vec::new()); // target predicate `true`
        self.sink = Some(s);
        s
    }

    fn lower_block(&mut self, body: &[AnnStmt], cont: LocId) -> Result<LocId, LowerError> {
        let mut cont = cont;
        for s in body.iter().rev() {
            cont = self.lower_stmt(s, cont)?;
        }
        Ok(cont)
    }

    fn lower_stmt(&mut self, s: &AnnStmt, cont: LocId) -> Result<LocId, LowerError> {
        let entry = match &s.stmt {
            Stmt::Skip => return Ok(cont), // no location; annotation (if any) is moot
            Stmt::Assign(v, e) => {
                let l = self.alloc(LocKind::Assign);
                self.updates.insert(l, (*v, UpdateKind::Det(e.clone())));
                self.edge(l, cont);
                l
            }
            Stmt::Sample(v, d) => {
                let l = self.alloc(LocKind::Assign);
                self.updates.insert(l, (*v, UpdateKind::Dist(d.clone())));
                self.edge(l, cont);
                l
            }
            Stmt::NdetAssign(v, dom) => {
                let l = self.alloc(LocKind::Assign);
                let u = self.fresh;
                let pred = Predicate {
                    disjuncts: dom
                        .iter()
                        .map(|(lo, hi)| {
                            let mut conj = Vec::new();
                            if let Some(lo) = lo {
                                conj.push(LinConstraint::ge(
                                    RatPoly::var(u).sub(&RatPoly::constant(lo.clone())),
                                ));
                            }
                            if let Some(hi) = hi {
                                conj.push(LinConstraint::ge(
                                    RatPoly::constant(hi.clone()).sub(&RatPoly::var(u)),
                                ));
                            }
                            conj
                        })
                        .collect(),
                };
                self.updates.insert(l, (*v, UpdateKind::Ndet(pred)));
                self.edge(l, cont);
                l
            }
            Stmt::If(cond, then_b, else_b) => {
                let t = self.lower_block(then_b, cont)?;
                let e = self.lower_block(else_b, cont)?;
                match cond {
                    Cond::Star => {
                        let l = self.alloc(LocKind::Nondet);
                        self.edge(l, t);
                        self.edge(l, e);
                        l
                    }
                    Cond::Prob(p) => {
                        let l = self.alloc(LocKind::Prob);
                        let one = Rat::from_integer(1.into());
                        let mut branches: Vec<(LocId, Rat)> = Vec::new();
                        for (to, w) in [(t, p.clone()), (e, one - p.clone())] {
                            if w.is_zero() {
                                continue;
                            }
                            match branches.iter_mut().find(|(b, _)| *b == to) {
                                Some((_, acc)) => *acc = acc.clone() + w,
                                None => branches.push((to, w)),
                            }
                        }
                        for (to, _) in &branches {
                            self.edge(l, *to);
                        }
                        self.probs.insert(l, branches);
                        l
                    }
                    Cond::Pred(b) => {
                        let l = self.alloc(LocKind::Det);
                        if t == e {
                            self.guarded_edge(l, t, Predicate::top());
                        } else {
                            self.guarded_edge(l, t, b.clone());
                            self.guarded_edge(l, e, b.negate());
                        }
                        l
                    }
                }
            }
            Stmt::While(b, body) => {
                let l = self.alloc(LocKind::Det);
                let entry = self.lower_block(body, l)?;
                if entry == cont {
                    // Degenerate empty body: both branches continue.
                    self.guarded_edge(l, cont, Predicate::top());
                } else {
                    self.guarded_edge(l, entry, b.clone());
                    self.guarded_edge(l, cont, b.negate());
                }
                l
            }
            Stmt::Refute(b) => {
                let l = self.alloc(LocKind::Det);
                let sink = self.sink();
                self.guarded_edge(l, sink, b.clone());
                self.guarded_edge(l, cont, b.negate());
                l
            }
        };
        if let Some(inv) = &s.invariant {
            self.invariant[entry] = inv.clone();
        }
        Ok(entry)
    }
}

/// Lowers a parsed program to a validated-shape pCFG. Run
/// [`crate::pcfg::validate_pcfg`] afterwards for the full structural check.
pub fn lower_to_pcfg(p: &Program) -> Result<Pcfg, LowerError> {
    let nv = p.vars.len();
    let mut init_vals = vec![Rat::zero(); nv];
    // Fold the deterministic straight-line prefix into the initial store.
    let mut body = &p.body[..];
    while let Some(first) = body.first() {
        match &first.stmt {
            Stmt::Assign(v, e) => {
                let val = e
                    .eval_slice(&init_vals)
                    .expect("prefix expressions only mention program variables");
                init_vals[*v as usize] = val;
                body = &body[1..];
            }
            Stmt::Skip => body = &body[1..],
            _ => break,
        }
    }
    let mut b = Builder {
        kinds: Vec::new(),
        succs: Vec::new(),
        updates: BTreeMap::new(),
        probs: BTreeMap::new(),
        guards: BTreeMap::new(),
        invariant: Vec::new(),
        target: Vec::new(),
        sink: None,
        fresh: nv as u32,
    };
    let terminal = b.alloc(LocKind::Det);
    b.guarded_edge(terminal, terminal, Predicate::top());
    let entry = b.lower_block(body, terminal)?;
    // Drop locations unreachable from the entry (e.g. the terminal of a
    // `while true` loop); they would otherwise contribute vacuous constraints.
    let reachable = {
        let mut seen = vec![false; b.kinds.len()];
        let mut stack = vec![entry];
        seen[entry] = true;
        while let Some(l) = stack.pop() {
            for &s in &b.succs[l] {
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        seen
    };
    if reachable.iter().any(|r| !r) {
        let mut remap = vec![usize::MAX; b.kinds.len()];
        let mut next = 0;
        for (l, &r) in reachable.iter().enumerate() {
            if r {
                remap[l] = next;
                next += 1;
            }
        }
        let keep = |l: LocId| reachable[l];
        b.kinds = b
            .kinds
            .iter()
            .enumerate()
            .filter(|&(l, _)| keep(l))
            .map(|(_, k)| *k)
            .collect();
        b.succs = b
            .succs
            .iter()
            .enumerate()
            .filter(|&(l, _)| keep(l))
            .map(|(_, ss)| ss.iter().map(|&s| remap[s]).collect())
            .collect();
        b.invariant = b
            .invariant
            .iter()
            .enumerate()
            .filter(|&(l, _)| keep(l))
            .map(|(_, p)| p.clone())
            .collect();
        b.target = b
            .target
            .iter()
            .enumerate()
            .filter(|&(l, _)| keep(l))
            .map(|(_, t)| t.clone())
            .collect();
        b.updates = b
            .updates
            .iter()
            .filter(|(l, _)| keep(**l))
            .map(|(l, (v, u))| (remap[*l], (*v, u.clone())))
            .collect();
        b.probs = b
            .probs
            .iter()
            .filter(|(l, _)| keep(**l))
            .map(|(l, ps)| (remap[*l], ps.iter().map(|(s, p)| (remap[*s], p.clone())).collect()))
            .collect();
        b.guards = b
            .guards
            .iter()
            .filter(|((from, _), _)| keep(*from))
            .map(|((from, to), p)| ((remap[*from], remap[*to]), p.clone()))
            .collect();
        return Ok(finish(p, b, remap[entry], init_vals));
    }
    Ok(finish(p, b, entry, init_vals))
}

fn finish(p: &Program, b: Builder, entry: LocId, init_vals: Vec<Rat>) -> Pcfg {
    let n = b.kinds.len();
    let mut fresh_name = "u".to_string();
    while p.vars.contains(&fresh_name) {
        fresh_name.push('_');
    }
    Pcfg {
        vars: p.vars.clone(),
        fresh_name,
        loc_names: (0..n).map(|i| format!("l{}", i)).collect(),
        kinds: b.kinds,
        init_loc: entry,
        init_vals,
        succs: b.succs,
        updates: b.updates,
        probs: b.probs,
        guards: b.guards,
        invariant: b.invariant,
        target: b.target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse, Mode};
    use crate::pcfg::validate_pcfg;
    use crate::rint;

    const FIG_LOOP: &str = "
        x := 2;
        y := 2;
        t := 0;
        while t <= 100 do
            t := t + 1;
            z := Unif(-2, 1);
            if * then x := x + z else y := y + z fi
        od
    ";

    #[test]
    fn loop_program_lowers_to_seven_locations() {
        let p = parse(FIG_LOOP, Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        assert_eq!(g.n_locs(), 7);
        assert_eq!(g.init_vals, vec![rint(2), rint(2), rint(0), rint(0)]);
        let count = |k: LocKind| g.kinds.iter().filter(|&&x| x == k).count();
        assert_eq!(count(LocKind::Det), 2); // loop head + absorbing terminal
        assert_eq!(count(LocKind::Nondet), 1);
        assert_eq!(count(LocKind::Assign), 4); // t, z, x, y updates
        assert_eq!(count(LocKind::Prob), 0);
        assert!(validate_pcfg(&g).is_empty(), "{:?}", validate_pcfg(&g));
        // loop head guards t <= 100 / t > 100
        assert_eq!(g.kinds[g.init_loc], LocKind::Det);
        assert_eq!(g.succs[g.init_loc].len(), 2);
    }

    #[test]
    fn skip_only_program_is_single_absorbing_location() {
        let p = parse("skip", Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        assert_eq!(g.n_locs(), 1);
        assert_eq!(g.succs[0], vec![0]);
        assert!(validate_pcfg(&g).is_empty());
    }

    #[test]
    fn refute_collects_target_at_shared_sink() {
        let src = "
            {0 <= x}
            while true do
                x := x - 1;
                refute (x <= 0)
            od
        ";
        let p = parse(src, Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        let sinks: Vec<_> = (0..g.n_locs()).filter(|&l| g.target[l].is_some()).collect();
        assert_eq!(sinks.len(), 1);
        let sink = sinks[0];
        assert_eq!(g.target[sink], Some(Vec::new())); // predicate `true`
        assert_eq!(g.succs[sink], vec![sink]);
        // the refute location guards x <= 0 into the sink
        let refute_loc = (0..g.n_locs())
            .find(|&l| g.succs[l].contains(&sink) && l != sink)
            .unwrap();
        assert_eq!(g.kinds[refute_loc], LocKind::Det);
        assert!(validate_pcfg(&g).is_empty(), "{:?}", validate_pcfg(&g));
    }

    #[test]
    fn prob_branches_to_identical_continuations_merge() {
        let src = "if prob(0.3) then skip else skip fi";
        let p = parse(src, Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        let probs = g.probs.values().next().unwrap();
        assert_eq!(probs.len(), 1);
        assert_eq!(probs[0].1, rint(1));
        assert!(validate_pcfg(&g).is_empty());
    }

    #[test]
    fn ndet_domain_becomes_fresh_variable_predicate() {
        let src = "x := ndet Real[17, 22] or Real[30, 31]; while x >= 0 do x := x - 1 od";
        let p = parse(src, Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        let (_, up) = g.updates.values().find(|(_, u)| matches!(u, UpdateKind::Ndet(_))).unwrap().clone();
        match up {
            UpdateKind::Ndet(pred) => {
                assert_eq!(pred.disjuncts.len(), 2);
                assert!(pred
                    .holds_at(&[rint(0), rint(20)])
                    .unwrap());
                assert!(!pred.holds_at(&[rint(0), rint(25)]).unwrap());
            }
            _ => unreachable!(),
        }
        assert!(validate_pcfg(&g).is_empty(), "{:?}", validate_pcfg(&g));
    }
}
