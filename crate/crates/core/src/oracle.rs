//! Ground-truth engine: explicit finite-state expansion of a pCFG followed by
//! Kleene value iteration and Monte-Carlo simulation.
//!
//! The expansion is exact for integer-valued dynamics with finite-support
//! distributions. Uniform distributions are discretized on a declared grid
//! and geometric distributions truncated at negligible tail mass; both are
//! flagged so downstream assertions can use sanity bands instead of equality.

use std::collections::HashMap;

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::Predicate;
use crate::pcfg::{LocId, LocKind, Pcfg, UpdateKind};
use crate::scalar::rat_to_f64;
use crate::{rint, Rat};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("state-space cap of {cap} exceeded ({found} states reached)")]
    StateCap { cap: usize, found: usize },
    #[error("no guard satisfied at location {loc} for valuation {vals:?}")]
    StuckDet { loc: String, vals: Vec<String> },
    #[error("nondeterministic domain at location {0} has an unbounded side and no variable bound to clamp to")]
    UnboundedDomain(String),
    #[error("evaluation failed during expansion: {0}")]
    Eval(String),
}

#[derive(Debug, Clone)]
pub enum Step {
    /// Nondeterministic choice among successor states.
    Choice(Vec<usize>),
    /// Probabilistic step; probabilities sum to 1 up to truncation error.
    Rand(Vec<(usize, f64)>),
}

#[derive(Debug, Clone)]
pub struct ExpandOptions {
    /// Inclusive per-variable bounds; leaving them loose only costs states.
    pub var_bounds: Vec<(Rat, Rat)>,
    /// Grid cells for discretizing a uniform distribution.
    pub uniform_grid: usize,
    /// Geometric truncation threshold: tail mass below this goes to the sink.
    pub geometric_tail: f64,
    /// Interior sample count per nondeterministic interval domain.
    pub ndet_grid: usize,
    pub state_cap: usize,
    /// When set, every stored value is rounded to the nearest multiple of
    /// this quantum. Needed for dynamics like repeated halving that would
    /// otherwise generate infinitely many in-bounds states.
    pub value_quantum: Option<Rat>,
}

impl ExpandOptions {
    pub fn integer_box(lo: i64, hi: i64, nvars: usize) -> Self {
        ExpandOptions {
            var_bounds: vec![(rint(lo), rint(hi)); nvars],
            uniform_grid: 8,
            geometric_tail: 1e-12,
            ndet_grid: 3,
            state_cap: 1_000_000,
            value_quantum: None,
        }
    }
}

#[derive(Debug)]
pub struct OracleModel {
    /// Explicit states; the last-allocated pseudo-state is the out-of-bounds
    /// sink (absorbing, never target).
    pub states: Vec<(LocId, Vec<Rat>)>,
    pub steps: Vec<Step>,
    pub target: Vec<bool>,
    pub init: usize,
    pub sink: usize,
    /// Expansion introduced discretization or truncation.
    pub discretized: bool,
    pub notes: Vec<String>,
}

fn out_of_bounds(vals: &[Rat], bounds: &[(Rat, Rat)]) -> bool {
    vals.iter()
        .zip(bounds)
        .any(|(v, (lo, hi))| v < lo || v > hi)
}

/// Extracts interval bounds on `var` from a single-variable predicate.
fn intervals_of_domain(
    pred: &Predicate<Rat>,
    var: u32,
) -> Vec<(Option<Rat>, Option<Rat>)> {
    let mut out = Vec::new();
    for d in &pred.disjuncts {
        let mut lo: Option<Rat> = None;
        let mut hi: Option<Rat> = None;
        for c in d {
            if let Some((coeffs, konst)) = c.lhs.linear_parts() {
                if coeffs.len() == 1 && coeffs.contains_key(&var) {
                    let a = &coeffs[&var];
                    let b = -konst.clone() / a.clone();
                    if a.is_positive() {
                        if lo.as_ref().map_or(true, |l| b > *l) {
                            lo = Some(b);
                        }
                    } else if hi.as_ref().map_or(true, |h| b < *h) {
                        hi = Some(b);
                    }
                }
            }
        }
        out.push((lo, hi));
    }
    out
}

pub fn expand(g: &Pcfg, opts: &ExpandOptions) -> Result<OracleModel, OracleError> {
    assert_eq!(opts.var_bounds.len(), g.vars.len(), "one bound per variable");
    let mut states: Vec<(LocId, Vec<Rat>)> = Vec::new();
    let mut index: HashMap<(LocId, Vec<Rat>), usize> = HashMap::new();
    let mut steps: Vec<Option<Step>> = Vec::new();
    let mut target: Vec<bool> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut discretized = false;

    // Sink first so it always exists.
    let sink = 0usize;
    states.push((usize::MAX, Vec::new()));
    steps.push(Some(Step::Rand(vec![(sink, 1.0)])));
    target.push(false);

    if opts.value_quantum.is_some() {
        discretized = true;
        notes.push("values rounded to a fixed quantum".into());
    }
    let quant = opts.value_quantum.clone();
    let intern = |l: LocId,
                  mut vals: Vec<Rat>,
                      states: &mut Vec<(LocId, Vec<Rat>)>,
                      index: &mut HashMap<(LocId, Vec<Rat>), usize>,
                      steps: &mut Vec<Option<Step>>,
                      target: &mut Vec<bool>,
                      work: &mut Vec<usize>|
     -> usize {
        if let Some(q) = &quant {
            for v in vals.iter_mut() {
                *v = (&*v / q).round() * q.clone();
            }
        }
        if out_of_bounds(&vals, &opts.var_bounds) {
            return sink;
        }
        let key = (l, vals);
        if let Some(&s) = index.get(&key) {
            return s;
        }
        let s = states.len();
        index.insert(key.clone(), s);
        states.push(key);
        steps.push(None);
        let is_tgt = match &g.target[l] {
            None => false,
            Some(conj) => conj
                .iter()
                .all(|c| c.holds_at(&states[s].1).unwrap_or(false)),
        };
        target.push(is_tgt);
        work.push(s);
        s
    };

    let mut work: Vec<usize> = Vec::new();
    let init = intern(
        g.init_loc,
        g.init_vals.clone(),
        &mut states,
        &mut index,
        &mut steps,
        &mut target,
        &mut work,
    );

    while let Some(s) = work.pop() {
        if states.len() > opts.state_cap {
            return Err(OracleError::StateCap {
                cap: opts.state_cap,
                found: states.len(),
            });
        }
        let (l, vals) = states[s].clone();
        if target[s] {
            // Absorbing for every value-iteration mode.
            steps[s] = Some(Step::Rand(vec![(s, 1.0)]));
            continue;
        }
        let step = match g.kinds[l] {
            LocKind::Nondet => {
                let succs: Vec<usize> = g.succs[l]
                    .iter()
                    .map(|&to| {
                        intern(to, vals.clone(), &mut states, &mut index, &mut steps, &mut target, &mut work)
                    })
                    .collect();
                Step::Choice(succs)
            }
            LocKind::Prob => Step::Rand(
                g.probs[&l]
                    .iter()
                    .map(|(to, p)| {
                        let t = intern(*to, vals.clone(), &mut states, &mut index, &mut steps, &mut target, &mut work);
                        (t, rat_to_f64(p))
                    })
                    .collect(),
            ),
            LocKind::Det => {
                let mut chosen = None;
                for &to in &g.succs[l] {
                    let guard = &g.guards[&(l, to)];
                    if guard.holds_at(&vals).unwrap_or(false) {
                        chosen = Some(to);
                        break;
                    }
                }
                let to = chosen.ok_or_else(|| OracleError::StuckDet {
                    loc: g.loc_names[l].clone(),
                    vals: vals.iter().map(crate::scalar::rat_to_str).collect(),
                })?;
                let t = intern(to, vals.clone(), &mut states, &mut index, &mut steps, &mut target, &mut work);
                Step::Rand(vec![(t, 1.0)])
            }
            LocKind::Assign => {
                let to = g.succs[l][0];
                let (v, up) = &g.updates[&l];
                let with = |val: Rat, vals: &[Rat]| -> Vec<Rat> {
                    let mut nv = vals.to_vec();
                    nv[*v as usize] = val;
                    nv
                };
                match up {
                    UpdateKind::Det(e) => {
                        let val = e
                            .eval_slice(&vals)
                            .map_err(|e| OracleError::Eval(e.to_string()))?;
                        let t = intern(to, with(val, &vals), &mut states, &mut index, &mut steps, &mut target, &mut work);
                        Step::Rand(vec![(t, 1.0)])
                    }
                    UpdateKind::Dist(d) => {
                        use crate::pcfg::DistDescriptor::*;
                        match d {
                            Finite(pairs) => Step::Rand(
                                pairs
                                    .iter()
                                    .map(|(val, p)| {
                                        let t = intern(to, with(val.clone(), &vals), &mut states, &mut index, &mut steps, &mut target, &mut work);
                                        (t, rat_to_f64(p))
                                    })
                                    .collect(),
                            ),
                            Uniform(a, b) => {
                                discretized = true;
                                let n = opts.uniform_grid.max(1);
                                let width = b.clone() - a.clone();
                                let p = 1.0 / n as f64;
                                let mut br = Vec::with_capacity(n);
                                for i in 0..n {
                                    // cell midpoint a + (2i+1)/(2n) * (b-a)
                                    let frac = Rat::new((2 * i as i64 + 1).into(), (2 * n as i64).into());
                                    let val = a.clone() + frac * width.clone();
                                    let t = intern(to, with(val, &vals), &mut states, &mut index, &mut steps, &mut target, &mut work);
                                    br.push((t, p));
                                }
                                Step::Rand(br)
                            }
                            Geometric(p) => {
                                let pf = rat_to_f64(p);
                                let mut br = Vec::new();
                                let mut tail = 1.0;
                                let mut k = 1i64;
                                while tail >= opts.geometric_tail && k < 100_000 {
                                    let pk = pf * (1.0 - pf).powi((k - 1) as i32);
                                    let t = intern(to, with(rint(k), &vals), &mut states, &mut index, &mut steps, &mut target, &mut work);
                                    br.push((t, pk));
                                    tail -= pk;
                                    k += 1;
                                }
                                if tail > 0.0 {
                                    discretized = true;
                                    br.push((sink, tail.max(0.0)));
                                }
                                Step::Rand(br)
                            }
                        }
                    }
                    UpdateKind::Ndet(dom) => {
                        discretized = true;
                        let fv = g.fresh_var();
                        let (blo, bhi) = &opts.var_bounds[*v as usize];
                        let mut choices = Vec::new();
                        for (lo, hi) in intervals_of_domain(dom, fv) {
                            let lo = lo.unwrap_or_else(|| blo.clone());
                            let hi = hi.unwrap_or_else(|| bhi.clone());
                            if lo > hi {
                                continue;
                            }
                            let mut vals_in = vec![lo.clone(), hi.clone()];
                            let n = opts.ndet_grid;
                            for i in 1..=n {
                                let frac = Rat::new((i as i64).into(), (n as i64 + 1).into());
                                vals_in.push(lo.clone() + frac * (hi.clone() - lo.clone()));
                            }
                            vals_in.sort();
                            vals_in.dedup();
                            for val in vals_in {
                                let t = intern(to, with(val, &vals), &mut states, &mut index, &mut steps, &mut target, &mut work);
                                choices.push(t);
                            }
                        }
                        if choices.is_empty() {
                            return Err(OracleError::UnboundedDomain(g.loc_names[l].clone()));
                        }
                        choices.sort_unstable();
                        choices.dedup();
                        Step::Choice(choices)
                    }
                }
            }
        };
        steps[s] = Some(step);
    }
    if discretized {
        notes.push("discretized".to_string());
    }
    Ok(OracleModel {
        steps: steps
            .into_iter()
            .map(|s| s.expect("every interned state was expanded"))
            .collect(),
        states,
        target,
        init,
        sink,
        discretized,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Upper,
    Lower,
}

#[derive(Debug, Clone)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// For the discounted iteration: residual converted through the
    /// contraction factor into a true-error bound.
    pub true_error_bound: Option<f64>,
}

fn combine(m: &OracleModel, v: &[f64], s: usize, dir: Direction) -> f64 {
    match &m.steps[s] {
        Step::Choice(succs) => {
            let it = succs.iter().map(|&t| v[t]);
            match dir {
                Direction::Upper => it.fold(f64::NEG_INFINITY, f64::max),
                Direction::Lower => it.fold(f64::INFINITY, f64::min),
            }
        }
        Step::Rand(br) => br.iter().map(|&(t, p)| p * v[t]).sum(),
    }
}

fn iterate(
    m: &OracleModel,
    dir: Direction,
    tol: f64,
    max_iter: usize,
    mut update: impl FnMut(&OracleModel, &[f64], usize, Direction) -> f64,
) -> ValueTable {
    let n = m.states.len();
    let mut v = vec![0.0f64; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let mut next = vec![0.0f64; n];
        residual = 0.0;
        for s in 0..n {
            next[s] = update(m, &v, s, dir);
            let d = if next[s].is_infinite() && v[s].is_infinite() {
                0.0
            } else {
                (next[s] - v[s]).abs()
            };
            residual = residual.max(d);
        }
        v = next;
        if residual < tol {
            break;
        }
    }
    ValueTable {
        values: v,
        iterations,
        residual,
        converged: residual < tol,
        true_error_bound: None,
    }
}

/// Kleene iteration for reachability probabilities from the zero table; the
/// chain is ascending, so the result approximates the true value from below.
pub fn value_iterate_reach(
    m: &OracleModel,
    dir: Direction,
    tol: f64,
    max_iter: usize,
) -> ValueTable {
    iterate(m, dir, tol, max_iter, |m, v, s, dir| {
        if m.target[s] {
            1.0
        } else {
            combine(m, v, s, dir)
        }
    })
}

/// Expected number of transitions to the target. A state whose reachability
/// in the adversarial direction is below one has infinite expected time (the
/// run escapes with positive probability); such states are masked infinite up
/// front, since the ascending iteration alone would approach infinity too
/// slowly to detect. `ceiling` is a backstop for finite-but-huge values.
pub fn value_iterate_esteps(
    m: &OracleModel,
    dir: Direction,
    tol: f64,
    max_iter: usize,
    ceiling: f64,
) -> ValueTable {
    // sup over schedulers of E[T] is infinite iff some scheduler reaches with
    // probability < 1, i.e. iff the *minimal* reach probability is < 1 (and
    // dually for the lower direction).
    let reach_dir = match dir {
        Direction::Upper => Direction::Lower,
        Direction::Lower => Direction::Upper,
    };
    let reach = value_iterate_reach(m, reach_dir, tol.min(1e-12), max_iter);
    let infinite: Vec<bool> = reach
        .values
        .iter()
        .enumerate()
        .map(|(s, &r)| !m.target[s] && r < 1.0 - 1e-6)
        .collect();
    iterate(m, dir, tol, max_iter, move |m, v, s, dir| {
        if m.target[s] {
            0.0
        } else if infinite[s] {
            f64::INFINITY
        } else {
            let x = 1.0 + combine(m, v, s, dir);
            if x > ceiling {
                f64::INFINITY
            } else {
                x
            }
        }
    })
}

/// Discounted reachability: target states are worth 1, every other state
/// applies the one-step operator scaled by `gamma`.
pub fn value_iterate_gamma(
    m: &OracleModel,
    gamma: f64,
    dir: Direction,
    tol: f64,
    max_iter: usize,
) -> ValueTable {
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
    let mut t = iterate(m, dir, tol, max_iter, move |m, v, s, dir| {
        if m.target[s] {
            1.0
        } else {
            gamma * combine(m, v, s, dir)
        }
    });
    t.true_error_bound = Some(t.residual * gamma / (1.0 - gamma));
    t
}

#[derive(Debug, Clone)]
pub enum Scheduler<'a> {
    UniformRandom,
    /// Greedy with respect to a converged value table (max for upper play,
    /// min when refuting).
    ValueGreedy(&'a [f64], Direction),
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: usize,
    pub seed: u64,
}

fn wilson(hits: usize, n: usize) -> (f64, f64, f64) {
    let z = 1.959963984540054f64; // 95%
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    (p, (center - half).max(0.0), (center + half).min(1.0))
}

/// Frequency of target hits within `horizon` transitions. Deterministic given
/// the seed: trial `i` uses a stream derived from `(seed, i)`.
pub fn monte_carlo(
    m: &OracleModel,
    sched: &Scheduler,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> McResult {
    assert!(trials >= 1);
    let mut hits = 0usize;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64));
        let mut s = m.init;
        for _ in 0..horizon {
            if m.target[s] {
                break;
            }
            // Absorbing non-target state: the run can never hit the target.
            if matches!(&m.steps[s], Step::Rand(br) if br.len() == 1 && br[0].0 == s) {
                break;
            }
            s = match &m.steps[s] {
                Step::Choice(succs) => match sched {
                    Scheduler::UniformRandom => succs[rng.gen_range(0..succs.len())],
                    Scheduler::ValueGreedy(v, dir) => *succs
                        .iter()
                        .max_by(|&&a, &&b| match dir {
                            Direction::Upper => v[a].total_cmp(&v[b]),
                            Direction::Lower => v[b].total_cmp(&v[a]),
                        })
                        .unwrap(),
                },
                Step::Rand(br) => {
                    let mut x: f64 = rng.gen();
                    let mut chosen = br.last().map(|&(t, _)| t).unwrap();
                    for &(t, p) in br {
                        if x < p {
                            chosen = t;
                            break;
                        }
                        x -= p;
                    }
                    chosen
                }
            };
        }
        if m.target[s] {
            hits += 1;
        }
    }
    let (estimate, ci_lo, ci_hi) = wilson(hits, trials);
    McResult {
        estimate,
        ci_lo,
        ci_hi,
        trials,
        seed,
    }
}

/// CSV dump of a value table: `state,value` with the state rendered as the
/// location name followed by the valuation.
pub fn value_table_csv(g: &Pcfg, m: &OracleModel, t: &ValueTable) -> String {
    let mut out = String::from("state,value\n");
    for (s, (l, vals)) in m.states.iter().enumerate() {
        let name = if *l == usize::MAX {
            "<sink>".to_string()
        } else {
            let vs: Vec<String> = vals.iter().map(crate::scalar::rat_to_str).collect();
            format!("{} {}", g.loc_names[*l], vs.join(" "))
        };
        out.push_str(&format!("\"{}\",{}\n", name, t.values[s]));
    }
    out
}
