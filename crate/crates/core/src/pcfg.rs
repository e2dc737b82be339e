//! The probabilistic control flow graph model: locations partitioned into
//! nondeterministic / probabilistic / deterministic / assignment kinds, a
//! total transition relation, guards, update functions, and the invariant and
//! target predicate maps. Includes structural validation and a JSON format
//! for specifying machines directly.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::expr::{ConjPredicate, Predicate, Var};
use crate::farkas::{sat_point, SatResult};
use crate::parse::{parse_expr_str, parse_pred_str, ParseError};
use crate::scalar::rat_to_str;
use crate::{Rat, RatPoly};

pub type LocId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocKind {
    Nondet,
    Prob,
    Det,
    Assign,
}

/// A sampling distribution with closed-form raw moments.
#[derive(Debug, Clone, PartialEq)]
pub enum DistDescriptor {
    /// Continuous uniform on [a, b], a < b.
    Uniform(Rat, Rat),
    /// Finite support: list of (value, probability), probabilities sum to 1.
    Finite(Vec<(Rat, Rat)>),
    /// Geometric on {1, 2, ...} with success probability p: P(i) = p(1-p)^(i-1).
    Geometric(Rat),
}

impl DistDescriptor {
    /// Exact n-th raw moment E[X^n].
    pub fn moment(&self, n: u32) -> Rat {
        match self {
            DistDescriptor::Uniform(a, b) => {
                // (b^(n+1) - a^(n+1)) / ((n+1)(b-a))
                let k = n + 1;
                let bk = pow_rat(b, k);
                let ak = pow_rat(a, k);
                (bk - ak) / ((b.clone() - a.clone()) * Rat::from_integer(k.into()))
            }
            DistDescriptor::Finite(items) => items
                .iter()
                .map(|(v, p)| pow_rat(v, n) * p.clone())
                .fold(Rat::zero(), |a, b| a + b),
            DistDescriptor::Geometric(p) => {
                let q = Rat::one() - p.clone();
                if q.is_zero() {
                    return Rat::one(); // point mass at 1
                }
                // Sum_{i>=1} i^n q^i = N_n(q) / (1-q)^(n+1) by the recurrence
                // N_0 = q, N_{k+1} = q (N_k'(q) (1-q) + (k+1) N_k).
                // Then E[X^n] = (p/q) * N_n(q) / p^(n+1) = N_n(q) / (q p^n).
                let mut num: Vec<Rat> = vec![Rat::zero(), Rat::one()]; // N_0 = q
                for k in 0..n {
                    let deriv = poly_derive(&num);
                    let one_minus_q = vec![Rat::one(), -Rat::one()];
                    let mut next = poly_mul(&deriv, &one_minus_q);
                    let scaled = poly_scale(&num, &Rat::from_integer((k + 1).into()));
                    next = poly_add(&next, &scaled);
                    num = poly_shift(&next); // multiply by q
                }
                let nq = poly_eval(&num, &q);
                nq / (q * pow_rat(p, n))
            }
        }
    }

    pub fn expectation(&self) -> Rat {
        self.moment(1)
    }

    /// Bounds of the support: `(min, max)`, `None` for unbounded above.
    pub fn support_bounds(&self) -> (Rat, Option<Rat>) {
        match self {
            DistDescriptor::Uniform(a, b) => (a.clone(), Some(b.clone())),
            DistDescriptor::Finite(items) => {
                let mut vals: Vec<&Rat> = items.iter().map(|(v, _)| v).collect();
                vals.sort();
                ((*vals.first().unwrap()).clone(), Some((*vals.last().unwrap()).clone()))
            }
            DistDescriptor::Geometric(_) => (Rat::one(), None),
        }
    }

    pub fn render(&self) -> String {
        match self {
            DistDescriptor::Uniform(a, b) => {
                format!("Unif({}, {})", rat_to_str(a), rat_to_str(b))
            }
            DistDescriptor::Finite(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|(v, p)| format!("{}: {}", rat_to_str(v), rat_to_str(p)))
                    .collect();
                format!("Discrete{{{}}}", parts.join(", "))
            }
            DistDescriptor::Geometric(p) => format!("Geometric({})", rat_to_str(p)),
        }
    }
}

fn pow_rat(r: &Rat, n: u32) -> Rat {
    let mut out = Rat::one();
    for _ in 0..n {
        out = out * r.clone();
    }
    out
}

fn poly_derive(p: &[Rat]) -> Vec<Rat> {
    if p.len() <= 1 {
        return vec![Rat::zero()];
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c.clone() * Rat::from_integer(i.into()))
        .collect()
}

fn poly_mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

fn poly_add(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] = out[i].clone() + x.clone();
    }
    for (i, x) in b.iter().enumerate() {
        out[i] = out[i].clone() + x.clone();
    }
    out
}

fn poly_scale(a: &[Rat], k: &Rat) -> Vec<Rat> {
    a.iter().map(|c| c.clone() * k.clone()).collect()
}

fn poly_shift(a: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero()];
    out.extend_from_slice(a);
    out
}

fn poly_eval(a: &[Rat], x: &Rat) -> Rat {
    let mut out = Rat::zero();
    for c in a.iter().rev() {
        out = out * x.clone() + c.clone();
    }
    out
}

/// Update function of an assignment location.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateKind {
    Det(RatPoly),
    Dist(DistDescriptor),
    /// Domain predicate over the pCFG's fresh variable (id = vars.len()).
    Ndet(Predicate<Rat>),
}

#[derive(Debug, Error)]
pub enum PcfgError {
    #[error("expression parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pCFG structure error: {0}")]
    Structure(String),
}

/// A probabilistic control flow graph over rational-valued variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcfg {
    pub vars: Vec<String>,
    /// Display name of the fresh variable used for nondeterministic updates.
    pub fresh_name: String,
    pub loc_names: Vec<String>,
    pub kinds: Vec<LocKind>,
    pub init_loc: LocId,
    pub init_vals: Vec<Rat>,
    pub succs: Vec<Vec<LocId>>,
    pub updates: BTreeMap<LocId, (Var, UpdateKind)>,
    pub probs: BTreeMap<LocId, Vec<(LocId, Rat)>>,
    pub guards: BTreeMap<(LocId, LocId), Predicate<Rat>>,
    /// Invariant map: one predicate per location.
    pub invariant: Vec<Predicate<Rat>>,
    /// Target map: conjunctive predicate per location, `None` when the
    /// location contributes nothing to the target set.
    pub target: Vec<Option<ConjPredicate<Rat>>>,
}

impl Pcfg {
    pub fn n_locs(&self) -> usize {
        self.loc_names.len()
    }

    /// Id of the fresh variable used in nondeterministic update domains.
    pub fn fresh_var(&self) -> Var {
        self.vars.len() as Var
    }

    /// Variable name table extended with the fresh variable (for rendering).
    pub fn all_var_names(&self) -> Vec<String> {
        let mut names = self.vars.clone();
        names.push(self.fresh_name.clone());
        names
    }

    pub fn loc_index(&self, name: &str) -> Option<LocId> {
        self.loc_names.iter().position(|n| n == name)
    }

    /// Deterministic canonical serialization; basis of the fingerprint.
    pub fn canonical_text(&self) -> String {
        let names = self.all_var_names();
        let mut out = String::new();
        out.push_str(&format!("vars {}\n", self.vars.join(",")));
        out.push_str(&format!(
            "init {} [{}]\n",
            self.loc_names[self.init_loc],
            self.init_vals
                .iter()
                .map(rat_to_str)
                .collect::<Vec<_>>()
                .join(",")
        ));
        for l in 0..self.n_locs() {
            out.push_str(&format!(
                "loc {} kind {:?} succ [{}]\n",
                self.loc_names[l],
                self.kinds[l],
                self.succs[l]
                    .iter()
                    .map(|&s| self.loc_names[s].clone())
                    .collect::<Vec<_>>()
                    .join(",")
            ));
            if let Some((v, up)) = self.updates.get(&l) {
                let u = match up {
                    UpdateKind::Det(e) => crate::expr::render_poly(e, &names),
                    UpdateKind::Dist(d) => d.render(),
                    UpdateKind::Ndet(p) => {
                        format!("ndet {}", crate::expr::render_predicate(p, &names))
                    }
                };
                out.push_str(&format!("  update {} := {}\n", names[*v as usize], u));
            }
            if let Some(branches) = self.probs.get(&l) {
                for (to, p) in branches {
                    out.push_str(&format!(
                        "  prob {} -> {}\n",
                        rat_to_str(p),
                        self.loc_names[*to]
                    ));
                }
            }
            for &to in &self.succs[l] {
                if let Some(gd) = self.guards.get(&(l, to)) {
                    out.push_str(&format!(
                        "  guard -> {}: {}\n",
                        self.loc_names[to],
                        crate::expr::render_predicate(gd, &names)
                    ));
                }
            }
            out.push_str(&format!(
                "  inv {}\n",
                crate::expr::render_predicate(&self.invariant[l], &names)
            ));
            if let Some(t) = &self.target[l] {
                let tp = Predicate::single(t.clone());
                out.push_str(&format!(
                    "  target {}\n",
                    crate::expr::render_predicate(&tp, &names)
                ));
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_text().as_bytes());
        format!("{:x}", h.finalize())
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Checks the structural invariants of the model. Returns human-readable
/// violations; an empty list means the pCFG is well-formed. Guard exhaustion
/// and exclusion are decided exactly (via feasibility LPs) for linear guards
/// and by rational sampling otherwise (sound for violation, incomplete for
/// proof; such findings are marked "sampled").
pub fn validate_pcfg(g: &Pcfg) -> Vec<String> {
    let mut out = Vec::new();
    let nv = g.vars.len();
    if g.init_vals.len() != nv {
        out.push(format!(
            "initial valuation has {} entries for {} variables",
            g.init_vals.len(),
            nv
        ));
        return out;
    }
    for l in 0..g.n_locs() {
        let name = &g.loc_names[l];
        if g.succs[l].is_empty() {
            out.push(format!("location {} has no successor (relation not total)", name));
        }
        match g.kinds[l] {
            LocKind::Assign => {
                if g.succs[l].len() != 1 {
                    out.push(format!(
                        "assignment location {} has {} successors, expected 1",
                        name,
                        g.succs[l].len()
                    ));
                }
                match g.updates.get(&l) {
                    None => out.push(format!("assignment location {} has no update", name)),
                    Some((v, _)) if (*v as usize) >= nv => {
                        out.push(format!("location {} updates unknown variable id {}", name, v))
                    }
                    _ => {}
                }
            }
            LocKind::Prob => match g.probs.get(&l) {
                None => out.push(format!("probabilistic location {} has no distribution", name)),
                Some(branches) => {
                    let total: Rat = branches
                        .iter()
                        .map(|(_, p)| p.clone())
                        .fold(Rat::zero(), |a, b| a + b);
                    if total != Rat::one() {
                        out.push(format!(
                            "probabilities at {} sum to {}, expected 1",
                            name,
                            rat_to_str(&total)
                        ));
                    }
                    if branches.iter().any(|(_, p)| *p <= Rat::zero()) {
                        out.push(format!("nonpositive branch probability at {}", name));
                    }
                    let mut bsucc: Vec<LocId> = branches.iter().map(|&(t, _)| t).collect();
                    bsucc.sort();
                    bsucc.dedup();
                    let mut ssucc = g.succs[l].clone();
                    ssucc.sort();
                    if bsucc != ssucc {
                        out.push(format!(
                            "branch targets at {} disagree with the transition relation",
                            name
                        ));
                    }
                }
            },
            LocKind::Det => {
                let guards: Vec<&Predicate<Rat>> = g.succs[l]
                    .iter()
                    .filter_map(|&to| g.guards.get(&(l, to)))
                    .collect();
                if guards.len() != g.succs[l].len() {
                    out.push(format!("deterministic location {} is missing guards", name));
                } else {
                    check_guards(g, l, &guards, &mut out);
                }
            }
            LocKind::Nondet => {}
        }
    }
    // Initial configuration must satisfy its invariant.
    match g.invariant[g.init_loc].holds_at(&g.init_vals) {
        Ok(true) => {}
        Ok(false) => out.push("initial configuration violates its invariant".into()),
        Err(e) => out.push(format!("invariant evaluation failed at init: {}", e)),
    }
    out
}

fn check_guards(g: &Pcfg, l: LocId, guards: &[&Predicate<Rat>], out: &mut Vec<String>) {
    let name = &g.loc_names[l];
    let nvars = g.vars.len();
    let all_linear = guards.iter().all(|p| p.is_linear());
    if all_linear {
        // Mutual exclusion: no pair of guards simultaneously satisfiable.
        for i in 0..guards.len() {
            for j in (i + 1)..guards.len() {
                if let SatResult::Point(pt) = sat_point(&guards[i].and(guards[j]), nvars) {
                    out.push(format!(
                        "guards {} and {} at {} overlap (witness [{}])",
                        i,
                        j,
                        name,
                        pt.iter().map(rat_to_str).collect::<Vec<_>>().join(",")
                    ));
                }
            }
        }
        // Collective exhaustion: complement of the union must be empty.
        let mut union = Predicate::bottom();
        for gd in guards {
            union = union.or(gd);
        }
        if let SatResult::Point(pt) = sat_point(&union.negate(), nvars) {
            out.push(format!(
                "guards at {} are not exhaustive (gap at [{}])",
                name,
                pt.iter().map(rat_to_str).collect::<Vec<_>>().join(",")
            ));
        }
    } else {
        // Sampling fallback for nonlinear guards.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9cf6);
        for _ in 0..2000 {
            let pt: Vec<Rat> = (0..nvars)
                .map(|_| {
                    let num: i64 = rng.gen_range(-400..=400);
                    Rat::new(num.into(), 4.into())
                })
                .collect();
            let hits = guards
                .iter()
                .filter(|gd| gd.holds_at(&pt).unwrap_or(false))
                .count();
            if hits != 1 {
                out.push(format!(
                    "guards at {} cover point [{}] {} times (sampled check)",
                    name,
                    pt.iter().map(rat_to_str).collect::<Vec<_>>().join(","),
                    hits
                ));
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// JSON format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct PcfgJson {
    variables: Vec<String>,
    init: InitJson,
    locations: Vec<LocJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InitJson {
    location: String,
    #[serde(default)]
    valuation: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LocJson {
    name: String,
    kind: LocKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    invariant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    /// Deterministic locations: guarded edges.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    guards: Vec<GuardJson>,
    /// Probabilistic locations: weighted edges.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    branches: Vec<BranchJson>,
    /// Nondeterministic successors, or the unique successor of an assignment.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    to: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    update: Option<UpdateJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GuardJson {
    to: String,
    pred: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct BranchJson {
    to: String,
    prob: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct UpdateJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    det: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uniform: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    finite: Option<Vec<[String; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometric: Option<String>,
    /// Domain predicate over `ndet_var`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ndet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ndet_var: Option<String>,
}

fn parse_rat_field(s: &str, what: &str) -> Result<Rat, PcfgError> {
    crate::scalar::rat_from_str(s)
        .ok_or_else(|| PcfgError::Structure(format!("bad rational '{}' in {}", s, what)))
}

/// Loads a pCFG from its JSON description.
pub fn pcfg_from_json(text: &str) -> Result<Pcfg, PcfgError> {
    let spec: PcfgJson = serde_json::from_str(text)?;
    let vars = spec.variables.clone();
    let mut fresh_name = "u".to_string();
    // Fresh-variable display name must not collide with a program variable.
    while vars.contains(&fresh_name) {
        fresh_name.push('_');
    }
    let loc_names: Vec<String> = spec.locations.iter().map(|l| l.name.clone()).collect();
    let find = |name: &str| -> Result<LocId, PcfgError> {
        loc_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| PcfgError::Structure(format!("unknown location '{}'", name)))
    };
    let n = spec.locations.len();
    let mut g = Pcfg {
        vars: vars.clone(),
        fresh_name: fresh_name.clone(),
        loc_names: loc_names.clone(),
        kinds: spec.locations.iter().map(|l| l.kind).collect(),
        init_loc: find(&spec.init.location)?,
        init_vals: Vec::new(),
        succs: vec![Vec::new(); n],
        updates: BTreeMap::new(),
        probs: BTreeMap::new(),
        guards: BTreeMap::new(),
        invariant: vec![Predicate::top(); n],
        target: vec![None; n],
    };
    for v in &vars {
        let val = match spec.init.valuation.get(v) {
            Some(s) => parse_rat_field(s, "initial valuation")?,
            None => Rat::zero(),
        };
        g.init_vals.push(val);
    }
    for (l, loc) in spec.locations.iter().enumerate() {
        if let Some(inv) = &loc.invariant {
            g.invariant[l] = parse_pred_str(inv, &vars)?;
        }
        if let Some(t) = &loc.target {
            let p = parse_pred_str(t, &vars)?;
            if p.disjuncts.len() != 1 {
                return Err(PcfgError::Structure(format!(
                    "target at {} must be conjunctive",
                    loc.name
                )));
            }
            g.target[l] = Some(p.disjuncts.into_iter().next().unwrap());
        }
        match loc.kind {
            LocKind::Det => {
                for gj in &loc.guards {
                    let to = find(&gj.to)?;
                    g.succs[l].push(to);
                    g.guards.insert((l, to), parse_pred_str(&gj.pred, &vars)?);
                }
            }
            LocKind::Prob => {
                for bj in &loc.branches {
                    let to = find(&bj.to)?;
                    let p = parse_rat_field(&bj.prob, "branch probability")?;
                    if !g.succs[l].contains(&to) {
                        g.succs[l].push(to);
                    }
                    g.probs.entry(l).or_default().push((to, p));
                }
            }
            LocKind::Nondet => {
                for t in &loc.to {
                    g.succs[l].push(find(t)?);
                }
            }
            LocKind::Assign => {
                let to = loc
                    .to
                    .first()
                    .ok_or_else(|| PcfgError::Structure(format!("assign {} needs 'to'", loc.name)))?;
                g.succs[l].push(find(to)?);
                let var_name = loc.var.as_ref().ok_or_else(|| {
                    PcfgError::Structure(format!("assign {} needs 'var'", loc.name))
                })?;
                let v = vars
                    .iter()
                    .position(|x| x == var_name)
                    .ok_or_else(|| PcfgError::Structure(format!("unknown variable '{}'", var_name)))?
                    as Var;
                let up = loc.update.as_ref().ok_or_else(|| {
                    PcfgError::Structure(format!("assign {} needs 'update'", loc.name))
                })?;
                let kind = if let Some(e) = &up.det {
                    UpdateKind::Det(parse_expr_str(e, &vars)?)
                } else if let Some([a, b]) = &up.uniform {
                    UpdateKind::Dist(DistDescriptor::Uniform(
                        parse_rat_field(a, "uniform")?,
                        parse_rat_field(b, "uniform")?,
                    ))
                } else if let Some(items) = &up.finite {
                    let mut xs = Vec::new();
                    for [v, p] in items {
                        xs.push((parse_rat_field(v, "finite")?, parse_rat_field(p, "finite")?));
                    }
                    UpdateKind::Dist(DistDescriptor::Finite(xs))
                } else if let Some(p) = &up.geometric {
                    UpdateKind::Dist(DistDescriptor::Geometric(parse_rat_field(p, "geometric")?))
                } else if let Some(pred) = &up.ndet {
                    let uname = up.ndet_var.clone().unwrap_or_else(|| "u".to_string());
                    let mut ext = vars.clone();
                    ext.push(uname);
                    UpdateKind::Ndet(parse_pred_str(pred, &ext)?)
                } else {
                    return Err(PcfgError::Structure(format!(
                        "assign {} has an empty update",
                        loc.name
                    )));
                };
                g.updates.insert(l, (v, kind));
            }
        }
    }
    Ok(g)
}
