//! Concrete certificates: JSON serialization, independent condition checking,
//! the concentration-based probability bound, and bounded-difference widths.

use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::expr::{ConjPredicate, ExpressionMap, LinConstraint};
use crate::farkas::sample_points_in_conj;
use crate::pcfg::{LocKind, Pcfg, UpdateKind};
use crate::simplex::{simplex_solve, LpProblem, LpStatus, Sense};
use crate::template::{gen_implications, CertKind, Template, UPoly};
use crate::scalar::{rat_from_str, rat_to_f64, rat_to_str};
use crate::{Rat, RatPoly};

#[derive(Debug, Error)]
pub enum CertError {
    #[error("certificate fingerprint {cert} does not match pCFG fingerprint {pcfg}")]
    Fingerprint { cert: String, pcfg: String },
    #[error("bad certificate JSON: {0}")]
    Json(String),
    #[error("nonlinear expression where a linear one is required: {0}")]
    Nonlinear(String),
    #[error("concentration bound precondition violated: {0}")]
    Concentration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SynthesizedExact,
    SynthesizedApproximate,
    HandWritten,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::SynthesizedExact => "synthesized-exact",
            Provenance::SynthesizedApproximate => "synthesized-approximate",
            Provenance::HandWritten => "hand-written",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "synthesized-exact" => Some(Provenance::SynthesizedExact),
            "synthesized-approximate" => Some(Provenance::SynthesizedApproximate),
            "hand-written" => Some(Provenance::HandWritten),
            _ => None,
        }
    }
}

/// Reported bound value: exact rational from the LP pipeline, or a float when
/// it passed through transcendental arithmetic or an external numeric solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Exact(Rat),
    Approx(f64),
}

impl Bound {
    pub fn to_f64(&self) -> f64 {
        match self {
            Bound::Exact(r) => rat_to_f64(r),
            Bound::Approx(f) => *f,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub kind: CertKind,
    pub eta: ExpressionMap<Rat>,
    /// Bounded-difference width, when computed (eps-rep only).
    pub kappa: Option<Rat>,
    /// Exact value of the expression map at the initial configuration.
    pub eta_init: Rat,
    /// Reported bound, clamped to [0,1] for probability-valued kinds.
    pub bound: Bound,
    /// For eps-rep: the raw concentration bound reached 1, so the certificate
    /// only refutes almost-sure reachability without a nontrivial number.
    pub refutation_only: bool,
    pub provenance: Provenance,
    /// Fingerprint of the pCFG the certificate was built for.
    pub fingerprint: String,
    /// The bound is the trivial top (resp. bottom) element.
    pub trivial: bool,
}

impl Certificate {
    pub fn to_json(&self, g: &Pcfg) -> String {
        let names = g.all_var_names();
        let mut exprs = serde_json::Map::new();
        for (l, e) in self.eta.by_location.iter().enumerate() {
            exprs.insert(
                g.loc_names[l].clone(),
                serde_json::Value::String(crate::expr::render_poly(e, &names)),
            );
        }
        let mut params = serde_json::Map::new();
        match &self.kind {
            CertKind::NNRep { level } => {
                params.insert("level".into(), rat_to_str(level).into());
            }
            CertKind::SclSub { gamma } => {
                params.insert("gamma".into(), rat_to_str(gamma).into());
            }
            CertKind::ARnk => {}
            CertKind::EpsRep { eps } => {
                params.insert("eps".into(), rat_to_str(eps).into());
                if let Some(k) = &self.kappa {
                    params.insert("kappa".into(), rat_to_str(k).into());
                }
            }
        }
        let bound = match &self.bound {
            Bound::Exact(r) => serde_json::Value::String(rat_to_str(r)),
            Bound::Approx(f) => serde_json::json!(f),
        };
        let v = serde_json::json!({
            "kind": self.kind.name(),
            "params": params,
            "expressions": exprs,
            "eta_init": rat_to_str(&self.eta_init),
            "bound": bound,
            "refutation_only": self.refutation_only,
            "provenance": self.provenance.as_str(),
            "trivial": self.trivial,
            "pcfg_fingerprint": self.fingerprint,
        });
        serde_json::to_string_pretty(&v).expect("certificate JSON")
    }

    pub fn from_json(text: &str, g: &Pcfg) -> Result<Certificate, CertError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CertError::Json(e.to_string()))?;
        let get_str = |v: &serde_json::Value, k: &str| -> Result<String, CertError> {
            v.get(k)
                .and_then(|x| x.as_str())
                .map(str::to_string)
                .ok_or_else(|| CertError::Json(format!("missing string field `{}`", k)))
        };
        let rat_param = |k: &str| -> Result<Rat, CertError> {
            let p = v
                .get("params")
                .and_then(|p| p.get(k))
                .and_then(|x| x.as_str())
                .ok_or_else(|| CertError::Json(format!("missing param `{}`", k)))?;
            rat_from_str(p).ok_or_else(|| CertError::Json(format!("bad rational `{}`", p)))
        };
        let kind = match get_str(&v, "kind")?.as_str() {
            "nnrep" => CertKind::NNRep { level: rat_param("level")? },
            "sclsub" => CertKind::SclSub { gamma: rat_param("gamma")? },
            "arnk" => CertKind::ARnk,
            "eps-rep" => CertKind::EpsRep { eps: rat_param("eps")? },
            other => return Err(CertError::Json(format!("unknown kind `{}`", other))),
        };
        let kappa = match v.get("params").and_then(|p| p.get("kappa")).and_then(|x| x.as_str()) {
            Some(s) => {
                Some(rat_from_str(s).ok_or_else(|| CertError::Json(format!("bad kappa `{}`", s)))?)
            }
            None => None,
        };
        let exprs = v
            .get("expressions")
            .and_then(|x| x.as_object())
            .ok_or_else(|| CertError::Json("missing `expressions` object".into()))?;
        let mut by_location = vec![RatPoly::zero(); g.n_locs()];
        let mut seen = vec![false; g.n_locs()];
        for (name, e) in exprs {
            let l = g
                .loc_index(name)
                .ok_or_else(|| CertError::Json(format!("unknown location `{}`", name)))?;
            let src = e
                .as_str()
                .ok_or_else(|| CertError::Json(format!("expression at `{}` not a string", name)))?;
            by_location[l] = crate::parse::parse_expr_str(src, &g.vars)
                .map_err(|err| CertError::Json(format!("expression at `{}`: {}", name, err)))?;
            seen[l] = true;
        }
        if let Some(l) = seen.iter().position(|s| !s) {
            return Err(CertError::Json(format!(
                "no expression for location `{}`",
                g.loc_names[l]
            )));
        }
        let eta = ExpressionMap { by_location };
        let eta_init = match v.get("eta_init").and_then(|x| x.as_str()) {
            Some(s) => rat_from_str(s)
                .ok_or_else(|| CertError::Json(format!("bad eta_init `{}`", s)))?,
            None => eta.by_location[g.init_loc]
                .eval_slice(&g.init_vals)
                .map_err(|e| CertError::Json(e.to_string()))?,
        };
        let bound = match v.get("bound") {
            Some(serde_json::Value::String(s)) => Bound::Exact(
                rat_from_str(s).ok_or_else(|| CertError::Json(format!("bad bound `{}`", s)))?,
            ),
            Some(serde_json::Value::Number(n)) => Bound::Approx(
                n.as_f64()
                    .ok_or_else(|| CertError::Json("bad numeric bound".into()))?,
            ),
            _ => Bound::Exact(eta_init.clone()),
        };
        let provenance = match v.get("provenance").and_then(|x| x.as_str()) {
            Some(s) => Provenance::parse(s)
                .ok_or_else(|| CertError::Json(format!("unknown provenance `{}`", s)))?,
            None => Provenance::HandWritten,
        };
        Ok(Certificate {
            kind,
            eta,
            kappa,
            eta_init,
            bound,
            refutation_only: v
                .get("refutation_only")
                .and_then(|x| x.as_bool())
                .unwrap_or(false),
            provenance,
            fingerprint: v
                .get("pcfg_fingerprint")
                .and_then(|x| x.as_str())
                .unwrap_or("")
                .to_string(),
            trivial: v.get("trivial").and_then(|x| x.as_bool()).unwrap_or(false),
        })
    }
}

/// Outcome of one defining-condition check.
#[derive(Debug, Clone)]
pub enum CheckStatus {
    /// Proved over the (relaxed) antecedent region by an exact LP.
    VerifiedExact,
    /// Held at every sampled point of the antecedent region.
    VerifiedSampled(usize),
    /// The relaxed region has a violation, but no sampled point of the strict
    /// region violates: the defect sits on a strict boundary.
    BoundaryOnly,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub ok: bool,
    pub results: Vec<(String, CheckStatus)>,
    /// Violations: condition note, witness point, slack.
    pub failures: Vec<(String, Vec<Rat>, Rat)>,
    pub warnings: Vec<String>,
}

/// Checks the defining inequalities of the certificate against the pCFG,
/// independently of how the certificate was produced. Linear conditions are
/// verified exactly by minimizing the consequent over the antecedent region;
/// nonlinear ones are checked on sampled points (count `points` per region).
pub fn check_certificate(
    g: &Pcfg,
    cert: &Certificate,
    points: usize,
    seed: u64,
) -> Result<CheckReport, CertError> {
    if !cert.fingerprint.is_empty() {
        let fp = g.fingerprint();
        if cert.fingerprint != fp {
            return Err(CertError::Fingerprint {
                cert: cert.fingerprint.clone(),
                pcfg: fp,
            });
        }
    }
    // A zero-unknown template carrying the concrete expressions reuses the
    // synthesis-side condition generator, so checking and synthesis agree on
    // what the conditions are.
    let t = Template {
        exprs: cert.eta.by_location.iter().map(UPoly::from_poly).collect(),
        unknowns: Vec::new(),
        degree: cert.eta.by_location.iter().map(|e| e.degree()).max().unwrap_or(0),
    };
    let imps = gen_implications(g, &t, &cert.kind);
    let nvars = g.vars.len() + 1; // program variables plus the fresh one
    let mut report = CheckReport {
        ok: true,
        results: Vec::new(),
        failures: Vec::new(),
        warnings: Vec::new(),
    };
    for (ii, imp) in imps.iter().enumerate() {
        let consequent = imp.consequent.instantiate(&[]);
        let relaxed: ConjPredicate<Rat> = imp.antecedent.iter().map(|c| c.relaxed()).collect();
        let linear = consequent.is_linear() && relaxed.iter().all(|c| c.lhs.is_linear());
        if linear {
            match min_linear_over(&relaxed, nvars, &consequent) {
                RegionExtremum::Empty => {
                    report
                        .results
                        .push((imp.note.clone(), CheckStatus::VerifiedExact));
                }
                RegionExtremum::Value(min, _) if !min.is_negative() => {
                    report
                        .results
                        .push((imp.note.clone(), CheckStatus::VerifiedExact));
                }
                RegionExtremum::Value(_, witness) | RegionExtremum::Unbounded(witness) => {
                    // Violated over the closure; look for a witness satisfying
                    // the strict antecedent.
                    let strict_witness = find_strict_witness(
                        &imp.antecedent,
                        nvars,
                        &consequent,
                        witness,
                        points.max(64),
                        seed.wrapping_add(ii as u64),
                    );
                    match strict_witness {
                        Some((pt, slack)) => {
                            report.ok = false;
                            report.failures.push((imp.note.clone(), pt, slack));
                        }
                        None => {
                            report.warnings.push(format!(
                                "violation only on the strict boundary of: {}",
                                imp.note
                            ));
                            report
                                .results
                                .push((imp.note.clone(), CheckStatus::BoundaryOnly));
                        }
                    }
                }
            }
        } else {
            let pts = sample_points_in_conj(&relaxed, nvars, points, seed.wrapping_add(ii as u64));
            let mut checked = 0usize;
            let mut failed = false;
            for pt in pts {
                let inside = imp
                    .antecedent
                    .iter()
                    .all(|c| c.holds_at(&pt).unwrap_or(false));
                if !inside {
                    continue;
                }
                checked += 1;
                let val = consequent.eval_slice(&pt).map_err(|e| {
                    CertError::Json(format!("evaluation failed in check: {}", e))
                })?;
                if val.is_negative() {
                    report.ok = false;
                    report.failures.push((imp.note.clone(), pt, val));
                    failed = true;
                    break;
                }
            }
            if !failed {
                if checked == 0 {
                    report
                        .warnings
                        .push(format!("no sample points found for: {}", imp.note));
                }
                report
                    .results
                    .push((imp.note.clone(), CheckStatus::VerifiedSampled(checked)));
            }
        }
    }
    Ok(report)
}

enum RegionExtremum {
    Empty,
    /// Optimal value together with the optimizing point.
    Value(Rat, Vec<Rat>),
    /// Objective unbounded in the optimized direction; point is feasible.
    Unbounded(Vec<Rat>),
}

fn linear_objective(p: &RatPoly) -> (Vec<(usize, Rat)>, Rat) {
    let (coeffs, konst) = p.linear_parts().expect("caller checked linearity");
    (
        coeffs.into_iter().map(|(v, c)| (v as usize, c)).collect(),
        konst,
    )
}

fn extremize_linear_over(
    conj: &ConjPredicate<Rat>,
    nvars: usize,
    obj: &RatPoly,
    sense: Sense,
) -> RegionExtremum {
    let mut lp = LpProblem::new(sense);
    for i in 0..nvars {
        lp.add_var(format!("x{}", i), false);
    }
    for c in conj {
        let (coeffs, konst) = c
            .lhs
            .linear_parts()
            .expect("caller checked linearity of the antecedent");
        lp.add_row(
            coeffs.into_iter().map(|(v, k)| (v as usize, k)).collect(),
            crate::simplex::Rel::Ge,
            -konst,
            "",
        );
    }
    let (obj_coeffs, obj_const) = linear_objective(obj);
    lp.objective = obj_coeffs;
    lp.obj_const = obj_const;
    let sol = simplex_solve(&lp);
    match sol.status {
        LpStatus::Infeasible => RegionExtremum::Empty,
        LpStatus::Unbounded => {
            // Re-solve for feasibility to obtain some point of the region.
            let mut f = lp.clone();
            f.sense = Sense::Feasibility;
            f.objective = Vec::new();
            let fs = simplex_solve(&f);
            RegionExtremum::Unbounded(fs.assignment)
        }
        LpStatus::Optimal => RegionExtremum::Value(sol.objective, sol.assignment),
    }
}

fn min_linear_over(conj: &ConjPredicate<Rat>, nvars: usize, obj: &RatPoly) -> RegionExtremum {
    extremize_linear_over(conj, nvars, obj, Sense::Minimize)
}

/// Looks for a point satisfying the strict antecedent where the consequent is
/// negative: first the LP minimizer itself, then sampled points.
fn find_strict_witness(
    ante: &ConjPredicate<Rat>,
    nvars: usize,
    consequent: &RatPoly,
    minimizer: Vec<Rat>,
    count: usize,
    seed: u64,
) -> Option<(Vec<Rat>, Rat)> {
    let mut candidates = vec![minimizer];
    let relaxed: ConjPredicate<Rat> = ante.iter().map(|c| c.relaxed()).collect();
    candidates.extend(sample_points_in_conj(&relaxed, nvars, count, seed));
    for pt in candidates {
        if pt.len() < nvars {
            continue;
        }
        let inside = ante.iter().all(|c| c.holds_at(&pt).unwrap_or(false));
        if !inside {
            continue;
        }
        if let Ok(v) = consequent.eval_slice(&pt) {
            if v.is_negative() {
                return Some((pt, v));
            }
        }
    }
    None
}

/// Probability bound from the concentration argument: with `eta0 < 0`,
/// `eps > 0`, `kappa > 0`,
///
/// ```text
/// gamma = exp(-eps^2 / (2 (kappa+eps)^2))
/// alpha = exp(eps * eta0 / (kappa+eps)^2)
/// raw   = alpha * gamma^ceil(|eta0|/kappa) / (1 - gamma)
/// ```
///
/// Returns `(min(1, raw), raw >= 1)`; the flag marks a refutation-only
/// certificate (reachability is still provably below one, but the numeric
/// bound is vacuous).
pub fn azuma_bound(eta0: &Rat, eps: &Rat, kappa: &Rat) -> Result<(f64, bool), CertError> {
    if !eta0.is_negative() {
        return Err(CertError::Concentration(format!(
            "initial value must be negative, got {}",
            rat_to_str(eta0)
        )));
    }
    if !eps.is_positive() || !kappa.is_positive() {
        return Err(CertError::Concentration(
            "eps and kappa must be positive".into(),
        ));
    }
    let e = rat_to_f64(eps);
    let s = {
        let ke = kappa.clone() + eps.clone();
        rat_to_f64(&(ke.clone() * ke))
    };
    let gamma = (-e * e / (2.0 * s)).exp();
    let alpha = (e * rat_to_f64(eta0) / s).exp();
    // ceil(|eta0| / kappa) computed exactly.
    let q = eta0.abs() / kappa.clone();
    let n = q.ceil().to_integer().to_f64().unwrap_or(f64::INFINITY);
    let raw = alpha * gamma.powf(n) / (1.0 - gamma);
    Ok((raw.min(1.0), raw >= 1.0))
}

/// Maximum one-step change of the expression map over the invariant:
/// `sup |eta(c) - eta(c')|` over all configurations `c` and successors `c'`.
/// `None` means unbounded. Only linear maps are supported.
pub fn kappa_of(g: &Pcfg, eta: &ExpressionMap<Rat>) -> Result<Option<Rat>, CertError> {
    for (l, e) in eta.by_location.iter().enumerate() {
        if !e.is_linear() {
            return Err(CertError::Nonlinear(format!(
                "expression at {} has degree {}",
                g.loc_names[l],
                e.degree()
            )));
        }
    }
    let nvars = g.vars.len() + 1;
    let fresh = g.fresh_var();
    let mut kappa: Option<Rat> = None;
    for l in 0..g.n_locs() {
        // (difference expression, extra constraints) per transition case.
        let mut cases: Vec<(RatPoly, ConjPredicate<Rat>)> = Vec::new();
        let here = &eta.by_location[l];
        match g.kinds[l] {
            LocKind::Nondet => {
                for &s in &g.succs[l] {
                    cases.push((eta.by_location[s].sub(here), Vec::new()));
                }
            }
            LocKind::Prob => {
                for (s, _) in &g.probs[&l] {
                    cases.push((eta.by_location[*s].sub(here), Vec::new()));
                }
            }
            LocKind::Det => {
                for &s in &g.succs[l] {
                    let guard = &g.guards[&(l, s)];
                    for d in &guard.disjuncts {
                        cases.push((eta.by_location[s].sub(here), d.clone()));
                    }
                }
            }
            LocKind::Assign => {
                let s = g.succs[l][0];
                let (v, up) = &g.updates[&l];
                let next = &eta.by_location[s];
                match up {
                    UpdateKind::Det(expr) => {
                        cases.push((next.substitute(*v, expr).sub(here), Vec::new()));
                    }
                    UpdateKind::Dist(d) => {
                        let post = next.substitute(*v, &RatPoly::var(fresh));
                        let (lo, hi) = d.support_bounds();
                        let mut extra = vec![LinConstraint::ge(
                            RatPoly::var(fresh).sub(&RatPoly::constant(lo)),
                        )];
                        if let Some(hi) = hi {
                            extra.push(LinConstraint::ge(
                                RatPoly::constant(hi).sub(&RatPoly::var(fresh)),
                            ));
                        }
                        cases.push((post.sub(here), extra));
                    }
                    UpdateKind::Ndet(dom) => {
                        let post = next.substitute(*v, &RatPoly::var(fresh));
                        for d in &dom.disjuncts {
                            cases.push((post.sub(here), d.clone()));
                        }
                    }
                }
            }
        }
        // Attach each case to every invariant disjunct of the source location.
        let inv = &g.invariant[l];
        let fresh_cases: Vec<(RatPoly, ConjPredicate<Rat>)> = cases
            .drain(..)
            .flat_map(|(diff, extra)| {
                inv.disjuncts.iter().map(move |d| {
                    let mut c = d.iter().map(|x| x.relaxed()).collect::<Vec<_>>();
                    c.extend(extra.iter().map(|x| x.relaxed()));
                    (diff.clone(), c)
                })
            })
            .collect();
        for (diff, region) in fresh_cases {
            for dir in [Sense::Maximize, Sense::Minimize] {
                match extremize_linear_over(&region, nvars, &diff, dir) {
                    RegionExtremum::Empty => {}
                    RegionExtremum::Unbounded(_) => return Ok(None),
                    RegionExtremum::Value(v, _) => {
                        let v = v.abs();
                        if kappa.as_ref().map_or(true, |b| v > *b) {
                            kappa = Some(v);
                        }
                    }
                }
            }
        }
    }
    Ok(Some(kappa.unwrap_or_else(Rat::zero)))
}

/// The constant-one map: the trivial upper certificate on any pCFG.
pub fn trivial_upper(g: &Pcfg) -> Certificate {
    let eta = ExpressionMap {
        by_location: (0..g.n_locs()).map(|_| RatPoly::constant(Rat::one())).collect(),
    };
    Certificate {
        kind: CertKind::NNRep { level: Rat::one() },
        eta,
        kappa: None,
        eta_init: Rat::one(),
        bound: Bound::Exact(Rat::one()),
        refutation_only: false,
        provenance: Provenance::HandWritten,
        fingerprint: g.fingerprint(),
        trivial: true,
    }
}
