//! Linear-template synthesis: template + implications + Farkas + exact LP.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::cert::{azuma_bound, kappa_of, trivial_upper, Bound, Certificate, Provenance};
use crate::farkas::{farkas_transform, FarkasError};
use crate::simplex::{simplex_solve, LpStatus, Rel, Sense};
use crate::template::{gen_implications, CertKind, Template};
use crate::pcfg::Pcfg;
use crate::Rat;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("linear-template pipeline cannot handle this problem: {0}")]
    Nonlinear(String),
}

impl From<FarkasError> for SynthError {
    fn from(e: FarkasError) -> Self {
        match e {
            FarkasError::Nonlinear(n) => SynthError::Nonlinear(n),
        }
    }
}

#[derive(Debug)]
pub enum SynthResult {
    Found(Certificate),
    NoCertificate { reason: String },
}

/// Synthesis output together with diagnostics about the generated LP.
#[derive(Debug)]
pub struct Synthesis {
    pub result: SynthResult,
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
    pub lp_rows: usize,
    pub lp_vars: usize,
    pub pivots: usize,
}

fn clamp01(v: &Rat) -> Rat {
    if v.is_negative() {
        Rat::zero()
    } else if *v > Rat::one() {
        Rat::one()
    } else {
        v.clone()
    }
}

/// Runs the full linear pipeline for a degree-`degree` template.
///
/// Objective per kind: minimize the initial value for upper bounds (nnrep,
/// arnk) and for eps-rep (which wants it as negative as possible); maximize
/// it for the lower-bound sclsub. The eps-rep objective is unbounded exactly
/// when a refuting certificate exists (any such certificate scales), so an
/// unbounded LP falls back to a feasibility solve pinned at initial value
/// <= -1.
pub fn synthesize(g: &Pcfg, kind: &CertKind, degree: u32) -> Result<Synthesis, SynthError> {
    let t = Template::new(g, degree);
    let imps = gen_implications(g, &t, kind);
    let nvars = g.vars.len() + 1;
    let objective = t.at_init(g);
    let sense = match kind {
        CertKind::SclSub { .. } => Sense::Maximize,
        _ => Sense::Minimize,
    };
    let mut fk = farkas_transform(&imps, t.n_unknowns(), nvars, &objective, sense)?;
    let lp_rows = fk.lp.rows.len();
    let lp_vars = fk.lp.names.len();
    let mut sol = simplex_solve(&fk.lp);
    let mut pivots = sol.pivots;

    if matches!(kind, CertKind::EpsRep { .. }) && sol.status == LpStatus::Unbounded {
        // Pin the initial value and re-solve for feasibility.
        let row: Vec<(usize, Rat)> = objective
            .terms
            .iter()
            .map(|(u, c)| (*u as usize, c.clone()))
            .collect();
        let rhs = -Rat::one() - objective.konst.clone();
        fk.lp.add_row(row, Rel::Le, rhs, "pin initial value <= -1");
        fk.lp.sense = Sense::Feasibility;
        fk.lp.objective = Vec::new();
        sol = simplex_solve(&fk.lp);
        pivots += sol.pivots;
    }

    let finish = |result: SynthResult| Synthesis {
        result,
        dropped: fk.dropped.clone(),
        warnings: fk.warnings.clone(),
        lp_rows,
        lp_vars,
        pivots,
    };

    match sol.status {
        LpStatus::Infeasible => {
            let res = match kind {
                // The constant-one map is always an upper reach certificate.
                CertKind::NNRep { .. } => SynthResult::Found(trivial_upper(g)),
                _ => SynthResult::NoCertificate {
                    reason: format!("no {} certificate of this template shape", kind.name()),
                },
            };
            Ok(finish(res))
        }
        LpStatus::Unbounded => {
            let res = match kind {
                CertKind::NNRep { .. } => SynthResult::Found(trivial_upper(g)),
                _ => SynthResult::NoCertificate {
                    reason: format!(
                        "LP for {} unbounded; no finite optimum of this template shape",
                        kind.name()
                    ),
                },
            };
            Ok(finish(res))
        }
        LpStatus::Optimal => {
            let u_vals: Vec<Rat> = sol.assignment[..t.n_unknowns()].to_vec();
            let eta = t.instantiate(&u_vals);
            let eta_init = objective.eval(&u_vals);
            let cert = match kind {
                CertKind::NNRep { .. } => {
                    let b = clamp01(&eta_init);
                    let trivial = b == Rat::one();
                    Certificate {
                        kind: kind.clone(),
                        eta,
                        kappa: None,
                        eta_init,
                        bound: Bound::Exact(b),
                        refutation_only: false,
                        provenance: Provenance::SynthesizedExact,
                        fingerprint: g.fingerprint(),
                        trivial,
                    }
                }
                CertKind::SclSub { .. } => {
                    let b = clamp01(&eta_init);
                    let trivial = b.is_zero();
                    Certificate {
                        kind: kind.clone(),
                        eta,
                        kappa: None,
                        eta_init,
                        bound: Bound::Exact(b),
                        refutation_only: false,
                        provenance: Provenance::SynthesizedExact,
                        fingerprint: g.fingerprint(),
                        trivial,
                    }
                }
                CertKind::ARnk => Certificate {
                    kind: kind.clone(),
                    eta,
                    kappa: None,
                    eta_init: eta_init.clone(),
                    bound: Bound::Exact(eta_init),
                    refutation_only: false,
                    provenance: Provenance::SynthesizedExact,
                    fingerprint: g.fingerprint(),
                    trivial: false,
                },
                CertKind::EpsRep { eps } => {
                    if !eta_init.is_negative() {
                        return Ok(finish(SynthResult::NoCertificate {
                            reason: "no refuting certificate: minimal initial value is nonnegative"
                                .into(),
                        }));
                    }
                    let kappa = kappa_of(g, &eta)
                        .map_err(|e| SynthError::Nonlinear(e.to_string()))?;
                    let (bound, refutation_only) = match &kappa {
                        Some(k) if k.is_positive() => {
                            let (b, flag) = azuma_bound(&eta_init, eps, k)
                                .expect("preconditions established above");
                            (Bound::Approx(b), flag)
                        }
                        // kappa unbounded (or degenerate zero): the numeric
                        // bound is unavailable, refutation stands.
                        _ => (Bound::Approx(1.0), true),
                    };
                    Certificate {
                        kind: kind.clone(),
                        eta,
                        kappa,
                        eta_init,
                        bound,
                        refutation_only,
                        provenance: Provenance::SynthesizedExact,
                        fingerprint: g.fingerprint(),
                        trivial: false,
                    }
                }
            };
            Ok(finish(SynthResult::Found(cert)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::check_certificate;
    use crate::lower::lower_to_pcfg;
    use crate::parse::{parse, Mode};
    use crate::pcfg::validate_pcfg;
    use crate::{rat, rint};

    /// Fair random walk on [0,10], absorbed at 0 (safe) and 10 (target).
    const FAIR_WALK: &str = "
        x := 5;
        {0 <= x and x <= 9}
        while x >= 1 do
            {1 <= x and x <= 9}
            if prob(0.5) then
                {1 <= x and x <= 9}
                x := x + 1
            else
                {1 <= x and x <= 9}
                x := x - 1
            fi;
            {0 <= x and x <= 10}
            refute (x >= 10)
        od
    ";

    fn fair_walk() -> crate::pcfg::Pcfg {
        let p = parse(FAIR_WALK, Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        assert!(validate_pcfg(&g).is_empty(), "{:?}", validate_pcfg(&g));
        g
    }

    #[test]
    fn nnrep_fair_walk_bound_is_one_half() {
        let g = fair_walk();
        let s = synthesize(&g, &CertKind::NNRep { level: rint(1) }, 1).unwrap();
        match s.result {
            SynthResult::Found(c) => {
                assert_eq!(c.bound, crate::cert::Bound::Exact(rat(1, 2)));
                assert!(!c.trivial);
                let rep = check_certificate(&g, &c, 64, 7).unwrap();
                assert!(rep.ok, "failures: {:?}", rep.failures);
            }
            other => panic!("expected certificate, got {:?}", other),
        }
    }

    #[test]
    fn nnrep_without_invariants_degrades_to_trivial_bound() {
        let src = "
            x := 5;
            while x >= 1 do
                if prob(0.5) then x := x + 1 else x := x - 1 fi;
                refute (x >= 10)
            od
        ";
        let p = parse(src, Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        let s = synthesize(&g, &CertKind::NNRep { level: rint(1) }, 1).unwrap();
        match s.result {
            SynthResult::Found(c) => {
                assert_eq!(c.bound, crate::cert::Bound::Exact(rint(1)));
                assert!(c.trivial);
            }
            other => panic!("expected trivial certificate, got {:?}", other),
        }
    }

    #[test]
    fn sclsub_fair_walk_is_sound_and_checks() {
        let g = fair_walk();
        let s = synthesize(&g, &CertKind::SclSub { gamma: rat(99, 100) }, 1).unwrap();
        match s.result {
            SynthResult::Found(c) => {
                let b = match &c.bound {
                    crate::cert::Bound::Exact(b) => b.clone(),
                    _ => unreachable!(),
                };
                assert!(b >= rint(0) && b <= rat(1, 2), "lower bound {} out of range", b);
                let rep = check_certificate(&g, &c, 64, 11).unwrap();
                assert!(rep.ok, "failures: {:?}", rep.failures);
            }
            other => panic!("expected certificate, got {:?}", other),
        }
    }

    #[test]
    fn arnk_countdown_expected_steps() {
        // Deterministic countdown from 10; three transitions per iteration.
        let src = "
            x := 10;
            {1 <= x and x <= 10}
            while true do
                {1 <= x and x <= 10}
                x := x - 1;
                {0 <= x and x <= 9}
                refute (x <= 0)
            od
        ";
        let p = parse(src, Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        assert!(validate_pcfg(&g).is_empty(), "{:?}", validate_pcfg(&g));
        let s = synthesize(&g, &CertKind::ARnk, 1).unwrap();
        match s.result {
            SynthResult::Found(c) => {
                assert_eq!(c.bound, crate::cert::Bound::Exact(rint(30)));
                let rep = check_certificate(&g, &c, 64, 3).unwrap();
                assert!(rep.ok, "failures: {:?}", rep.failures);
            }
            other => panic!("expected certificate, got {:?}", other),
        }
    }

    #[test]
    fn arnk_infeasible_when_target_unreachable() {
        // The walk never refutes: expected reaching time is infinite.
        let src = "
            x := 5;
            {0 <= x and x <= 9}
            while x >= 1 do
                {1 <= x and x <= 9}
                x := x - 1;
                {0 <= x and x <= 8}
                refute (x >= 10)
            od
        ";
        let p = parse(src, Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        let s = synthesize(&g, &CertKind::ARnk, 1).unwrap();
        assert!(matches!(s.result, SynthResult::NoCertificate { .. }));
    }

    #[test]
    fn eps_rep_refutes_divergent_countdown() {
        // x drifts down forever from 5; the target x >= 10 is never reached.
        let src = "
            x := 5;
            {x <= 5}
            while true do
                {x <= 5}
                x := x - 1;
                {x <= 4}
                refute (x >= 10)
            od
        ";
        let p = parse(src, Mode::App).unwrap();
        let g = lower_to_pcfg(&p).unwrap();
        assert!(validate_pcfg(&g).is_empty(), "{:?}", validate_pcfg(&g));
        let s = synthesize(&g, &CertKind::EpsRep { eps: rint(1) }, 1).unwrap();
        match s.result {
            SynthResult::Found(c) => {
                assert!(c.eta_init.is_negative());
                assert!(c.kappa.is_some(), "kappa should be finite here");
                let rep = check_certificate(&g, &c, 64, 5).unwrap();
                assert!(rep.ok, "failures: {:?}", rep.failures);
            }
            other => panic!("expected refuting certificate, got {:?}", other),
        }
    }
}
