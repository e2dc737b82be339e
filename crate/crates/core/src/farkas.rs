//! Farkas-lemma reduction: turns universally quantified linear implications
//! into an exact linear program over the template unknowns plus fresh
//! nonnegative multipliers.
//!
//! For an implication `a_1 >= 0 and ... and a_m >= 0  =>  psi >= 0` with a
//! nonempty antecedent polyhedron, validity is equivalent to the existence of
//! multipliers `y_0, ..., y_m >= 0` with `psi = y_0 + sum(y_i * a_i)` as
//! polynomial identity: one equality row per program variable and one
//! inequality for the constant part. Strict antecedent constraints are
//! relaxed to non-strict before the transformation; implications whose
//! antecedent is empty are vacuously true and dropped (logged).

use num_traits::Zero;
use thiserror::Error;

use crate::expr::{ConjPredicate, Predicate};
use crate::simplex::{simplex_solve, LpProblem, LpStatus, Rel, Sense};
use crate::template::{AffU, Implication};
use crate::{rint, Rat};

#[derive(Debug, Error)]
pub enum FarkasError {
    #[error("nonlinear implication not supported by the LP path: {0}")]
    Nonlinear(String),
}

/// Result of searching a predicate for a satisfying point.
#[derive(Debug, Clone, PartialEq)]
pub enum SatResult {
    Point(Vec<Rat>),
    Empty,
    /// Emptiness could not be decided (nonlinear constraints).
    Unknown,
}

/// Satisfiability of a single conjunction over `nvars` variables, strictness
/// respected: strict constraints are handled by maximizing a shared slack; a
/// zero optimum means the closure is nonempty but the strict set is not.
pub fn sat_point_conj(conj: &ConjPredicate<Rat>, nvars: usize) -> SatResult {
    if conj.iter().any(|c| !c.lhs.is_linear()) {
        return SatResult::Unknown;
    }
    let mut lp = LpProblem::new(Sense::Maximize);
    for i in 0..nvars {
        lp.add_var(format!("x{}", i), false);
    }
    let slack = lp.add_var("s", true);
    let mut any_strict = false;
    for c in conj {
        let (coeffs, konst) = c.lhs.linear_parts().expect("linear checked above");
        let mut row: Vec<(usize, Rat)> = coeffs
            .into_iter()
            .map(|(v, c)| (v as usize, c))
            .collect();
        if c.strict {
            any_strict = true;
            row.push((slack, rint(-1)));
        }
        lp.add_row(row, Rel::Ge, -konst, "");
    }
    // Cap the slack so the LP stays bounded.
    lp.add_row(vec![(slack, rint(1))], Rel::Le, rint(1), "");
    lp.objective = vec![(slack, rint(1))];
    let sol = simplex_solve(&lp);
    match sol.status {
        LpStatus::Infeasible => SatResult::Empty,
        LpStatus::Unbounded => unreachable!("slack is capped"),
        LpStatus::Optimal => {
            if any_strict && sol.assignment[slack].is_zero() {
                SatResult::Empty
            } else {
                SatResult::Point(sol.assignment[..nvars].to_vec())
            }
        }
    }
}

/// Satisfiability of a DNF predicate: the first satisfiable disjunct wins.
pub fn sat_point(p: &Predicate<Rat>, nvars: usize) -> SatResult {
    let mut saw_unknown = false;
    for d in &p.disjuncts {
        match sat_point_conj(d, nvars) {
            SatResult::Point(pt) => return SatResult::Point(pt),
            SatResult::Empty => {}
            SatResult::Unknown => saw_unknown = true,
        }
    }
    if saw_unknown {
        SatResult::Unknown
    } else {
        SatResult::Empty
    }
}

/// Output of the Farkas transformation.
pub struct FarkasLp {
    pub lp: LpProblem<Rat>,
    /// Notes about implications dropped for having empty antecedents.
    pub dropped: Vec<String>,
    /// Notes about implications kept conservatively because emptiness could
    /// not be decided.
    pub warnings: Vec<String>,
}

/// Builds the LP over `n_unknowns` free unknowns plus one multiplier per kept
/// antecedent constraint. `objective` is the template value at the initial
/// configuration (affine in the unknowns).
pub fn farkas_transform(
    imps: &[Implication],
    n_unknowns: usize,
    nvars: usize,
    objective: &AffU,
    sense: Sense,
) -> Result<FarkasLp, FarkasError> {
    let mut lp = LpProblem::new(sense);
    for u in 0..n_unknowns {
        lp.add_var(format!("u{}", u), false);
    }
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for (ii, imp) in imps.iter().enumerate() {
        if !imp.consequent.is_linear() {
            return Err(FarkasError::Nonlinear(imp.note.clone()));
        }
        let relaxed: ConjPredicate<Rat> = imp.antecedent.iter().map(|c| c.relaxed()).collect();
        if relaxed.iter().any(|c| !c.lhs.is_linear()) {
            return Err(FarkasError::Nonlinear(imp.note.clone()));
        }
        match sat_point_conj(&relaxed, nvars) {
            SatResult::Empty => {
                dropped.push(format!("dropped (empty antecedent): {}", imp.note));
                continue;
            }
            SatResult::Unknown => {
                warnings.push(format!("kept (emptiness undecided): {}", imp.note));
            }
            SatResult::Point(_) => {}
        }
        // Multipliers for this implication.
        let ys: Vec<usize> = (0..relaxed.len())
            .map(|k| lp.add_var(format!("y{}_{}", ii, k), true))
            .collect();
        let parts: Vec<(std::collections::BTreeMap<crate::expr::Var, Rat>, Rat)> = relaxed
            .iter()
            .map(|c| c.lhs.linear_parts().expect("linear"))
            .collect();
        // Consequent split: psi = sum_v psi_v * x_v + psi_c, each affine in U.
        let mut psi_vars: Vec<AffU> = vec![AffU::zero(); nvars];
        let mut psi_const = AffU::zero();
        for (m, a) in &imp.consequent.terms {
            match m.powers() {
                [] => psi_const = psi_const.add(a),
                [(v, 1)] => psi_vars[*v as usize] = psi_vars[*v as usize].add(a),
                _ => return Err(FarkasError::Nonlinear(imp.note.clone())),
            }
        }
        // Coefficient identity per variable: sum_i y_i * coeff(a_i, v) = psi_v.
        for v in 0..nvars {
            let mut row: Vec<(usize, Rat)> = Vec::new();
            for (i, (coeffs, _)) in parts.iter().enumerate() {
                if let Some(c) = coeffs.get(&(v as u32)) {
                    if !c.is_zero() {
                        row.push((ys[i], c.clone()));
                    }
                }
            }
            for (u, c) in &psi_vars[v].terms {
                row.push((*u as usize, -c.clone()));
            }
            let rhs = psi_vars[v].konst.clone();
            if row.is_empty() && rhs.is_zero() {
                continue;
            }
            lp.add_row(row, Rel::Eq, rhs, format!("{} var x{}", imp.note, v));
        }
        // Constant slack: psi_c - sum_i y_i * const(a_i) >= 0.
        let mut row: Vec<(usize, Rat)> = Vec::new();
        for (u, c) in &psi_const.terms {
            row.push((*u as usize, c.clone()));
        }
        for (i, (_, konst)) in parts.iter().enumerate() {
            if !konst.is_zero() {
                row.push((ys[i], -konst.clone()));
            }
        }
        lp.add_row(row, Rel::Ge, -psi_const.konst.clone(), format!("{} const", imp.note));
    }
    lp.objective = objective
        .terms
        .iter()
        .map(|(u, c)| (*u as usize, c.clone()))
        .collect();
    lp.obj_const = objective.konst.clone();
    Ok(FarkasLp {
        lp,
        dropped,
        warnings,
    })
}

/// Samples up to `count` rational points satisfying `conj` (strictness
/// respected). Used by soundness-sampling tests and the certificate checker.
/// Points come from a satisfying LP point, the vertices of the syntactic
/// bounding box, and rejection sampling inside that box.
pub fn sample_points_in_conj(
    conj: &ConjPredicate<Rat>,
    nvars: usize,
    count: usize,
    seed: u64,
) -> Vec<Vec<Rat>> {
    use rand::{Rng, SeedableRng};
    let mut out: Vec<Vec<Rat>> = Vec::new();
    let holds = |pt: &[Rat]| -> bool {
        conj.iter().all(|c| c.holds_at(pt).unwrap_or(false))
    };
    if let SatResult::Point(pt) = sat_point_conj(conj, nvars) {
        if holds(&pt) {
            out.push(pt);
        }
    }
    // Syntactic per-variable bounds from single-variable constraints.
    let mut lo = vec![rint(-100); nvars];
    let mut hi = vec![rint(100); nvars];
    for c in conj {
        if let Some((coeffs, konst)) = c.lhs.linear_parts() {
            if coeffs.len() == 1 {
                let (&v, cv) = coeffs.iter().next().unwrap();
                let bound = -konst / cv.clone();
                let v = v as usize;
                if cv > &Rat::zero() {
                    if bound > lo[v] {
                        lo[v] = bound;
                    }
                } else if bound < hi[v] {
                    hi[v] = bound;
                }
            }
        }
    }
    for v in 0..nvars {
        if lo[v] > hi[v] {
            // Box is inconsistent with the default bounds; widen around the
            // constrained value.
            let mid = lo[v].clone();
            hi[v] = mid.clone() + rint(1);
            lo[v] = mid - rint(1);
        }
    }
    // Box vertices that satisfy the conjunction.
    if nvars <= 10 {
        for mask in 0u32..(1 << nvars) {
            if out.len() >= count {
                break;
            }
            let pt: Vec<Rat> = (0..nvars)
                .map(|v| {
                    if mask & (1 << v) != 0 {
                        hi[v].clone()
                    } else {
                        lo[v].clone()
                    }
                })
                .collect();
            if holds(&pt) && !out.contains(&pt) {
                out.push(pt);
            }
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut tries = 0usize;
    while out.len() < count && tries < count * 60 {
        tries += 1;
        let pt: Vec<Rat> = (0..nvars)
            .map(|v| {
                let span = hi[v].clone() - lo[v].clone();
                // random numerator over denominator 16 within [lo, hi]
                let steps: i64 = 16;
                let k: i64 = rng.gen_range(0..=steps);
                lo[v].clone() + span * Rat::new(k.into(), steps.into())
            })
            .collect();
        if holds(&pt) {
            out.push(pt);
        }
    }
    out
}
