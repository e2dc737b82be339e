//! Exact two-phase simplex over an arbitrary ordered field scalar.
//!
//! Solving proceeds in two tiers. A floating-point presolve runs the simplex
//! over `f64` to locate a candidate optimal basis quickly; that basis is then
//! verified in exact arithmetic (basic solution nonnegative, reduced costs
//! nonpositive), which certifies true optimality independently of any float
//! rounding. When the presolve fails to produce a verifiable basis, or
//! reports infeasibility or unboundedness, the solver falls back to a full
//! exact simplex with Bland's rule, so every reported optimum, infeasibility
//! and unboundedness verdict is exact.

use std::fmt;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
    Feasibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LpRow<T> {
    pub coeffs: Vec<(usize, T)>,
    pub rel: Rel,
    pub rhs: T,
    /// Optional provenance note carried into debug dumps.
    pub note: String,
}

/// A linear program over declared variables. Variables marked `nonneg` carry
/// an implicit `x >= 0` bound; others are free and get split internally.
#[derive(Debug, Clone)]
pub struct LpProblem<T> {
    pub names: Vec<String>,
    pub nonneg: Vec<bool>,
    pub rows: Vec<LpRow<T>>,
    pub objective: Vec<(usize, T)>,
    pub obj_const: T,
    pub sense: Sense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// One value per declared variable (meaningful when `Optimal`).
    pub assignment: Vec<T>,
    /// Objective value including the constant offset.
    pub objective: T,
    /// One dual multiplier per row (sign convention: for a maximization in
    /// standard form, `y` satisfies `A^T y >= c` on nonnegative columns with
    /// `b^T y` equal to the optimum).
    pub duals: Vec<T>,
    pub pivots: usize,
}

/// Scalars the two-tier solver accepts: anything exact-comparable that also
/// maps into `f64` for the presolve.
pub trait SimplexScalar: Scalar {
    fn approx(&self) -> f64;
    /// Slack admitted in sign tests; zero for exact scalars.
    fn cmp_tol() -> Self;
}

impl SimplexScalar for crate::Rat {
    fn approx(&self) -> f64 {
        crate::scalar::rat_to_f64(self)
    }
    fn cmp_tol() -> Self {
        use num_traits::Zero;
        crate::Rat::zero()
    }
}

impl SimplexScalar for f64 {
    fn approx(&self) -> f64 {
        *self
    }
    fn cmp_tol() -> Self {
        1e-9
    }
}

impl<T: Scalar> LpProblem<T> {
    pub fn new(sense: Sense) -> Self {
        LpProblem {
            names: Vec::new(),
            nonneg: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            obj_const: T::zero(),
            sense,
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, nonneg: bool) -> usize {
        self.names.push(name.into());
        self.nonneg.push(nonneg);
        self.names.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, T)>, rel: Rel, rhs: T, note: impl Into<String>) {
        self.rows.push(LpRow {
            coeffs,
            rel,
            rhs,
            note: note.into(),
        });
    }

    /// Plain-text dump for debugging.
    pub fn dump(&self) -> String
    where
        T: fmt::Display,
    {
        let term = |coeffs: &[(usize, T)]| {
            if coeffs.is_empty() {
                "0".to_string()
            } else {
                coeffs
                    .iter()
                    .map(|(i, c)| format!("{}*{}", c, self.names[*i]))
                    .collect::<Vec<_>>()
                    .join(" + ")
            }
        };
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} + {}\n",
            match self.sense {
                Sense::Minimize => "minimize",
                Sense::Maximize => "maximize",
                Sense::Feasibility => "feasibility;",
            },
            term(&self.objective),
            self.obj_const
        ));
        for r in &self.rows {
            let rel = match r.rel {
                Rel::Le => "<=",
                Rel::Ge => ">=",
                Rel::Eq => "=",
            };
            out.push_str(&format!("  {} {} {}", term(&r.coeffs), rel, r.rhs));
            if !r.note.is_empty() {
                out.push_str(&format!("   ; {}", r.note));
            }
            out.push('\n');
        }
        for (i, n) in self.names.iter().enumerate() {
            if self.nonneg[i] {
                out.push_str(&format!("  {} >= 0\n", n));
            }
        }
        out
    }
}

/// Column layout and normalized rows shared by both solver tiers. The layout
/// is purely structural (it depends on `nonneg`, the relations, and the signs
/// of the right-hand sides), so the exact problem and its float mirror agree.
struct Prepared<T> {
    /// Per declared variable: its column, plus the negated twin for free vars.
    col_of_var: Vec<(usize, Option<usize>)>,
    nstruct: usize,
    ncols: usize,
    /// Structural coefficients per row, rhs normalized to be nonnegative.
    dense: Vec<Vec<T>>,
    rels: Vec<Rel>,
    rhss: Vec<T>,
    row_flipped: Vec<bool>,
    slack_col: Vec<Option<usize>>,
    art_col: Vec<Option<usize>>,
}

fn prepare<T: Scalar>(p: &LpProblem<T>) -> Prepared<T> {
    let nvars = p.names.len();
    let mut col_of_var: Vec<(usize, Option<usize>)> = Vec::with_capacity(nvars);
    let mut ncols = 0usize;
    for i in 0..nvars {
        if p.nonneg[i] {
            col_of_var.push((ncols, None));
            ncols += 1;
        } else {
            col_of_var.push((ncols, Some(ncols + 1)));
            ncols += 2;
        }
    }
    let nstruct = ncols;
    let m = p.rows.len();

    let mut dense: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut rels: Vec<Rel> = Vec::with_capacity(m);
    let mut rhss: Vec<T> = Vec::with_capacity(m);
    let mut row_flipped: Vec<bool> = Vec::with_capacity(m);
    for row in &p.rows {
        let mut a = vec![T::zero(); nstruct];
        for (i, c) in &row.coeffs {
            let (cp, cm) = col_of_var[*i];
            a[cp] = a[cp].clone() + c.clone();
            if let Some(cm) = cm {
                a[cm] = a[cm].clone() - c.clone();
            }
        }
        let mut rel = row.rel;
        let mut rhs = row.rhs.clone();
        let mut flipped = false;
        if rhs < T::zero() {
            for x in a.iter_mut() {
                if !x.is_zero() {
                    *x = T::zero() - x.clone();
                }
            }
            rhs = T::zero() - rhs;
            rel = match rel {
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
                Rel::Eq => Rel::Eq,
            };
            flipped = true;
        }
        dense.push(a);
        rels.push(rel);
        rhss.push(rhs);
        row_flipped.push(flipped);
    }

    let mut slack_col: Vec<Option<usize>> = vec![None; m];
    for r in 0..m {
        match rels[r] {
            Rel::Le | Rel::Ge => {
                slack_col[r] = Some(ncols);
                ncols += 1;
            }
            Rel::Eq => {}
        }
    }
    let mut art_col: Vec<Option<usize>> = vec![None; m];
    for r in 0..m {
        match rels[r] {
            Rel::Ge | Rel::Eq => {
                art_col[r] = Some(ncols);
                ncols += 1;
            }
            Rel::Le => {}
        }
    }

    Prepared {
        col_of_var,
        nstruct,
        ncols,
        dense,
        rels,
        rhss,
        row_flipped,
        slack_col,
        art_col,
    }
}

impl<T: Scalar> Prepared<T> {
    /// Entry of the full constraint matrix at (row, column).
    fn entry(&self, r: usize, c: usize) -> T {
        if c < self.nstruct {
            return self.dense[r][c].clone();
        }
        if self.slack_col[r] == Some(c) {
            return match self.rels[r] {
                Rel::Le => T::one(),
                Rel::Ge => T::zero() - T::one(),
                Rel::Eq => unreachable!(),
            };
        }
        if self.art_col[r] == Some(c) {
            return T::one();
        }
        T::zero()
    }

    fn is_artificial(&self, c: usize) -> bool {
        self.art_col.iter().flatten().any(|&a| a == c)
    }

    /// Phase-2 cost per column, oriented for maximization.
    fn max_cost(&self, p: &LpProblem<T>) -> Vec<T> {
        let mut cost = vec![T::zero(); self.ncols];
        if p.sense == Sense::Feasibility {
            return cost;
        }
        for (i, c) in &p.objective {
            let signc = match p.sense {
                Sense::Maximize | Sense::Feasibility => c.clone(),
                Sense::Minimize => T::zero() - c.clone(),
            };
            let (cp, cm) = self.col_of_var[*i];
            cost[cp] = cost[cp].clone() + signc.clone();
            if let Some(cm) = cm {
                cost[cm] = cost[cm].clone() - signc;
            }
        }
        cost
    }
}

struct Tableau<T> {
    /// rows[r] has `ncols` coefficients followed by the rhs at index ncols.
    rows: Vec<Vec<T>>,
    ncols: usize,
    basis: Vec<usize>,
    /// Objective row in reduced form: costs then negated objective value.
    obj: Vec<T>,
    /// Membership mask over `basis`; a basic column must never re-enter (its
    /// reduced cost is zero exactly, but float drift can make it positive).
    in_basis: Vec<bool>,
    /// Consecutive degenerate pivots seen; drives the rule switch below.
    stall: usize,
    /// Sticky switch to Bland's rule after a long degenerate run.
    bland_mode: bool,
}

enum RunOutcome {
    Optimal,
    Unbounded,
    /// Pivot budget exhausted (float tier only).
    Budget,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c].clone();
        if !piv.is_one() {
            for x in self.rows[r].iter_mut() {
                if !x.is_zero() {
                    *x = x.clone() / piv.clone();
                }
            }
        }
        let pivot_row = self.rows[r].clone();
        for rr in 0..self.rows.len() {
            if rr == r {
                continue;
            }
            let factor = self.rows[rr][c].clone();
            if factor.is_zero() {
                continue;
            }
            for k in 0..=self.ncols {
                if !pivot_row[k].is_zero() {
                    self.rows[rr][k] =
                        self.rows[rr][k].clone() - factor.clone() * pivot_row[k].clone();
                }
            }
        }
        let factor = self.obj[c].clone();
        if !factor.is_zero() {
            for k in 0..=self.ncols {
                if !pivot_row[k].is_zero() {
                    self.obj[k] = self.obj[k].clone() - factor.clone() * pivot_row[k].clone();
                }
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.in_basis[c] = true;
        self.basis[r] = c;
    }

    /// Runs simplex maximizing the current objective row. Columns for which
    /// `eligible` is false never enter the basis. `tol` widens the sign tests
    /// for inexact scalars. The entering rule starts as Dantzig (largest
    /// reduced cost) when `self.bland_mode` is false and switches to Bland's
    /// rule for good after a long degenerate run.
    fn run(
        &mut self,
        eligible: &[bool],
        pivots: &mut usize,
        tol: &T,
        budget: usize,
    ) -> RunOutcome {
        // Consecutive degenerate pivots before switching to Bland's rule for
        // good; Dantzig makes fast progress but can thrash on degenerate
        // plateaus.
        let stall_cap = 4 * (self.rows.len() + self.ncols).max(16);
        let mut spent = 0usize;
        loop {
            if spent >= budget {
                return RunOutcome::Budget;
            }
            let mut entering = None;
            if !self.bland_mode {
                for c in 0..self.ncols {
                    if eligible[c] && !self.in_basis[c] && self.obj[c] > *tol {
                        let better = match entering {
                            None => true,
                            Some(b) => self.obj[c] > self.obj[b],
                        };
                        if better {
                            entering = Some(c);
                        }
                    }
                }
            } else {
                // Bland: smallest-index column with positive reduced cost.
                for c in 0..self.ncols {
                    if eligible[c] && !self.in_basis[c] && self.obj[c] > *tol {
                        entering = Some(c);
                        break;
                    }
                }
            }
            let Some(c) = entering else {
                return RunOutcome::Optimal;
            };
            // Ratio test. Exact tier: Bland tie-break on basis variable
            // index (anti-cycling). Float tier: among (near-)tied ratios pick
            // the largest pivot element, which keeps the basis well
            // conditioned instead of amplifying round-off through tiny
            // pivots.
            let exact = tol.is_zero();
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][c].clone();
                if a > *tol {
                    let ratio = self.rows[r][self.ncols].clone() / a;
                    let better = match &leave {
                        None => true,
                        Some((lr, lratio)) => {
                            if exact {
                                ratio < *lratio
                                    || (ratio == *lratio && self.basis[r] < self.basis[*lr])
                            } else {
                                let near = ratio.clone() - lratio.clone();
                                ratio < *lratio && near.abs() > *tol
                                    || near.abs() <= *tol
                                        && self.rows[r][c].abs() > self.rows[*lr][c].abs()
                            }
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return RunOutcome::Unbounded;
            };
            // A (near-)zero ratio leaves the objective unchanged: degenerate.
            if ratio <= *tol {
                self.stall += 1;
                if self.stall > stall_cap {
                    self.bland_mode = true;
                }
            } else {
                self.stall = 0;
            }
            self.pivot(r, c);
            *pivots += 1;
            spent += 1;
            if *pivots % 200 == 0 && std::env::var_os("MARTCERT_LP_TRACE").is_some() {
                eprintln!("lp trace: {} pivots, stall {}", pivots, self.stall);
            }
        }
    }
}

fn build_tableau<T: Scalar>(prep: &Prepared<T>) -> Tableau<T> {
    let m = prep.dense.len();
    let ncols = prep.ncols;
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut basis = vec![0usize; m];
    for r in 0..m {
        let mut row = vec![T::zero(); ncols + 1];
        for (c, v) in prep.dense[r].iter().enumerate() {
            row[c] = v.clone();
        }
        if let Some(sc) = prep.slack_col[r] {
            row[sc] = match prep.rels[r] {
                Rel::Le => T::one(),
                Rel::Ge => T::zero() - T::one(),
                Rel::Eq => unreachable!(),
            };
        }
        if let Some(ac) = prep.art_col[r] {
            row[ac] = T::one();
            basis[r] = ac;
        } else {
            basis[r] = prep.slack_col[r].expect("Le row has a slack");
        }
        row[ncols] = prep.rhss[r].clone();
        rows.push(row);
    }
    let mut in_basis = vec![false; ncols];
    for &b in &basis {
        in_basis[b] = true;
    }
    Tableau {
        rows,
        ncols,
        basis,
        obj: vec![T::zero(); ncols + 1],
        in_basis,
        stall: 0,
        bland_mode: false,
    }
}

/// Rebuilds the tableau from the original data for the current basis,
/// discarding accumulated round-off (float tier only). `cost` is the current
/// phase's cost per column, maximization orientation. Returns false when the
/// basis matrix is numerically singular.
fn refresh_tableau<T: Scalar>(prep: &Prepared<T>, cost: &[T], tab: &mut Tableau<T>) -> bool {
    let m = prep.dense.len();
    let ncols = prep.ncols;
    // Invert the basis matrix by Gauss-Jordan with partial pivoting.
    let mut aug: Vec<Vec<T>> = (0..m)
        .map(|r| {
            let mut row: Vec<T> = (0..m).map(|i| prep.entry(r, tab.basis[i])).collect();
            row.extend((0..m).map(|k| if k == r { T::one() } else { T::zero() }));
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| {
                aug[i][col]
                    .abs()
                    .partial_cmp(&aug[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        // Also rejects NaN from float overflow along the way.
        if !(aug[piv][col].abs() > T::zero()) {
            if std::env::var_os("MARTCERT_LP_TRACE").is_some() {
                eprintln!(
                    "lp refresh: zero pivot at column {} of {} (basis col {:?})",
                    col,
                    m,
                    tab.basis.get(col)
                );
            }
            return false;
        }
        aug.swap(col, piv);
        let d = aug[col][col].clone();
        for k in 0..2 * m {
            if !aug[col][k].is_zero() {
                aug[col][k] = aug[col][k].clone() / d.clone();
            }
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = aug[r][col].clone();
            if f.is_zero() {
                continue;
            }
            for k in 0..2 * m {
                if !aug[col][k].is_zero() {
                    aug[r][k] = aug[r][k].clone() - f.clone() * aug[col][k].clone();
                }
            }
        }
    }
    let inv: Vec<&[T]> = aug.iter().map(|r| &r[m..]).collect();

    // Row-identity columns touch a single row; map them for sparse access.
    let mut owner: Vec<Option<(usize, bool)>> = vec![None; ncols];
    for r in 0..m {
        if let Some(c) = prep.slack_col[r] {
            owner[c] = Some((r, matches!(prep.rels[r], Rel::Le)));
        }
        if let Some(c) = prep.art_col[r] {
            owner[c] = Some((r, true));
        }
    }

    // rows = B^-1 A, rhs = B^-1 b.
    for r in 0..m {
        let mut row = vec![T::zero(); ncols + 1];
        for (j, cell) in row.iter_mut().enumerate().take(prep.nstruct) {
            let mut acc = T::zero();
            for k in 0..m {
                if !inv[r][k].is_zero() && !prep.dense[k][j].is_zero() {
                    acc = acc + inv[r][k].clone() * prep.dense[k][j].clone();
                }
            }
            *cell = acc;
        }
        for j in prep.nstruct..ncols {
            let (k, pos) = owner[j].expect("non-structural column has an owner row");
            row[j] = if pos {
                inv[r][k].clone()
            } else {
                T::zero() - inv[r][k].clone()
            };
        }
        let mut acc = T::zero();
        for k in 0..m {
            if !inv[r][k].is_zero() {
                acc = acc + inv[r][k].clone() * prep.rhss[k].clone();
            }
        }
        row[ncols] = acc;
        tab.rows[r] = row;
    }

    // y = B^-T c_B, then reduced costs c - y^T A.
    let y: Vec<T> = (0..m)
        .map(|k| {
            let mut acc = T::zero();
            for r in 0..m {
                let cb = &cost[tab.basis[r]];
                if !cb.is_zero() && !inv[r][k].is_zero() {
                    acc = acc + inv[r][k].clone() * cb.clone();
                }
            }
            acc
        })
        .collect();
    for j in 0..ncols {
        let mut acc = cost[j].clone();
        if j < prep.nstruct {
            for (k, yk) in y.iter().enumerate() {
                if !yk.is_zero() && !prep.dense[k][j].is_zero() {
                    acc = acc - yk.clone() * prep.dense[k][j].clone();
                }
            }
        } else {
            let (k, pos) = owner[j].expect("non-structural column has an owner row");
            if pos {
                acc = acc - y[k].clone();
            } else {
                acc = acc + y[k].clone();
            }
        }
        tab.obj[j] = acc;
    }
    let mut acc = T::zero();
    for (k, yk) in y.iter().enumerate() {
        if !yk.is_zero() {
            acc = acc - yk.clone() * prep.rhss[k].clone();
        }
    }
    tab.obj[ncols] = acc;
    true
}

/// Runs one phase to a verdict. With `refreshable` (float tier) the run is
/// chunked: the tableau is rebuilt from original data between chunks, and a
/// verdict only stands when reproduced on a freshly rebuilt tableau, which
/// prevents drift-induced false optima and false unbounded rays.
#[allow(clippy::too_many_arguments)]
fn drive<T: Scalar>(
    tab: &mut Tableau<T>,
    prep: &Prepared<T>,
    cost: &[T],
    eligible: &[bool],
    pivots: &mut usize,
    tol: &T,
    budget: usize,
    refreshable: bool,
) -> RunOutcome {
    if !refreshable {
        return tab.run(eligible, pivots, tol, budget);
    }
    let chunk = 512usize;
    let mut spent = 0usize;
    let mut fresh = false;
    loop {
        let before = *pivots;
        let out = tab.run(eligible, pivots, tol, chunk.min(budget - spent));
        spent += *pivots - before;
        if *pivots != before {
            fresh = false;
        }
        let trace = std::env::var_os("MARTCERT_LP_TRACE").is_some();
        match out {
            RunOutcome::Budget => {
                if spent >= budget {
                    if trace {
                        eprintln!("lp drive: budget {} exhausted ({} rows, {} cols)", budget, prep.dense.len(), prep.ncols);
                    }
                    return RunOutcome::Budget;
                }
                if !refresh_tableau(prep, cost, tab) {
                    if trace {
                        eprintln!("lp drive: refresh failed, basis singular");
                    }
                    return RunOutcome::Budget;
                }
                fresh = true;
            }
            verdict => {
                if fresh {
                    return verdict;
                }
                if !refresh_tableau(prep, cost, tab) {
                    if trace {
                        eprintln!("lp drive: refresh failed, basis singular");
                    }
                    return RunOutcome::Budget;
                }
                fresh = true;
            }
        }
    }
}

enum TierResult {
    Infeasible,
    Unbounded,
    Budget,
}

/// Runs the two-phase simplex to completion on one scalar tier, returning the
/// final tableau on success.
fn run_two_phase<T: Scalar>(
    p: &LpProblem<T>,
    prep: &Prepared<T>,
    dantzig: bool,
    budget: usize,
    pivots: &mut usize,
    tol: T,
) -> Result<Tableau<T>, TierResult> {
    let m = prep.dense.len();
    let ncols = prep.ncols;
    let mut tab = build_tableau(prep);

    // Phase 1: maximize -(sum of artificials); reduced against the basis.
    let any_artificial = prep.art_col.iter().any(Option::is_some);
    if any_artificial {
        for c in 0..=ncols {
            tab.obj[c] = T::zero();
        }
        for r in 0..m {
            if prep.art_col[r].is_some() {
                for k in 0..=ncols {
                    if prep.is_artificial(k) {
                        continue;
                    }
                    tab.obj[k] = tab.obj[k].clone() + tab.rows[r][k].clone();
                }
            }
        }
        let eligible: Vec<bool> = (0..ncols).map(|c| !prep.is_artificial(c)).collect();
        let cost1: Vec<T> = (0..ncols)
            .map(|c| {
                if prep.is_artificial(c) {
                    T::zero() - T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        tab.stall = 0;
        tab.bland_mode = !dantzig;
        match drive(&mut tab, prep, &cost1, &eligible, pivots, &tol, budget, dantzig) {
            RunOutcome::Optimal => {}
            RunOutcome::Budget => return Err(TierResult::Budget),
            // Phase 1 is bounded by construction; treat as infeasible
            // defensively.
            RunOutcome::Unbounded => return Err(TierResult::Infeasible),
        }
        let mut infeas = T::zero();
        for r in 0..m {
            if prep.is_artificial(tab.basis[r]) {
                infeas = infeas + tab.rows[r][ncols].clone();
            }
        }
        if infeas > tol {
            return Err(TierResult::Infeasible);
        }
        // Drive remaining zero-valued artificials out of the basis. The
        // pivot entry must clear the sign tolerance: float residue of
        // magnitude ~1e-16 is a numerical zero and would wreck the basis.
        for r in 0..m {
            if prep.is_artificial(tab.basis[r]) {
                for c in 0..ncols {
                    if !prep.is_artificial(c) && !tab.in_basis[c] && tab.rows[r][c].abs() > tol {
                        tab.pivot(r, c);
                        *pivots += 1;
                        break;
                    }
                }
                // A redundant row keeps its artificial at value 0.
            }
        }
    }

    // Phase 2 objective: maximize (or negated minimize) the declared one.
    let cost = prep.max_cost(p);
    for c in 0..=ncols {
        tab.obj[c] = if c < ncols { cost[c].clone() } else { T::zero() };
    }
    for r in 0..m {
        let cb = if tab.basis[r] < ncols {
            cost[tab.basis[r]].clone()
        } else {
            T::zero()
        };
        if cb.is_zero() {
            continue;
        }
        for k in 0..=ncols {
            if !tab.rows[r][k].is_zero() {
                tab.obj[k] = tab.obj[k].clone() - cb.clone() * tab.rows[r][k].clone();
            }
        }
    }
    let eligible: Vec<bool> = (0..ncols).map(|c| !prep.is_artificial(c)).collect();
    tab.stall = 0;
    tab.bland_mode = !dantzig;
    match drive(&mut tab, prep, &cost, &eligible, pivots, &tol, budget, dantzig) {
        RunOutcome::Optimal => Ok(tab),
        RunOutcome::Budget => Err(TierResult::Budget),
        RunOutcome::Unbounded => Err(TierResult::Unbounded),
    }
}

/// Extracts the solution from a finished tableau (exact tier).
fn extract_solution<T: Scalar>(
    p: &LpProblem<T>,
    prep: &Prepared<T>,
    tab: &Tableau<T>,
    pivots: usize,
) -> LpSolution<T> {
    let nvars = p.names.len();
    let m = prep.dense.len();
    let ncols = prep.ncols;
    let mut colval = vec![T::zero(); ncols];
    for r in 0..m {
        colval[tab.basis[r]] = tab.rows[r][ncols].clone();
    }
    let mut assignment = Vec::with_capacity(nvars);
    for i in 0..nvars {
        let (cp, cm) = prep.col_of_var[i];
        let v = match cm {
            None => colval[cp].clone(),
            Some(cm) => colval[cp].clone() - colval[cm].clone(),
        };
        assignment.push(v);
    }
    let mut objective = p.obj_const.clone();
    for (i, c) in &p.objective {
        objective = objective + c.clone() * assignment[*i].clone();
    }

    // Duals from reduced costs of the row-identity columns. For row r with
    // generator column g (slack: +e_r or -e_r; artificial: +e_r) and zero
    // cost, reduced cost rc = -(sign) * y_r, in the maximization orientation.
    let mut duals = vec![T::zero(); m];
    for r in 0..m {
        let (g, sign_pos) = match (prep.art_col[r], prep.slack_col[r]) {
            (Some(a), _) => (a, true),
            (None, Some(s)) => (s, matches!(prep.rels[r], Rel::Le)),
            (None, None) => unreachable!(),
        };
        let rc = tab.obj[g].clone();
        let mut y = if sign_pos { T::zero() - rc } else { rc };
        if prep.row_flipped[r] {
            y = T::zero() - y;
        }
        if p.sense == Sense::Minimize {
            y = T::zero() - y;
        }
        duals[r] = y;
    }

    LpSolution {
        status: LpStatus::Optimal,
        assignment,
        objective,
        duals,
        pivots,
    }
}

fn status_solution<T: Scalar>(p: &LpProblem<T>, status: LpStatus, pivots: usize) -> LpSolution<T> {
    LpSolution {
        status,
        assignment: vec![T::zero(); p.names.len()],
        objective: T::zero(),
        duals: vec![T::zero(); p.rows.len()],
        pivots,
    }
}

/// Gaussian elimination; solves `a x = b` exactly, `None` when singular.
fn solve_linear<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        // Prefer a unit pivot: basis matrices are mostly slack columns and
        // this keeps the elimination sparse and the rationals small.
        let mut pr = None;
        for r in col..n {
            if !a[perm[r]][col].is_zero() {
                if a[perm[r]][col].is_one() {
                    pr = Some(r);
                    break;
                }
                if pr.is_none() {
                    pr = Some(r);
                }
            }
        }
        let pr = pr?;
        perm.swap(col, pr);
        let prow = perm[col];
        let piv = a[prow][col].clone();
        for r in (col + 1)..n {
            let rr = perm[r];
            if a[rr][col].is_zero() {
                continue;
            }
            let f = a[rr][col].clone() / piv.clone();
            for k in col..n {
                if !a[prow][k].is_zero() {
                    a[rr][k] = a[rr][k].clone() - f.clone() * a[prow][k].clone();
                }
            }
            b[rr] = b[rr].clone() - f * b[prow].clone();
        }
    }
    let mut x = vec![T::zero(); n];
    for col in (0..n).rev() {
        let prow = perm[col];
        let mut acc = b[prow].clone();
        for k in (col + 1)..n {
            if !a[prow][k].is_zero() {
                acc = acc - a[prow][k].clone() * x[k].clone();
            }
        }
        x[col] = acc / a[prow][col].clone();
    }
    Some(x)
}

/// Verifies a candidate basis in exact arithmetic and, on success, returns
/// the certified optimal solution.
fn verify_basis<T: Scalar>(
    p: &LpProblem<T>,
    prep: &Prepared<T>,
    basis: &[usize],
    pivots: usize,
) -> Option<LpSolution<T>> {
    let m = prep.dense.len();
    if basis.len() != m {
        return None;
    }
    let mut seen = vec![false; prep.ncols];
    for &c in basis {
        if c >= prep.ncols || seen[c] {
            return None;
        }
        seen[c] = true;
    }

    // B x_B = b.
    let bmat: Vec<Vec<T>> = (0..m)
        .map(|r| basis.iter().map(|&c| prep.entry(r, c)).collect())
        .collect();
    let xb = solve_linear(bmat.clone(), prep.rhss.clone())?;
    for (i, &c) in basis.iter().enumerate() {
        if xb[i] < T::zero() {
            return None;
        }
        // A basic artificial must sit at level zero or the point is not
        // feasible for the original constraints.
        if prep.is_artificial(c) && !xb[i].is_zero() {
            return None;
        }
    }

    // B^T y = c_B, then reduced costs of all non-artificial nonbasic columns.
    let cost = prep.max_cost(p);
    let cb: Vec<T> = basis.iter().map(|&c| cost[c].clone()).collect();
    let bt: Vec<Vec<T>> = (0..m).map(|r| (0..m).map(|k| bmat[k][r].clone()).collect()).collect();
    let y = solve_linear(bt, cb)?;
    for c in 0..prep.ncols {
        if seen[c] || prep.is_artificial(c) {
            continue;
        }
        let mut rc = cost[c].clone();
        for r in 0..m {
            if !y[r].is_zero() {
                let a = prep.entry(r, c);
                if !a.is_zero() {
                    rc = rc - y[r].clone() * a;
                }
            }
        }
        if rc > T::zero() {
            return None;
        }
    }

    // Certified optimal: assemble the solution directly.
    let nvars = p.names.len();
    let mut colval = vec![T::zero(); prep.ncols];
    for (i, &c) in basis.iter().enumerate() {
        colval[c] = xb[i].clone();
    }
    let mut assignment = Vec::with_capacity(nvars);
    for i in 0..nvars {
        let (cp, cm) = prep.col_of_var[i];
        let v = match cm {
            None => colval[cp].clone(),
            Some(cm) => colval[cp].clone() - colval[cm].clone(),
        };
        assignment.push(v);
    }
    let mut objective = p.obj_const.clone();
    for (i, c) in &p.objective {
        objective = objective + c.clone() * assignment[*i].clone();
    }
    let mut duals = Vec::with_capacity(m);
    for r in 0..m {
        let mut yv = y[r].clone();
        if prep.row_flipped[r] {
            yv = T::zero() - yv;
        }
        if p.sense == Sense::Minimize {
            yv = T::zero() - yv;
        }
        duals.push(yv);
    }
    Some(LpSolution {
        status: LpStatus::Optimal,
        assignment,
        objective,
        duals,
        pivots,
    })
}

/// Float tier: runs the simplex over an `f64` mirror and hands back the final
/// basis for exact verification.
fn float_presolve<T: SimplexScalar>(p: &LpProblem<T>) -> Option<LpSolution<T>> {
    let pf = LpProblem::<f64> {
        names: Vec::new(),
        nonneg: p.nonneg.clone(),
        rows: p
            .rows
            .iter()
            .map(|r| LpRow {
                coeffs: r.coeffs.iter().map(|(i, c)| (*i, c.approx())).collect(),
                rel: r.rel,
                rhs: r.rhs.approx(),
                note: String::new(),
            })
            .collect(),
        objective: p.objective.iter().map(|(i, c)| (*i, c.approx())).collect(),
        obj_const: 0.0,
        sense: p.sense,
    };
    // Names are only used for dumps; mirror the count for index safety.
    let mut pf = pf;
    pf.names = vec![String::new(); p.names.len()];

    let prep_f = prepare(&pf);
    let prep = prepare(p);
    // The layouts must agree or the basis indices are meaningless; they can
    // disagree only if a right-hand side flips sign under rounding.
    if prep_f.ncols != prep.ncols || prep_f.rels != prep.rels {
        return None;
    }

    let trace = std::env::var_os("MARTCERT_LP_TRACE").is_some();
    let mut pivots = 0usize;
    // Backstop against float-tier cycling (Bland's guarantee needs exact
    // arithmetic); the exact tier takes over when this runs out.
    let budget = 20 * (prep.dense.len() + prep.ncols) + 2_000;
    let tab = match run_two_phase(&pf, &prep_f, true, budget, &mut pivots, f64::cmp_tol()) {
        Ok(t) => t,
        Err(e) => {
            if trace {
                let why = match e {
                    TierResult::Infeasible => "float tier infeasible",
                    TierResult::Unbounded => "float tier unbounded",
                    TierResult::Budget => "float tier budget exhausted",
                };
                eprintln!("lp presolve: {} after {} pivots", why, pivots);
            }
            return None;
        }
    };
    let out = verify_basis(p, &prep, &tab.basis, pivots);
    if trace {
        match &out {
            Some(_) => eprintln!("lp presolve: basis verified after {} float pivots", pivots),
            None => eprintln!("lp presolve: basis rejected after {} float pivots", pivots),
        }
    }
    out
}

/// Solves the program exactly. See [`LpSolution`] for the result contract.
pub fn simplex_solve<T: SimplexScalar>(p: &LpProblem<T>) -> LpSolution<T> {
    if let Some(sol) = float_presolve(p) {
        return sol;
    }
    // Exact tier: Bland's rule end to end, no budget.
    let prep = prepare(p);
    let mut pivots = 0usize;
    match run_two_phase(p, &prep, false, usize::MAX, &mut pivots, T::cmp_tol()) {
        Ok(tab) => extract_solution(p, &prep, &tab, pivots),
        Err(TierResult::Infeasible) => status_solution(p, LpStatus::Infeasible, pivots),
        Err(TierResult::Unbounded) => status_solution(p, LpStatus::Unbounded, pivots),
        Err(TierResult::Budget) => unreachable!("exact tier has no budget"),
        
    }
}
