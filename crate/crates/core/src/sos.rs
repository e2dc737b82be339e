//! Sum-of-squares reduction for polynomial implications.
//!
//! Each implication `g_1 >= 0 /\ ... /\ g_m >= 0  =>  f >= 0` (with `f`
//! affine in the scalar unknowns) is certified by a family of Gram matrices
//! `H_w`, one per subset `w` of the antecedent literals, through the identity
//!
//! ```text
//! f  =  sum_w (y^T H_w y) * prod_{i: w_i = 1} g_i
//! ```
//!
//! where `y` is the vector of monomials up to the SOS degree. Matching the
//! coefficient of every monomial gives linear equality constraints tying the
//! Gram entries to the scalar unknowns; requiring each `H_w` positive
//! semidefinite yields a semidefinite program.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::expr::Monomial;
use crate::scalar::rat_to_f64;
use crate::sdpa::SdpaFile;
use crate::template::{AffU, Implication};
use crate::{Rat, RatPoly};

#[derive(Debug, Error)]
pub enum SosError {
    #[error("implication `{note}` has {m} antecedent literals; 2^{m} Gram blocks exceed the cap of 2^{cap} (raise it explicitly if intended)")]
    TooManyLiterals { note: String, m: usize, cap: usize },
    #[error("SOS degree {k} too small: the consequent of `{note}` has degree {deg}, minimum feasible degree is {min_k}")]
    DegreeTooSmall {
        note: String,
        k: u32,
        deg: u32,
        min_k: u32,
    },
}

/// Assembled SDP in the primal form `min <C,X>` s.t. `<A_r,X> = b_r`,
/// `X >= 0` block-diagonal. All data exact rational until export.
#[derive(Debug)]
pub struct SdpProblem {
    /// Block sizes, negative for diagonal blocks. The first `2 * n_unknowns`
    /// blocks are the 1x1 split halves of the scalar unknowns
    /// (`u = u+ - u-`), in unknown order.
    pub blocks: Vec<i64>,
    pub block_labels: Vec<String>,
    pub n_unknowns: usize,
    /// Right-hand sides of the equality rows.
    pub rhs: Vec<Rat>,
    pub row_labels: Vec<String>,
    /// `(row, block, i, j, value)`; row 0 is the objective matrix `C`,
    /// rows 1..=rhs.len() are the equalities. 1-based block and entry
    /// indices, `i <= j`.
    pub entries: Vec<(usize, usize, usize, usize, Rat)>,
    /// The exported problem always minimizes; when the original objective was
    /// a maximization this flag says the reported optimum must be negated.
    pub negated_objective: bool,
    pub obj_const: Rat,
}

impl SdpProblem {
    pub fn to_sdpa(&self) -> SdpaFile {
        SdpaFile {
            m: self.rhs.len(),
            blocks: self.blocks.clone(),
            bvec: self.rhs.iter().map(rat_to_f64).collect(),
            entries: self
                .entries
                .iter()
                .map(|(r, b, i, j, v)| (*r, *b, *i, *j, rat_to_f64(v)))
                .collect(),
        }
    }
}

/// The smallest SOS degree that can reproduce the implication's consequent:
/// half the consequent degree, rounded up, plus room for the antecedent
/// products.
pub fn default_sos_degree(imps: &[Implication]) -> u32 {
    let mut k = 1;
    for imp in imps {
        let cdeg = imp.consequent.degree();
        let adeg = imp
            .antecedent
            .iter()
            .map(|c| c.lhs.degree())
            .max()
            .unwrap_or(0);
        k = k.max((cdeg + adeg).div_ceil(2));
    }
    k
}

struct RowBuilder {
    /// monomial -> row index (per implication).
    index: BTreeMap<Monomial, usize>,
    rhs: Vec<Rat>,
    labels: Vec<String>,
    entries: Vec<(usize, usize, usize, usize, Rat)>,
}

impl RowBuilder {
    fn row(&mut self, mono: &Monomial, note: &str) -> usize {
        if let Some(&r) = self.index.get(mono) {
            return r;
        }
        let r = self.rhs.len();
        self.index.insert(mono.clone(), r);
        self.rhs.push(Rat::zero());
        self.labels.push(format!("{} [{}]", note, render_mono(mono)));
        r
    }

    fn add(&mut self, row: usize, block: usize, i: usize, j: usize, v: Rat) {
        if v.is_zero() {
            return;
        }
        // Accumulate duplicates so every (row, block, i, j) is unique.
        if let Some(e) = self
            .entries
            .iter_mut()
            .find(|e| e.0 == row && e.1 == block && e.2 == i && e.3 == j)
        {
            e.4 = e.4.clone() + v;
            if e.4.is_zero() {
                let pos = self
                    .entries
                    .iter()
                    .position(|e| e.0 == row && e.1 == block && e.2 == i && e.3 == j)
                    .unwrap();
                self.entries.remove(pos);
            }
            return;
        }
        self.entries.push((row, block, i, j, v));
    }
}

fn render_mono(m: &Monomial) -> String {
    if m.is_unit() {
        "1".to_string()
    } else {
        m.powers()
            .iter()
            .map(|(v, e)| format!("x{}^{}", v, e))
            .collect::<Vec<_>>()
            .join("*")
    }
}

/// Builds the SDP for the implication set. `objective` is affine in the
/// scalar unknowns; `maximize` selects the optimization direction (the
/// exported problem is always a minimization, see `negated_objective`).
pub fn schmudgen_transform(
    imps: &[Implication],
    n_unknowns: usize,
    nvars: usize,
    sos_degree: u32,
    block_cap_log2: usize,
    objective: &AffU,
    maximize: bool,
) -> Result<SdpProblem, SosError> {
    for imp in imps {
        let m = imp.antecedent.len();
        if m > block_cap_log2 {
            return Err(SosError::TooManyLiterals {
                note: imp.note.clone(),
                m,
                cap: block_cap_log2,
            });
        }
        let deg = imp.consequent.degree();
        if 2 * sos_degree < deg {
            return Err(SosError::DegreeTooSmall {
                note: imp.note.clone(),
                k: sos_degree,
                deg,
                min_k: deg.div_ceil(2),
            });
        }
    }

    let vars: Vec<u32> = (0..nvars as u32).collect();
    let basis = Monomial::all_up_to_degree(&vars, sos_degree);

    let mut blocks: Vec<i64> = Vec::new();
    let mut block_labels: Vec<String> = Vec::new();
    // Scalar unknowns first: u = u+ - u- as 1x1 diagonal blocks.
    for u in 0..n_unknowns {
        blocks.push(-1);
        block_labels.push(format!("u{}+", u));
        blocks.push(-1);
        block_labels.push(format!("u{}-", u));
    }
    let u_blocks = |u: u32| -> (usize, usize) {
        // 1-based SDPA block indices.
        (2 * u as usize + 1, 2 * u as usize + 2)
    };

    let mut rb = RowBuilder {
        index: BTreeMap::new(),
        rhs: Vec::new(),
        labels: Vec::new(),
        entries: Vec::new(),
    };
    let mut all_rhs: Vec<Rat> = Vec::new();
    let mut all_labels: Vec<String> = Vec::new();
    let mut all_entries: Vec<(usize, usize, usize, usize, Rat)> = Vec::new();

    for imp in imps {
        rb.index.clear();
        rb.rhs.clear();
        rb.labels.clear();
        rb.entries.clear();
        let lits: Vec<RatPoly> = imp.antecedent.iter().map(|c| c.lhs.clone()).collect();
        let m = lits.len();
        for w in 0..(1usize << m) {
            let mut prod = RatPoly::constant(Rat::one());
            for (i, g) in lits.iter().enumerate() {
                if w & (1 << i) != 0 {
                    prod = prod.mul(g);
                }
            }
            let block = blocks.len() + 1; // 1-based
            blocks.push(basis.len() as i64);
            block_labels.push(format!("{} w={:0width$b}", imp.note, w, width = m.max(1)));
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    // X is symmetric; the off-diagonal pair contributes twice.
                    let mult = if i == j { Rat::one() } else { Rat::from_integer(2.into()) };
                    let mono = basis[i].mul(&basis[j]);
                    let term = prod.clone().mul(&RatPoly::monomial(mono, Rat::one()));
                    for (alpha, coef) in term.terms() {
                        let row = rb.row(alpha, &imp.note);
                        rb.add(row, block, i + 1, j + 1, mult.clone() * coef.clone());
                    }
                }
            }
        }
        // Consequent side: move the unknown part to the left.
        for (alpha, aff) in &imp.consequent.terms {
            let row = rb.row(alpha, &imp.note);
            rb.rhs[row] = rb.rhs[row].clone() + aff.konst.clone();
            for (u, cu) in &aff.terms {
                let (bp, bm) = u_blocks(*u);
                rb.add(row, bp, 1, 1, -cu.clone());
                rb.add(row, bm, 1, 1, cu.clone());
            }
        }
        // Splice this implication's rows into the global numbering.
        let base = all_rhs.len();
        all_rhs.extend(rb.rhs.drain(..));
        all_labels.extend(rb.labels.drain(..));
        all_entries.extend(
            rb.entries
                .drain(..)
                .map(|(r, b, i, j, v)| (base + r + 1, b, i, j, v)),
        );
    }

    // Objective matrix C (row 0).
    let mut entries = Vec::new();
    for (u, cu) in &objective.terms {
        let c = if maximize { -cu.clone() } else { cu.clone() };
        let (bp, bm) = u_blocks(*u);
        entries.push((0usize, bp, 1usize, 1usize, c.clone()));
        entries.push((0usize, bm, 1usize, 1usize, -c));
    }
    entries.extend(all_entries);

    Ok(SdpProblem {
        blocks,
        block_labels,
        n_unknowns,
        rhs: all_rhs,
        row_labels: all_labels,
        entries,
        negated_objective: maximize,
        obj_const: objective.konst.clone(),
    })
}

/// Evaluates all equality rows at a candidate assignment (Gram entries given
/// per block as dense symmetric matrices, unknowns as scalars) and returns
/// the largest absolute residual. Used by tests and by re-validation of
/// external solutions.
pub fn residual(
    p: &SdpProblem,
    grams: &BTreeMap<usize, Vec<Vec<Rat>>>,
    u_vals: &[Rat],
) -> Rat {
    let mut res: Vec<Rat> = p.rhs.iter().map(|b| -b.clone()).collect();
    for (r, b, i, j, v) in &p.entries {
        if *r == 0 {
            continue;
        }
        let x = if *b <= 2 * p.n_unknowns {
            // Scalar split blocks: u+ holds max(u,0), u- holds max(-u,0).
            let u = (b - 1) / 2;
            let plus = (b - 1) % 2 == 0;
            let val = u_vals[u].clone();
            if plus {
                if val > Rat::zero() { val } else { Rat::zero() }
            } else if val < Rat::zero() {
                -val
            } else {
                Rat::zero()
            }
        } else if let Some(gram) = grams.get(b) {
            gram[*i - 1][*j - 1].clone()
        } else {
            Rat::zero()
        };
        res[*r - 1] = res[*r - 1].clone() + v.clone() * x;
    }
    res.into_iter()
        .map(|r| if r < Rat::zero() { -r } else { r })
        .fold(Rat::zero(), |a, b| if b > a { b } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::LinConstraint;
    use crate::template::UPoly;
    use crate::{rat, rint};

    fn poly_imp(antecedent: Vec<RatPoly>, consequent: RatPoly, note: &str) -> Implication {
        Implication {
            antecedent: antecedent.into_iter().map(LinConstraint::ge).collect(),
            consequent: UPoly::from_poly(&consequent),
            note: note.to_string(),
        }
    }

    #[test]
    fn perfect_square_rows_accept_the_known_gram() {
        // x^2 + 2x + 1 = (x+1)^2: basis {1, x}, Gram [[1,1],[1,1]].
        let x = RatPoly::var(0);
        let f = x.mul(&x).add(&x.scale(&rint(2))).add(&RatPoly::constant(rint(1)));
        let imps = vec![poly_imp(Vec::new(), f, "square")];
        let p = schmudgen_transform(&imps, 0, 1, 1, 4, &AffU::zero(), false).unwrap();
        assert_eq!(p.blocks, vec![2]); // single Gram block over {1, x}
        assert_eq!(p.rhs.len(), 3); // monomials 1, x, x^2
        let mut grams = BTreeMap::new();
        grams.insert(1usize, vec![vec![rint(1), rint(1)], vec![rint(1), rint(1)]]);
        assert_eq!(residual(&p, &grams, &[]), rint(0));
        // A wrong Gram leaves a nonzero residual.
        grams.insert(1usize, vec![vec![rint(1), rint(0)], vec![rint(0), rint(1)]]);
        assert!(residual(&p, &grams, &[]) > rint(0));
    }

    #[test]
    fn block_census_is_two_to_the_m() {
        let x = RatPoly::var(0);
        let g1 = x.clone(); // x >= 0
        let g2 = RatPoly::constant(rint(1)).sub(&x); // 1 - x >= 0
        let imps = vec![poly_imp(vec![g1, g2], x.mul(&x), "boxed")];
        let p = schmudgen_transform(&imps, 0, 1, 1, 4, &AffU::zero(), false).unwrap();
        assert_eq!(p.blocks.len(), 4); // 2^2 Gram blocks, no scalar unknowns
    }

    #[test]
    fn unknowns_get_split_scalar_blocks() {
        let f = UPoly::constant(AffU::unknown(0));
        let imps = vec![Implication {
            antecedent: Vec::new(),
            consequent: f,
            note: "u nonneg".into(),
        }];
        let obj = AffU::unknown(0);
        let p = schmudgen_transform(&imps, 1, 1, 1, 4, &obj, false).unwrap();
        assert_eq!(&p.blocks[..2], &[-1, -1]);
        // Objective touches both split halves with opposite signs.
        let c: Vec<_> = p.entries.iter().filter(|e| e.0 == 0).collect();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].4.clone() + c[1].4.clone(), rint(0));
    }

    #[test]
    fn degree_too_small_is_reported() {
        let x = RatPoly::var(0);
        let quartic = x.mul(&x).mul(&x).mul(&x);
        let imps = vec![poly_imp(Vec::new(), quartic, "deg4")];
        let err = schmudgen_transform(&imps, 0, 1, 1, 4, &AffU::zero(), false).unwrap_err();
        match err {
            SosError::DegreeTooSmall { min_k, .. } => assert_eq!(min_k, 2),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn literal_cap_is_enforced() {
        let x = RatPoly::var(0);
        let lits = vec![x.clone(), x.clone(), x.clone()];
        let imps = vec![poly_imp(lits, x.clone(), "many")];
        let err = schmudgen_transform(&imps, 0, 1, 1, 2, &AffU::zero(), false).unwrap_err();
        assert!(matches!(err, SosError::TooManyLiterals { .. }));
    }

    #[test]
    fn export_round_trips() {
        let x = RatPoly::var(0);
        let f = x.mul(&x).add(&RatPoly::constant(rat(1, 3)));
        let imps = vec![poly_imp(vec![x.clone()], f, "third")];
        let p = schmudgen_transform(&imps, 0, 1, 1, 4, &AffU::zero(), false).unwrap();
        let file = p.to_sdpa();
        let text = crate::sdpa::render_sdpa(&file);
        let back = crate::sdpa::parse_sdpa(&text).unwrap();
        assert_eq!(file, back);
        assert_eq!(crate::sdpa::render_sdpa(&back), text);
    }
}
