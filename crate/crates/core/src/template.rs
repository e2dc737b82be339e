//! Certificate templates with unknown coefficients and the generation of the
//! universally quantified implications whose satisfiability characterizes
//! each certificate kind.
//!
//! A template assigns to every location a polynomial over the program
//! variables whose coefficients are fresh unknowns. Applying the one-step
//! pre-operator symbolically and splitting over invariant disjuncts, negated
//! target literals and branch cases yields implications
//!
//! ```text
//! (conjunction of constraints over program vars)  =>  (expr affine in the unknowns) >= 0
//! ```
//!
//! which the LP engine discharges via Farkas' lemma (linear case) or the SDP
//! engine via a sum-of-squares relaxation (polynomial case).

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::expr::{ConjPredicate, LinConstraint, Monomial, Var};
use crate::pcfg::{LocId, LocKind, Pcfg, UpdateKind};
use crate::scalar::rat_to_str;
use crate::{Rat, RatPoly};

/// Affine form over the unknown coefficients: `sum(c_u * u) + konst`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AffU {
    pub terms: BTreeMap<u32, Rat>,
    pub konst: Rat,
}

impl AffU {
    pub fn zero() -> Self {
        AffU::default()
    }

    pub fn constant(k: Rat) -> Self {
        AffU {
            terms: BTreeMap::new(),
            konst: k,
        }
    }

    pub fn unknown(u: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(u, Rat::one());
        AffU {
            terms,
            konst: Rat::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.konst.is_zero() && self.terms.values().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (u, c) in &other.terms {
            let e = out.terms.entry(*u).or_insert_with(Rat::zero);
            *e = e.clone() + c.clone();
            if e.is_zero() {
                out.terms.remove(u);
            }
        }
        out.konst = out.konst + other.konst.clone();
        out
    }

    pub fn neg(&self) -> Self {
        AffU {
            terms: self.terms.iter().map(|(u, c)| (*u, -c.clone())).collect(),
            konst: -self.konst.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &Rat) -> Self {
        if k.is_zero() {
            return AffU::zero();
        }
        AffU {
            terms: self
                .terms
                .iter()
                .map(|(u, c)| (*u, c.clone() * k.clone()))
                .collect(),
            konst: self.konst.clone() * k.clone(),
        }
    }

    /// Instantiates the unknowns.
    pub fn eval(&self, u_vals: &[Rat]) -> Rat {
        let mut out = self.konst.clone();
        for (u, c) in &self.terms {
            out = out + c.clone() * u_vals[*u as usize].clone();
        }
        out
    }
}

/// Polynomial over program variables whose coefficients are affine in the
/// unknowns. Zero coefficients are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UPoly {
    pub terms: BTreeMap<Monomial, AffU>,
}

impl UPoly {
    pub fn zero() -> Self {
        UPoly::default()
    }

    pub fn constant(k: AffU) -> Self {
        let mut out = UPoly::zero();
        out.add_term(Monomial::unit(), k);
        out
    }

    pub fn from_poly(p: &RatPoly) -> Self {
        let mut out = UPoly::zero();
        for (m, c) in p.terms() {
            out.add_term(m.clone(), AffU::constant(c.clone()));
        }
        out
    }

    pub fn add_term(&mut self, m: Monomial, a: AffU) {
        if a.is_zero() {
            return;
        }
        let e = self.terms.entry(m.clone()).or_insert_with(AffU::zero);
        *e = e.add(&a);
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, a) in &other.terms {
            out.add_term(m.clone(), a.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, a) in &other.terms {
            out.add_term(m.clone(), a.neg());
        }
        out
    }

    pub fn scale(&self, k: &Rat) -> Self {
        let mut out = UPoly::zero();
        for (m, a) in &self.terms {
            out.add_term(m.clone(), a.scale(k));
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn is_linear(&self) -> bool {
        self.degree() <= 1
    }

    /// Substitutes a concrete (unknown-free) polynomial for variable `v`.
    pub fn substitute(&self, v: Var, by: &RatPoly) -> Self {
        let mut out = UPoly::zero();
        for (m, a) in &self.terms {
            let e = m.exponent_of(v);
            if e == 0 {
                out.add_term(m.clone(), a.clone());
            } else {
                let rest = m.without(v);
                for (bm, bc) in by.pow(e).terms() {
                    out.add_term(rest.mul(bm), a.scale(bc));
                }
            }
        }
        out
    }

    /// Replaces `v^k` by the k-th raw moment of `dist`: the expectation of
    /// the polynomial when `v` is freshly sampled (independence of the sample
    /// from the other variables makes this exact).
    pub fn expect_over(&self, v: Var, dist: &crate::pcfg::DistDescriptor) -> Self {
        let mut out = UPoly::zero();
        for (m, a) in &self.terms {
            let e = m.exponent_of(v);
            if e == 0 {
                out.add_term(m.clone(), a.clone());
            } else {
                out.add_term(m.without(v), a.scale(&dist.moment(e)));
            }
        }
        out
    }

    /// Evaluates all program variables, leaving an affine form in the unknowns.
    pub fn eval_point(&self, vals: &[Rat]) -> AffU {
        let mut out = AffU::zero();
        for (m, a) in &self.terms {
            let mut factor = Rat::one();
            for &(v, e) in m.powers() {
                for _ in 0..e {
                    factor = factor * vals[v as usize].clone();
                }
            }
            out = out.add(&a.scale(&factor));
        }
        out
    }

    /// Instantiates the unknowns, producing a concrete polynomial.
    pub fn instantiate(&self, u_vals: &[Rat]) -> RatPoly {
        let mut out = RatPoly::zero();
        for (m, a) in &self.terms {
            out.add_term(m.clone(), a.eval(u_vals));
        }
        out
    }

    pub fn render(&self, var_names: &[String], unknown_names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (m, a) in self.terms.iter().rev() {
            let mono: Vec<String> = m
                .powers()
                .iter()
                .map(|&(v, e)| {
                    let n = &var_names[v as usize];
                    if e == 1 {
                        n.clone()
                    } else {
                        format!("{}^{}", n, e)
                    }
                })
                .collect();
            let mut coeff_parts: Vec<String> = a
                .terms
                .iter()
                .map(|(u, c)| {
                    if c.is_one() {
                        unknown_names[*u as usize].clone()
                    } else {
                        format!("{}*{}", rat_to_str(c), unknown_names[*u as usize])
                    }
                })
                .collect();
            if !a.konst.is_zero() || coeff_parts.is_empty() {
                coeff_parts.push(rat_to_str(&a.konst));
            }
            let coeff = if coeff_parts.len() == 1 {
                coeff_parts.pop().unwrap()
            } else {
                format!("({})", coeff_parts.join(" + "))
            };
            if mono.is_empty() {
                parts.push(coeff);
            } else {
                parts.push(format!("{}*{}", coeff, mono.join("*")));
            }
        }
        parts.join(" + ")
    }
}

/// Per-location template with one unknown per monomial.
#[derive(Debug, Clone)]
pub struct Template {
    pub exprs: Vec<UPoly>,
    /// Provenance of each unknown: (location, monomial).
    pub unknowns: Vec<(LocId, Monomial)>,
    pub degree: u32,
}

impl Template {
    /// Builds the degree-`d` template over the program variables of `g`.
    pub fn new(g: &Pcfg, d: u32) -> Template {
        let vars: Vec<Var> = (0..g.vars.len() as Var).collect();
        let monomials = Monomial::all_up_to_degree(&vars, d);
        let mut exprs = Vec::with_capacity(g.n_locs());
        let mut unknowns = Vec::new();
        for l in 0..g.n_locs() {
            let mut e = UPoly::zero();
            for m in &monomials {
                let id = unknowns.len() as u32;
                unknowns.push((l, m.clone()));
                e.add_term(m.clone(), AffU::unknown(id));
            }
            exprs.push(e);
        }
        Template {
            exprs,
            unknowns,
            degree: d,
        }
    }

    pub fn n_unknowns(&self) -> usize {
        self.unknowns.len()
    }

    /// Debug names for the unknowns: `a_<loc>_<idx>`.
    pub fn unknown_names(&self) -> Vec<String> {
        self.unknowns
            .iter()
            .enumerate()
            .map(|(i, (l, _))| format!("a{}_{}", l, i))
            .collect()
    }

    /// The affine form of the template value at the initial configuration.
    pub fn at_init(&self, g: &Pcfg) -> AffU {
        self.exprs[g.init_loc].eval_point(&g.init_vals)
    }

    /// Instantiates every location's expression from an unknown assignment.
    pub fn instantiate(&self, u_vals: &[Rat]) -> crate::expr::ExpressionMap<Rat> {
        crate::expr::ExpressionMap {
            by_location: self.exprs.iter().map(|e| e.instantiate(u_vals)).collect(),
        }
    }
}

/// Certificate kind together with its scalar parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum CertKind {
    /// Nonnegative repulsing supermartingale at level M (upper reach bound).
    NNRep { level: Rat },
    /// γ-scaled submartingale (lower reach bound), γ in (0,1).
    SclSub { gamma: Rat },
    /// Additive ranking supermartingale (upper expected-steps bound).
    ARnk,
    /// ε-repulsing supermartingale (refutation via concentration), ε > 0.
    EpsRep { eps: Rat },
}

impl CertKind {
    pub fn name(&self) -> &'static str {
        match self {
            CertKind::NNRep { .. } => "nnrep",
            CertKind::SclSub { .. } => "sclsub",
            CertKind::ARnk => "arnk",
            CertKind::EpsRep { .. } => "eps-rep",
        }
    }

    /// Upper-style certificates universally bound every branch from above;
    /// the lower-style SclSub bounds every branch from below.
    pub fn is_upper(&self) -> bool {
        !matches!(self, CertKind::SclSub { .. })
    }
}

/// One universally quantified constraint fed to the LP/SDP engines.
#[derive(Debug, Clone)]
pub struct Implication {
    /// Conjunction over program variables (strictness kept; relaxed later).
    pub antecedent: ConjPredicate<Rat>,
    /// Asserted `>= 0`; affine in the unknowns.
    pub consequent: UPoly,
    pub note: String,
}

impl Implication {
    pub fn render(&self, g: &Pcfg, t: &Template) -> String {
        let names = g.all_var_names();
        let ante = if self.antecedent.is_empty() {
            "true".to_string()
        } else {
            self.antecedent
                .iter()
                .map(|c| crate::expr::render_constraint(c, &names))
                .collect::<Vec<_>>()
                .join(" and ")
        };
        format!(
            "{} => {} >= 0   ; {}",
            ante,
            self.consequent.render(&names, &t.unknown_names()),
            self.note
        )
    }
}

/// One case of the symbolic pre-operator at a location: the template value
/// after the step, plus constraints the case assumes (guard disjunct or
/// nondeterministic-domain disjunct over the fresh variable).
#[derive(Debug, Clone)]
pub struct Branch {
    pub extra: ConjPredicate<Rat>,
    pub expr: UPoly,
    pub succ: LocId,
    pub label: String,
}

/// Enumerates the branch cases of the pre-operator at `l` applied to the
/// template. Both pre directions produce the same case list: for an upper
/// certificate the caller asserts the location's value dominates every case
/// (max/sup over nondeterminism), for a lower certificate that every case
/// dominates it (min/inf); either way the quantifier is universal.
pub fn pre_branches(g: &Pcfg, t: &Template, l: LocId) -> Vec<Branch> {
    match g.kinds[l] {
        LocKind::Nondet => g.succs[l]
            .iter()
            .map(|&s| Branch {
                extra: Vec::new(),
                expr: t.exprs[s].clone(),
                succ: s,
                label: format!("nondet->{}", g.loc_names[s]),
            })
            .collect(),
        LocKind::Prob => {
            let mut e = UPoly::zero();
            for (s, p) in &g.probs[&l] {
                e = e.add(&t.exprs[*s].scale(p));
            }
            vec![Branch {
                extra: Vec::new(),
                expr: e,
                succ: g.succs[l][0],
                label: "prob".into(),
            }]
        }
        LocKind::Det => {
            let mut out = Vec::new();
            for &s in &g.succs[l] {
                let guard = &g.guards[&(l, s)];
                for (di, d) in guard.disjuncts.iter().enumerate() {
                    out.push(Branch {
                        extra: d.clone(),
                        expr: t.exprs[s].clone(),
                        succ: s,
                        label: format!("guard[{}]->{}", di, g.loc_names[s]),
                    });
                }
            }
            out
        }
        LocKind::Assign => {
            let (v, up) = &g.updates[&l];
            let s = g.succs[l][0];
            match up {
                UpdateKind::Det(e) => vec![Branch {
                    extra: Vec::new(),
                    expr: t.exprs[s].substitute(*v, e),
                    succ: s,
                    label: "assign".into(),
                }],
                UpdateKind::Dist(d) => vec![Branch {
                    extra: Vec::new(),
                    expr: t.exprs[s].expect_over(*v, d),
                    succ: s,
                    label: "sample".into(),
                }],
                UpdateKind::Ndet(dom) => {
                    let fresh = g.fresh_var();
                    let renamed = t.exprs[s].substitute(*v, &RatPoly::var(fresh));
                    dom.disjuncts
                        .iter()
                        .enumerate()
                        .map(|(di, d)| Branch {
                            extra: d.clone(),
                            expr: renamed.clone(),
                            succ: s,
                            label: format!("ndet[{}]", di),
                        })
                        .collect()
                }
            }
        }
    }
}

/// Literal-wise complement of a conjunctive target predicate. The union of
/// `invariant and (negated literal)` over the returned list covers the part
/// of the invariant outside the target. An empty input conjunction (the whole
/// space) yields an empty cover.
pub fn negate_target_literals(c: &ConjPredicate<Rat>) -> Vec<LinConstraint<Rat>> {
    c.iter().map(|l| l.negate()).collect()
}

/// Assembles the implication set whose solutions (over the unknowns) are
/// exactly the certificates of the requested kind.
pub fn gen_implications(g: &Pcfg, t: &Template, kind: &CertKind) -> Vec<Implication> {
    let mut out = Vec::new();
    let one = UPoly::constant(AffU::constant(Rat::one()));
    for l in 0..g.n_locs() {
        let lname = &g.loc_names[l];
        let inv = &g.invariant[l];
        // Nonnegativity / boundedness on the invariant.
        for (di, d) in inv.disjuncts.iter().enumerate() {
            let (expr, tag) = match kind {
                CertKind::NNRep { .. } | CertKind::ARnk => {
                    (t.exprs[l].clone(), "nonneg")
                }
                CertKind::SclSub { .. } => (one.sub(&t.exprs[l]), "bounded-by-1"),
                CertKind::EpsRep { .. } => continue,
            };
            out.push(Implication {
                antecedent: d.clone(),
                consequent: expr,
                note: format!("A1 {} inv[{}] {}", lname, di, tag),
            });
        }
        // Value on the target set.
        if let Some(c) = &g.target[l] {
            match kind {
                CertKind::NNRep { level } => out.push(Implication {
                    antecedent: c.clone(),
                    consequent: t.exprs[l].sub(&UPoly::constant(AffU::constant(level.clone()))),
                    note: format!("A2 {} target level", lname),
                }),
                CertKind::EpsRep { .. } => out.push(Implication {
                    antecedent: c.clone(),
                    consequent: t.exprs[l].clone(),
                    note: format!("A2 {} target nonneg", lname),
                }),
                CertKind::SclSub { .. } | CertKind::ARnk => {}
            }
        }
        // One-step condition outside the target.
        let neg_lits: Vec<Option<LinConstraint<Rat>>> = match &g.target[l] {
            None => vec![None],
            Some(c) => {
                if c.is_empty() {
                    Vec::new() // target covers the location entirely
                } else {
                    negate_target_literals(c).into_iter().map(Some).collect()
                }
            }
        };
        if neg_lits.is_empty() {
            continue;
        }
        let branches = pre_branches(g, t, l);
        for (di, d) in inv.disjuncts.iter().enumerate() {
            for (ni, nl) in neg_lits.iter().enumerate() {
                for b in &branches {
                    let mut ante = d.clone();
                    if let Some(nl) = nl {
                        ante.push(nl.clone());
                    }
                    ante.extend(b.extra.clone());
                    let consequent = match kind {
                        CertKind::NNRep { .. } => t.exprs[l].sub(&b.expr),
                        CertKind::ARnk => t.exprs[l].sub(&b.expr).sub(&one),
                        CertKind::EpsRep { eps } => t.exprs[l]
                            .sub(&b.expr)
                            .sub(&UPoly::constant(AffU::constant(eps.clone()))),
                        CertKind::SclSub { gamma } => b.expr.scale(gamma).sub(&t.exprs[l]),
                    };
                    out.push(Implication {
                        antecedent: ante,
                        consequent,
                        note: format!(
                            "A3 {} inv[{}] notgt[{}] {}",
                            lname, di, ni, b.label
                        ),
                    });
                }
            }
        }
    }
    out
}
