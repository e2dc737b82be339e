//! Symbolic polynomial expressions, linear constraints, predicates and
//! per-location maps, generic over the coefficient scalar.
//!
//! Variables are small integer ids; the owning context (a program or pCFG)
//! keeps the id-to-name table. Monomials are kept in graded lexicographic
//! order so printed forms are canonical.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

/// Variable identifier; index into the owning context's name table.
pub type Var = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("unbound variable x{0}")]
    Unbound(Var),
}

/// A power product of variables. Factors are sorted by variable id and carry
/// exponents >= 1; the empty product is the constant monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn unit() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_powers(mut powers: Vec<(Var, u32)>) -> Self {
        powers.retain(|&(_, e)| e > 0);
        powers.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(Var, u32)> = Vec::with_capacity(powers.len());
        for (v, e) in powers {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += e,
                _ => out.push((v, e)),
            }
        }
        Monomial(out)
    }

    pub fn powers(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent_of(&self, v: Var) -> u32 {
        self.0
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut powers = self.0.clone();
        powers.extend_from_slice(&other.0);
        Monomial::from_powers(powers)
    }

    /// The monomial with variable `v` removed entirely.
    pub fn without(&self, v: Var) -> Monomial {
        Monomial(self.0.iter().copied().filter(|&(w, _)| w != v).collect())
    }

    /// All monomials over `vars` of total degree <= `d`, in ascending order.
    pub fn all_up_to_degree(vars: &[Var], d: u32) -> Vec<Monomial> {
        let mut acc = vec![Monomial::unit()];
        for _ in 0..d {
            let mut next: Vec<Monomial> = acc.clone();
            for m in acc.iter().filter(|m| m.degree() < d) {
                for &v in vars {
                    next.push(m.mul(&Monomial::var(v)));
                }
            }
            next.sort();
            next.dedup();
            acc = next;
        }
        acc.sort();
        acc.dedup();
        acc.retain(|m| m.degree() <= d);
        acc
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: first by total degree, ties broken
    /// lexicographically with lower variable ids weighing more.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let mut a = self.0.iter();
            let mut b = other.0.iter();
            loop {
                match (a.next(), b.next()) {
                    (None, None) => return std::cmp::Ordering::Equal,
                    (None, Some(_)) => return std::cmp::Ordering::Less,
                    (Some(_), None) => return std::cmp::Ordering::Greater,
                    (Some(&(va, ea)), Some(&(vb, eb))) => {
                        // Lower id first in the factor list; a lower id with a
                        // positive exponent dominates in lex order.
                        if va != vb {
                            return vb.cmp(&va);
                        }
                        if ea != eb {
                            return ea.cmp(&eb);
                        }
                    }
                }
            }
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial with scalar coefficients. Zero coefficients are
/// never stored; the zero polynomial has an empty term map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyExpr<T> {
    terms: BTreeMap<Monomial, T>,
}

impl<T: Scalar> PolyExpr<T> {
    pub fn zero() -> Self {
        PolyExpr {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: T) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::unit(), c);
        }
        PolyExpr { terms }
    }

    pub fn var(v: Var) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(v), T::one());
        PolyExpr { terms }
    }

    pub fn monomial(m: Monomial, c: T) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        PolyExpr { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &T)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> T {
        self.terms.get(m).cloned().unwrap_or_else(T::zero)
    }

    pub fn constant_part(&self) -> T {
        self.coeff(&Monomial::unit())
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn is_linear(&self) -> bool {
        self.degree() <= 1
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    /// Variables occurring with nonzero coefficient.
    pub fn vars(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self
            .terms
            .keys()
            .flat_map(|m| m.powers().iter().map(|&(v, _)| v))
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn add_term(&mut self, m: Monomial, c: T) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert_with(T::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        PolyExpr {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), T::zero() - c.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &T) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        PolyExpr {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.clone() * k.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(T::one());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Exact evaluation; `v` must bind every variable occurring in `self`.
    pub fn eval(&self, v: &dyn Fn(Var) -> Option<T>) -> Result<T, ExprError> {
        let mut total = T::zero();
        for (m, c) in &self.terms {
            let mut val = c.clone();
            for &(var, e) in m.powers() {
                let x = v(var).ok_or(ExprError::Unbound(var))?;
                for _ in 0..e {
                    val = val * x.clone();
                }
            }
            total = total + val;
        }
        Ok(total)
    }

    /// Evaluation against a dense valuation slice indexed by variable id.
    pub fn eval_slice(&self, vals: &[T]) -> Result<T, ExprError> {
        self.eval(&|v| vals.get(v as usize).cloned())
    }

    /// Replaces every occurrence of `var` by `by`, expanded and normalized.
    pub fn substitute(&self, var: Var, by: &Self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.exponent_of(var);
            if e == 0 {
                out.add_term(m.clone(), c.clone());
            } else {
                let rest = m.without(var);
                let replaced = by.pow(e).mul(&Self::monomial(rest, c.clone()));
                out = out.add(&replaced);
            }
        }
        out
    }

    /// Renames `var` to `to` (which must not already occur).
    pub fn rename(&self, var: Var, to: Var) -> Self {
        self.substitute(var, &Self::var(to))
    }

    /// Splits a linear polynomial into per-variable coefficients and constant.
    /// Returns `None` when the polynomial is not linear.
    pub fn linear_parts(&self) -> Option<(BTreeMap<Var, T>, T)> {
        if !self.is_linear() {
            return None;
        }
        let mut coeffs = BTreeMap::new();
        let mut konst = T::zero();
        for (m, c) in &self.terms {
            match m.powers() {
                [] => konst = c.clone(),
                [(v, 1)] => {
                    coeffs.insert(*v, c.clone());
                }
                _ => return None,
            }
        }
        Some((coeffs, konst))
    }

    /// Maps coefficients into another scalar type.
    pub fn map_coeffs<U: Scalar>(&self, f: &dyn Fn(&T) -> U) -> PolyExpr<U> {
        let mut out = PolyExpr::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Coefficients of `self` viewed as a univariate polynomial in `v`, after
    /// all other variables have been bound by `vals`. Index = power of `v`.
    pub fn univariate_in(&self, v: Var, vals: &[T]) -> Result<Vec<T>, ExprError> {
        let mut coeffs: Vec<T> = Vec::new();
        for (m, c) in &self.terms {
            let e = m.exponent_of(v) as usize;
            let rest = m.without(v);
            let part = Self::monomial(rest, c.clone())
                .eval(&|w| vals.get(w as usize).cloned())?;
            while coeffs.len() <= e {
                coeffs.push(T::zero());
            }
            coeffs[e] = coeffs[e].clone() + part;
        }
        if coeffs.is_empty() {
            coeffs.push(T::zero());
        }
        Ok(coeffs)
    }
}

/// Canonical textual rendering, e.g. `1/2*x1 + -3*x2 + 7`.
pub fn render_poly<T: Scalar + fmt::Display>(p: &PolyExpr<T>, names: &[String]) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut parts = Vec::new();
    // Descending graded-lex order: highest monomial first.
    for (m, c) in p.terms().collect::<Vec<_>>().into_iter().rev() {
        let mono = m
            .powers()
            .iter()
            .map(|&(v, e)| {
                let name = names
                    .get(v as usize)
                    .cloned()
                    .unwrap_or_else(|| format!("x{}", v));
                if e == 1 {
                    name
                } else {
                    format!("{}^{}", name, e)
                }
            })
            .collect::<Vec<_>>()
            .join("*");
        if mono.is_empty() {
            parts.push(format!("{}", c));
        } else if c.is_one() {
            parts.push(mono);
        } else {
            parts.push(format!("{}*{}", c, mono));
        }
    }
    parts.join(" + ")
}

/// A single constraint `lhs >= 0` (or `lhs > 0` when `strict`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinConstraint<T> {
    pub lhs: PolyExpr<T>,
    pub strict: bool,
}

impl<T: Scalar> LinConstraint<T> {
    pub fn ge(lhs: PolyExpr<T>) -> Self {
        LinConstraint { lhs, strict: false }
    }

    pub fn gt(lhs: PolyExpr<T>) -> Self {
        LinConstraint { lhs, strict: true }
    }

    /// Negation: not(a >= 0) is -a > 0, not(a > 0) is -a >= 0.
    pub fn negate(&self) -> Self {
        LinConstraint {
            lhs: self.lhs.neg(),
            strict: !self.strict,
        }
    }

    /// Same constraint with strictness dropped (the Farkas-side relaxation).
    pub fn relaxed(&self) -> Self {
        LinConstraint {
            lhs: self.lhs.clone(),
            strict: false,
        }
    }

    pub fn holds_at(&self, vals: &[T]) -> Result<bool, ExprError> {
        let v = self.lhs.eval_slice(vals)?;
        Ok(if self.strict {
            v > T::zero()
        } else {
            v >= T::zero()
        })
    }
}

pub fn render_constraint<T: Scalar + fmt::Display>(
    c: &LinConstraint<T>,
    names: &[String],
) -> String {
    format!(
        "{} {} 0",
        render_poly(&c.lhs, names),
        if c.strict { ">" } else { ">=" }
    )
}

/// Conjunction of constraints; the empty conjunction is `true`.
pub type ConjPredicate<T> = Vec<LinConstraint<T>>;

/// Disjunctive normal form predicate: union of conjunctions.
/// An empty disjunct list denotes the empty set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate<T> {
    pub disjuncts: Vec<ConjPredicate<T>>,
}

impl<T: Scalar> Predicate<T> {
    /// The whole space: one empty conjunction.
    pub fn top() -> Self {
        Predicate {
            disjuncts: vec![Vec::new()],
        }
    }

    /// The empty set: no disjuncts.
    pub fn bottom() -> Self {
        Predicate {
            disjuncts: Vec::new(),
        }
    }

    pub fn single(c: ConjPredicate<T>) -> Self {
        Predicate { disjuncts: vec![c] }
    }

    pub fn is_top(&self) -> bool {
        self.disjuncts.iter().any(|d| d.is_empty())
    }

    pub fn or(&self, other: &Self) -> Self {
        let mut disjuncts = self.disjuncts.clone();
        disjuncts.extend(other.disjuncts.clone());
        Predicate { disjuncts }
    }

    pub fn and(&self, other: &Self) -> Self {
        let mut disjuncts = Vec::new();
        for a in &self.disjuncts {
            for b in &other.disjuncts {
                let mut c = a.clone();
                c.extend(b.clone());
                disjuncts.push(c);
            }
        }
        Predicate { disjuncts }
    }

    /// De Morgan negation, expanded back to DNF.
    pub fn negate(&self) -> Self {
        let mut acc = Predicate::top();
        for d in &self.disjuncts {
            // not(conj) = disjunction of negated literals.
            let negated = Predicate {
                disjuncts: d.iter().map(|l| vec![l.negate()]).collect(),
            };
            acc = acc.and(&negated);
        }
        acc
    }

    pub fn holds_at(&self, vals: &[T]) -> Result<bool, ExprError> {
        for d in &self.disjuncts {
            let mut all = true;
            for l in d {
                if !l.holds_at(vals)? {
                    all = false;
                    break;
                }
            }
            if all {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn max_degree(&self) -> u32 {
        self.disjuncts
            .iter()
            .flat_map(|d| d.iter().map(|l| l.lhs.degree()))
            .max()
            .unwrap_or(0)
    }

    pub fn is_linear(&self) -> bool {
        self.max_degree() <= 1
    }
}

pub fn render_predicate<T: Scalar + fmt::Display>(p: &Predicate<T>, names: &[String]) -> String {
    if p.disjuncts.is_empty() {
        return "false".into();
    }
    let ds: Vec<String> = p
        .disjuncts
        .iter()
        .map(|d| {
            if d.is_empty() {
                "true".into()
            } else {
                d.iter()
                    .map(|l| render_constraint(l, names))
                    .collect::<Vec<_>>()
                    .join(" and ")
            }
        })
        .collect();
    ds.join(" or ")
}

/// One expression per location; a candidate certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpressionMap<T> {
    pub by_location: Vec<PolyExpr<T>>,
}

/// One predicate per location (invariant map, target map).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateMap<T> {
    pub by_location: Vec<Predicate<T>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rat, rint, Rat, RatPoly};

    fn x() -> RatPoly {
        RatPoly::var(0)
    }
    fn y() -> RatPoly {
        RatPoly::var(1)
    }
    fn c(n: i64) -> RatPoly {
        RatPoly::constant(rint(n))
    }

    #[test]
    fn eval_linear_example() {
        // 3x + 2y - 1 at x=1, y=1 is 4.
        let e = x().scale(&rint(3)).add(&y().scale(&rint(2))).sub(&c(1));
        let vals = [rint(1), rint(1)];
        assert_eq!(e.eval_slice(&vals).unwrap(), rint(4));
    }

    #[test]
    fn eval_poly_example() {
        // x*y + x + 1 at x=2, y=3 is 9.
        let e = x().mul(&y()).add(&x()).add(&c(1));
        let vals = [rint(2), rint(3)];
        assert_eq!(e.eval_slice(&vals).unwrap(), rint(9));
    }

    #[test]
    fn eval_zero() {
        assert_eq!(RatPoly::zero().eval_slice(&[]).unwrap(), rint(0));
    }

    #[test]
    fn eval_unbound_names_variable() {
        let e = x().add(&y());
        let err = e.eval_slice(&[rint(1)]).unwrap_err();
        assert_eq!(err, ExprError::Unbound(1));
    }

    #[test]
    fn substitute_binomial() {
        // x^2 with x := x+1 gives x^2 + 2x + 1.
        let sq = x().mul(&x());
        let r = sq.substitute(0, &x().add(&c(1)));
        let expected = x().mul(&x()).add(&x().scale(&rint(2))).add(&c(1));
        assert_eq!(r, expected);
    }

    #[test]
    fn substitute_absent_variable() {
        let e = y().add(&c(1));
        assert_eq!(e.substitute(0, &c(7)), e);
    }

    #[test]
    fn substitute_shift() {
        // 2x + y with x := x-1 gives 2x + y - 2.
        let e = x().scale(&rint(2)).add(&y());
        let r = e.substitute(0, &x().sub(&c(1)));
        assert_eq!(r, x().scale(&rint(2)).add(&y()).sub(&c(2)));
    }

    #[test]
    fn graded_lex_ordering() {
        let unit = Monomial::unit();
        let mx = Monomial::var(0);
        let my = Monomial::var(1);
        let mxy = mx.mul(&my);
        let mx2 = mx.mul(&mx);
        assert!(unit < mx);
        assert!(my < mx); // lex tie-break: lower id is greater
        assert!(mx < mxy);
        assert!(mxy < mx2);
    }

    #[test]
    fn monomial_enumeration_degree_two() {
        let ms = Monomial::all_up_to_degree(&[0, 1], 2);
        // 1, x, y, x^2, xy, y^2
        assert_eq!(ms.len(), 6);
        assert!(ms.iter().all(|m| m.degree() <= 2));
    }

    #[test]
    fn canonical_rendering() {
        let names = vec!["x1".to_string(), "x2".to_string()];
        let e = x()
            .scale(&rat(1, 2))
            .add(&y().scale(&rint(-3)))
            .add(&c(7));
        assert_eq!(render_poly(&e, &names), "1/2*x1 + -3*x2 + 7");
        let con = LinConstraint::ge(e);
        assert_eq!(render_constraint(&con, &names), "1/2*x1 + -3*x2 + 7 >= 0");
    }

    #[test]
    fn predicate_negation_covers_complement() {
        // not(x >= 0 and y - 1 >= 0) = (-x > 0) or (-y + 1 > 0)
        let p: Predicate<Rat> = Predicate::single(vec![
            LinConstraint::ge(x()),
            LinConstraint::ge(y().sub(&c(1))),
        ]);
        let n = p.negate();
        assert_eq!(n.disjuncts.len(), 2);
        for (vals, expect) in [
            ([rint(1), rint(2)], false),
            ([rint(-1), rint(2)], true),
            ([rint(1), rint(0)], true),
        ] {
            assert_eq!(n.holds_at(&vals).unwrap(), expect);
            assert_eq!(p.holds_at(&vals).unwrap(), !expect);
        }
    }

    #[test]
    fn top_negates_to_bottom() {
        let t: Predicate<Rat> = Predicate::top();
        assert!(t.negate().disjuncts.is_empty() || !t.negate().holds_at(&[]).unwrap());
    }

    #[test]
    fn linear_parts_extraction() {
        let e = x().scale(&rat(1, 2)).add(&y().scale(&rint(-3))).add(&c(7));
        let (coeffs, konst) = e.linear_parts().unwrap();
        assert_eq!(coeffs[&0], rat(1, 2));
        assert_eq!(coeffs[&1], rint(-3));
        assert_eq!(konst, rint(7));
        assert!(x().mul(&y()).linear_parts().is_none());
    }

    #[test]
    fn univariate_extraction() {
        // x^2*y + 3x + y + 2 in x at y=2: [4, 3, 2]
        let e = x()
            .mul(&x())
            .mul(&y())
            .add(&x().scale(&rint(3)))
            .add(&y())
            .add(&c(2));
        let cs = e.univariate_in(0, &[rint(0), rint(2)]).unwrap();
        assert_eq!(cs, vec![rint(4), rint(3), rint(2)]);
    }
}
