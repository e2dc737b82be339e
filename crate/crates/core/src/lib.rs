//! Martingale-based certificates for reachability in probabilistic programs.
//!
//! The library synthesizes and checks four kinds of per-location certificate
//! functions over a probabilistic control flow graph (pCFG):
//!
//! * nonnegative repulsing supermartingales (upper bounds on reachability),
//! * ε-repulsing supermartingales (concentration-based refutation bounds),
//! * additive ranking supermartingales (upper bounds on expected reaching time),
//! * γ-scaled submartingales (lower bounds on reachability).
//!
//! Synthesis reduces template constraints to exact-rational linear programs
//! via Farkas' lemma (linear templates) or to semidefinite programs via a
//! sum-of-squares relaxation (polynomial templates). An independent
//! finite-state value-iteration oracle provides ground truth for validation.
//!
//! The symbolic layer is generic over the coefficient scalar through
//! [`scalar::Scalar`]; the aliases below fix the two instantiations used in
//! practice: exact big rationals for everything feeding the LP pipeline, and
//! `f64` for SDP export and the oracle.

pub mod cert;
pub mod expr;
pub mod farkas;
pub mod lower;
pub mod oracle;
pub mod parse;
pub mod pcfg;
pub mod scalar;
pub mod sdpa;
pub mod simplex;
pub mod sos;
pub mod synth;
pub mod template;

/// Exact rational scalar used throughout the symbolic and LP layers.
pub type Rat = num_rational::BigRational;

/// Arbitrary-precision integer backing [`Rat`].
pub type Int = num_bigint::BigInt;

/// Polynomial with exact rational coefficients.
pub type RatPoly = expr::PolyExpr<Rat>;

/// Polynomial with float coefficients (oracle / SDP side).
pub type F64Poly = expr::PolyExpr<f64>;

/// Convenience constructor for an exact rational from a numerator/denominator pair.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(Int::from(num), Int::from(den))
}

/// Convenience constructor for an integer-valued rational.
pub fn rint(n: i64) -> Rat {
    Rat::from_integer(Int::from(n))
}
