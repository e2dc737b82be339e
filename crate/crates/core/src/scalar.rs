//! Numeric scalar abstraction for the symbolic layer.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed};

/// Coefficient domain for polynomials, constraints and simplex tableaus.
///
/// Implemented by `BigRational` (the exact path) and by `f32`/`f64`
/// (export-side numerics); anything satisfying the bounds works.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive {}

impl<T> Scalar for T where T: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive {}

use crate::{Int, Rat};

/// Parses a rational from `"n"`, `"n/d"` or decimal notation (`"0.875"`, `"-1.5e2"` is
/// not supported; exponents never occur in the input corpus).
pub fn rat_from_str(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: Int = n.trim().parse().ok()?;
        let d: Int = d.trim().parse().ok()?;
        if d == Int::from(0) {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let neg = int_part.trim_start().starts_with('-');
        let i: Int = if int_part.is_empty() || int_part == "-" {
            Int::from(0)
        } else {
            int_part.parse().ok()?
        };
        if !frac_part.chars().all(|c| c.is_ascii_digit()) || frac_part.is_empty() {
            return None;
        }
        let f: Int = frac_part.parse().ok()?;
        let scale = num_traits::pow::pow(Int::from(10), frac_part.len());
        let frac = Rat::new(f, scale);
        let whole = Rat::from_integer(i);
        Some(if neg { whole - frac } else { whole + frac })
    } else {
        let n: Int = s.parse().ok()?;
        Some(Rat::from_integer(n))
    }
}

/// Canonical rendering: integers as `n`, everything else as `n/d`.
pub fn rat_to_str(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Lossy conversion to `f64` for reporting and oracle cross-checks.
pub fn rat_to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        // Fall back to a quotient of truncated parts for extreme magnitudes.
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rat, rint};

    #[test]
    fn parses_integers_fractions_decimals() {
        assert_eq!(rat_from_str("3"), Some(rint(3)));
        assert_eq!(rat_from_str("-7"), Some(rint(-7)));
        assert_eq!(rat_from_str("3/4"), Some(rat(3, 4)));
        assert_eq!(rat_from_str("-3/4"), Some(rat(-3, 4)));
        assert_eq!(rat_from_str("0.875"), Some(rat(7, 8)));
        assert_eq!(rat_from_str("-0.5"), Some(rat(-1, 2)));
        assert_eq!(rat_from_str(".25"), Some(rat(1, 4)));
        assert_eq!(rat_from_str("1/0"), None);
        assert_eq!(rat_from_str("x"), None);
    }

    #[test]
    fn canonical_rendering_round_trips() {
        for s in ["0", "5", "-5", "1/2", "-22/7"] {
            let r = rat_from_str(s).unwrap();
            assert_eq!(rat_to_str(&r), s);
            assert_eq!(rat_from_str(&rat_to_str(&r)), Some(r));
        }
    }

    #[test]
    fn normalization_is_idempotent() {
        // BigRational::new normalizes; re-normalizing the parts is a no-op.
        let r = Rat::new(Int::from(6), Int::from(-8));
        assert_eq!(r, rat(-3, 4));
        let again = Rat::new(r.numer().clone(), r.denom().clone());
        assert_eq!(r, again);
        assert!(r.denom() > &Int::from(0));
    }
}
