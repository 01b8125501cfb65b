//! Bracketed root finding.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]` given the signs of `f` at the ends.
///
/// The end values are not evaluated, which lets callers bracket a root
/// between two poles of opposite sign. Stops when the bracket is narrower
/// than `tol` or `f` vanishes exactly.
pub fn bisect_signed<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, lo_positive: bool, tol: f64) -> Result<f64> {
    if lo.partial_cmp(&hi) != Some(core::cmp::Ordering::Less) {
        return Err(Error::NoBracket { lo, hi });
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v.is_nan() {
            return Err(Error::NoBracket { lo, hi });
        }
        if (v > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || (flo > 0.0) == (fhi > 0.0) {
        return Err(Error::NoBracket { lo, hi });
    }
    bisect_signed(f, lo, hi, flo > 0.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - core::f64::consts::SQRT_2).abs() < 1e-13);
    }

    #[test]
    fn rejects_missing_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn works_between_poles() {
        // 1/(x-0) - 1/(1-x) vanishes at 1/2 and blows up at both ends.
        let r = bisect_signed(|x| 1.0 / x - 1.0 / (1.0 - x), 0.0, 1.0, true, 1e-13).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }
}
