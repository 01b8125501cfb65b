//! Ordinary least squares on a line, and the log-transformed fits built on it.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `y ≈ intercept + slope · x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientSignal { usable: xs.len().min(ys.len()), needed: 2 });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Fit of `|y_n| ≈ amplitude · rate^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Number of points that entered the fit.
    pub points: usize,
}

impl DecayFit {
    /// A fit counts as exponential decay only when `0 < rate < 1`.
    pub fn is_decaying(&self) -> bool {
        self.rate > 0.0 && self.rate < 1.0
    }
}

/// Minimum number of points above the noise floor for a decay fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Fits `ln|value| = ln amplitude + n ln rate` over the points `(n, value, stderr)`
/// with `n` in `[n_min, n_max]` and `|value| > 3 stderr`.
pub fn fit_decay(points: &[(usize, f64, f64)], n_min: usize, n_max: usize) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, v, se)| *n >= n_min && *n <= n_max && v.abs() > 3.0 * se && *v != 0.0)
        .map(|(n, v, _)| (*n as f64, libm::log(v.abs())))
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientSignal { usable: usable.len(), needed: MIN_FIT_POINTS });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.iter().copied().unzip();
    let line = linear_fit(&xs, &ys)?;
    Ok(DecayFit {
        rate: libm::exp(line.slope),
        amplitude: libm::exp(line.intercept),
        r_squared: line.r_squared,
        n_min: xs[0] as usize,
        n_max: xs[xs.len() - 1] as usize,
        points: usable.len(),
    })
}

/// Fit of `y ≈ prefactor · n^(-exponent)` on a log-log scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

pub fn fit_power_law(points: &[(usize, f64)], n_min: usize, n_max: usize) -> Result<PowerLawFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(n, w)| *n >= n_min && *n <= n_max && *w > 0.0)
        .map(|(n, w)| (libm::log(*n as f64), libm::log(*w)))
        .unzip();
    let line = linear_fit(&xs, &ys)?;
    Ok(PowerLawFit { exponent: -line.slope, prefactor: libm::exp(line.intercept), r_squared: line.r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_is_recovered() {
        let pts: Vec<_> = (0..12).map(|n| (n, 0.5 * libm::pow(0.8, n as f64), 0.0)).collect();
        let fit = fit_decay(&pts, 0, 11).unwrap();
        assert!((fit.rate - 0.8).abs() < 1e-12);
        assert!((fit.amplitude - 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.is_decaying());
    }

    #[test]
    fn constant_series_is_rejected() {
        let pts: Vec<_> = (0..8).map(|n| (n, 0.3, 0.0)).collect();
        let fit = fit_decay(&pts, 0, 7).unwrap();
        assert_eq!(fit.rate, 1.0);
        assert!(!fit.is_decaying());
    }

    #[test]
    fn noise_floor_excludes_points() {
        let pts: Vec<_> = (0..8).map(|n| (n, 1e-3, 1e-3)).collect();
        assert_eq!(fit_decay(&pts, 0, 7), Err(Error::InsufficientSignal { usable: 0, needed: 4 }));
    }

    #[test]
    fn power_law_exponent() {
        let pts: Vec<_> = (1..50).map(|n| (n, 3.0 / ((n * n) as f64))).collect();
        let fit = fit_power_law(&pts, 5, 49).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-10);
    }
}
