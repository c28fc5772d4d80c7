//! ARMA coefficient estimation on a sliding window.
//!
//! Two-stage least squares: a long autoregression estimates the innovation
//! sequence, then the AR and MA coefficients are fit jointly by regressing
//! each value on its own lags and the lagged innovations. Everything is
//! computed on mean-centered values, so the fitted model is
//! `x_t = mean + sum ar_i (x_{t-i} - mean) + sum ma_j e_{t-j}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::predictor::DEGENERATE_SPREAD;

#[derive(Debug, Clone, PartialEq)]
pub struct ArmaFit {
    pub mean: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
}

/// Fit ARMA(p, q) coefficients to `window`. Deterministic for a given
/// window. A window that is constant within machine noise is reported as
/// `Error::DegenerateWindow`; callers fall back to predicting the mean.
pub fn fit_arma(window: &[f64], p: usize, q: usize) -> Result<ArmaFit> {
    let n = window.len();
    let min = p + q + 1;
    if n < min {
        return Err(Error::WindowTooShort { len: n, p, q, min });
    }
    let mean = window.iter().sum::<f64>() / n as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in window {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < DEGENERATE_SPREAD {
        return Err(Error::DegenerateWindow);
    }
    let centered: Vec<f64> = window.iter().map(|v| v - mean).collect();

    if q == 0 {
        let ar = fit_ar(&centered, p).unwrap_or_else(|| vec![0.0; p]);
        return Ok(ArmaFit {
            mean,
            ar,
            ma: Vec::new(),
        });
    }

    // Long-AR order for innovation estimation: a little above p + q, but
    // small enough to leave regression rows in the window.
    let h = (p + q + 2).min(n.saturating_sub(q + 1));
    let two_stage = (h >= 1).then(|| fit_two_stage(&centered, p, q, h)).flatten();
    match two_stage {
        Some((ar, ma)) => Ok(ArmaFit { mean, ar, ma }),
        None => {
            // Window too short or regression singular: drop the MA part.
            let ar = fit_ar(&centered, p).unwrap_or_else(|| vec![0.0; p]);
            Ok(ArmaFit {
                mean,
                ar,
                ma: vec![0.0; q],
            })
        }
    }
}

fn fit_two_stage(centered: &[f64], p: usize, q: usize, h: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = centered.len();
    let long_ar = fit_ar(centered, h)?;

    // One-step residuals of the long AR, defined for t in [h, n).
    let mut residuals = vec![0.0; n];
    for t in h..n {
        let mut pred = 0.0;
        for (i, &a) in long_ar.iter().enumerate() {
            pred += a * centered[t - 1 - i];
        }
        residuals[t] = centered[t] - pred;
    }

    let t0 = p.max(h + q);
    if t0 >= n {
        return None;
    }
    let rows = n - t0;
    let cols = p + q;
    let mut design = Vec::with_capacity(rows * cols);
    let mut target = Vec::with_capacity(rows);
    for t in t0..n {
        for i in 1..=p {
            design.push(centered[t - i]);
        }
        for j in 1..=q {
            design.push(residuals[t - j]);
        }
        target.push(centered[t]);
    }
    let coeffs = solve_lstsq(rows, cols, &design, &target)?;
    let (ar, ma) = coeffs.split_at(p);
    Some((ar.to_vec(), ma.to_vec()))
}

fn fit_ar(centered: &[f64], p: usize) -> Option<Vec<f64>> {
    if p == 0 {
        return Some(Vec::new());
    }
    let n = centered.len();
    if n <= p {
        return None;
    }
    let rows = n - p;
    let mut design = Vec::with_capacity(rows * p);
    let mut target = Vec::with_capacity(rows);
    for t in p..n {
        for i in 1..=p {
            design.push(centered[t - i]);
        }
        target.push(centered[t]);
    }
    solve_lstsq(rows, p, &design, &target)
}

/// Minimum-norm least squares via SVD; `None` when the decomposition fails.
fn solve_lstsq(rows: usize, cols: usize, design: &[f64], target: &[f64]) -> Option<Vec<f64>> {
    let a = DMatrix::from_row_slice(rows, cols, design);
    let b = DVector::from_column_slice(target);
    let svd = a.svd(true, true);
    let solution = svd.solve(&b, 1e-12).ok()?;
    if solution.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(solution.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_window_is_degenerate() {
        let window = [5.0; 6];
        assert!(matches!(
            fit_arma(&window, 2, 2),
            Err(Error::DegenerateWindow)
        ));
    }

    #[test]
    fn short_window_is_rejected() {
        let window = [1.0, 2.0, 3.0];
        assert!(matches!(
            fit_arma(&window, 2, 2),
            Err(Error::WindowTooShort { min: 5, .. })
        ));
    }

    // Oracle: generate x(t) = 0.9 x(t-1) + noise with a fixed seed and check
    // the fitted lag-1 coefficient against an independent least-squares fit
    // computed directly from the normal-equation ratio.
    #[test]
    fn ar1_coefficient_recovered_from_synthetic_series() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut series = vec![0.0_f64];
        for _ in 1..600 {
            let prev = *series.last().unwrap();
            series.push(0.9 * prev + noise.sample(&mut rng));
        }

        let fit = fit_arma(&series, 1, 0).unwrap();
        assert!(
            (fit.ar[0] - 0.9).abs() < 0.1,
            "fitted ar1 {} is not near 0.9",
            fit.ar[0]
        );

        // Independent check: phi = sum(c[t-1] c[t]) / sum(c[t-1]^2).
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
        let num: f64 = (1..c.len()).map(|t| c[t - 1] * c[t]).sum();
        let den: f64 = (1..c.len()).map(|t| c[t - 1] * c[t - 1]).sum();
        let direct = num / den;
        assert!(
            (fit.ar[0] - direct).abs() < 1e-6,
            "svd fit {} differs from direct fit {}",
            fit.ar[0],
            direct
        );
    }

    // Oracle: on the ramp 1..20 an AR(1) one-step prediction of 21 beats the
    // MA(10) prediction (the lagging mean of 11..20).
    #[test]
    fn ar_beats_ma_on_a_linear_ramp() {
        let window: Vec<f64> = (1..=20).map(f64::from).collect();
        let fit = fit_arma(&window, 1, 0).unwrap();
        let pred_ar = fit.mean + fit.ar[0] * (window[19] - fit.mean);
        let pred_ma: f64 = window[10..].iter().sum::<f64>() / 10.0;
        assert_eq!(pred_ma, 15.5);
        let err_ar = (21.0 - pred_ar).abs();
        let err_ma = (21.0 - pred_ma).abs();
        assert!(
            err_ar < err_ma,
            "AR error {err_ar} should beat MA error {err_ma}"
        );
    }

    #[test]
    fn two_stage_fit_is_deterministic() {
        let window: Vec<f64> = (0..20).map(|i| 20.0 + (i as f64 * 0.9).sin()).collect();
        let a = fit_arma(&window, 2, 2).unwrap();
        let b = fit_arma(&window, 2, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ar.len(), 2);
        assert_eq!(a.ma.len(), 2);
    }
}
