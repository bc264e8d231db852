//! Log-log least-squares fit of MSE decay.

/// `MSE(T) ≈ A·T^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    /// Monte Carlo standard error of the exponent, propagated from the per-T standard errors by
    /// the delta method (`Var log MSE ≈ (se/MSE)²`). Equals `residual_stderr` when no per-T
    /// errors are available.
    pub stderr: f64,
    /// Classical OLS standard error from the fit residuals (zero for an exact power law or two
    /// points).
    pub residual_stderr: f64,
    pub intercept: f64,
}

/// Ordinary least squares of `ln mse` on `ln t`, negated slope.
///
/// `se` holds the Monte Carlo standard errors of `mse` (same length) or is empty.
///
/// # Panics
///
/// If fewer than two points are given, lengths differ, or any `mse` is not positive.
pub fn fit_decay(t: &[f64], mse: &[f64], se: &[f64]) -> RateFit {
    assert!(t.len() >= 2 && t.len() == mse.len(), "need matching grids of length >= 2");
    assert!(se.is_empty() || se.len() == mse.len());
    assert!(mse.iter().all(|&m| m > 0.0 && m.is_finite()), "MSE values must be positive");
    let k = t.len() as f64;
    let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = mse.iter().map(|v| v.ln()).collect();
    let x_mean = x.iter().sum::<f64>() / k;
    let y_mean = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|xi| (xi - x_mean).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(xi, yi)| (xi - x_mean) * (yi - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let ssr: f64 = x.iter().zip(&y).map(|(xi, yi)| (yi - intercept - slope * xi).powi(2)).sum();
    let residual_stderr = if t.len() > 2 { (ssr / (k - 2.0) / sxx).sqrt() } else { 0.0 };

    let mc_var: f64 = x
        .iter()
        .zip(mse)
        .zip(se)
        .map(|((xi, m), s)| {
            let w = (xi - x_mean) / sxx;
            w * w * (s / m).powi(2)
        })
        .sum();
    let stderr = if se.iter().any(|&s| s > 0.0) { mc_var.sqrt() } else { residual_stderr };

    RateFit { exponent: -slope, stderr, residual_stderr, intercept }
}
