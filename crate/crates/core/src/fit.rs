//! Least-squares estimation of scaling exponents on log-log data.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least 3 positive points in window [{lo}, {hi}], found {found}")]
    InsufficientPoints { lo: f64, hi: f64, found: usize },
}

/// Result of a log-log regression over a declared window.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub points_used: usize,
}

/// Fits `log y = intercept + slope * log x` by least squares over the points
/// with `lo <= x <= hi`. All used points must be strictly positive.
pub fn fit_exponent(points: &[(f64, f64)], window: (f64, f64)) -> Result<FitResult, FitError> {
    let (lo, hi) = window;
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .map(|&(x, y)| {
            assert!(x > 0.0 && y > 0.0, "log-log fit needs positive data, got ({x}, {y})");
            (x.ln(), y.ln())
        })
        .collect();
    let n = data.len();
    if n < 3 {
        return Err(FitError::InsufficientPoints { lo, hi, found: n });
    }
    let nf = n as f64;
    let mx = data.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = data.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx = data.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = data.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = data.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>();
    let stderr = if n > 2 { (ss_res / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(FitResult { slope, intercept, stderr, window, points_used: n })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
