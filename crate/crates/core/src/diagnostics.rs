//! Power-law fits, tail bounds and the quadratic coupling fit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least 3 points in the fit window, found {0}")]
    TooFewPoints(usize),
    #[error("non-positive value {value} at n = {n}")]
    NonPositive { n: f64, value: f64 },
    #[error("degenerate abscissae")]
    Degenerate,
}

/// Least-squares slope of `ln value` against `ln n` over `n ∈ [lo, hi]`.
pub fn loglog_slope(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64, DiagnosticsError> {
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(n, _)| *n >= window.0 && *n <= window.1).collect();
    if pts.len() < 3 {
        return Err(DiagnosticsError::TooFewPoints(pts.len()));
    }
    let mut xy = Vec::with_capacity(pts.len());
    for (n, v) in pts {
        if n <= 0.0 || v <= 0.0 || !v.is_finite() {
            return Err(DiagnosticsError::NonPositive { n, value: v });
        }
        xy.push((n.ln(), v.ln()));
    }
    linear_fit(&xy).map(|(slope, _)| slope)
}

/// `(slope, intercept)` of an ordinary least-squares line.
pub fn linear_fit(xy: &[(f64, f64)]) -> Result<(f64, f64), DiagnosticsError> {
    if xy.len() < 2 {
        return Err(DiagnosticsError::TooFewPoints(xy.len()));
    }
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(DiagnosticsError::Degenerate);
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Estimate of a dropped tail `Σ_{n>N} b(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum TailBudget {
    Finite(f64),
    /// The fitted decay is not summable.
    Infinite,
}

impl TailBudget {
    pub fn value(self) -> f64 {
        match self {
            TailBudget::Finite(v) => v,
            TailBudget::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, TailBudget::Finite(_))
    }

    pub fn scaled(self, k: f64) -> Self {
        match self {
            TailBudget::Finite(v) => TailBudget::Finite(v * k),
            TailBudget::Infinite => TailBudget::Infinite,
        }
    }
}

/// Integral comparison for `b(n) ≈ b(N)(n/N)^slope`: the tail beyond `N` is
/// at most `b(N)·N/(-1-slope)`. `None` means there is no tail at all.
pub fn tail_budget(last: Option<(f64, f64)>, slope: f64) -> TailBudget {
    let Some((n, value)) = last else {
        return TailBudget::Finite(0.0);
    };
    if slope >= -1.0 || !slope.is_finite() {
        return TailBudget::Infinite;
    }
    TailBudget::Finite(value.abs() * n / (-1.0 - slope))
}

/// Fits `r(λ) = c0 + c1 λ + c2 λ²` through three samples exactly.
pub fn quadratic_fit(points: [(f64, f64); 3]) -> Result<[f64; 3], DiagnosticsError> {
    let [(x0, y0), (x1, y1), (x2, y2)] = points;
    let d01 = x0 - x1;
    let d02 = x0 - x2;
    let d12 = x1 - x2;
    if d01 == 0.0 || d02 == 0.0 || d12 == 0.0 {
        return Err(DiagnosticsError::Degenerate);
    }
    // Lagrange basis expanded into monomials.
    let w0 = y0 / (d01 * d02);
    let w1 = -y1 / (d01 * d12);
    let w2 = y2 / (d02 * d12);
    let c2 = w0 + w1 + w2;
    let c1 = -(w0 * (x1 + x2) + w1 * (x0 + x2) + w2 * (x0 + x1));
    let c0 = w0 * x1 * x2 + w1 * x0 * x2 + w2 * x0 * x1;
    Ok([c0, c1, c2])
}
