//! Least-squares fits for growth laws and convergence orders.

use serde::Serialize;

use crate::error::{Error, Result};

/// `log y = slope * log x + intercept`, fitted by ordinary least squares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log y`.
    pub rms_residual: f64,
    pub points: usize,
}

/// Straight-line least squares; returns `(slope, intercept, rms residual)`.
pub fn line_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "line fit needs two or more paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("line fit needs distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .sum();
    Ok((slope, intercept, (ss / k).sqrt()))
}

/// Fits `y ~ C x^slope`; all values must be positive and finite.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "log-log fit needs positive finite data, got {bad}"
        )));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (slope, intercept, rms_residual) = line_fit(&lx, &ly)?;
    Ok(LogLogFit {
        slope,
        intercept,
        rms_residual,
        points: xs.len(),
    })
}

/// Observed order of accuracy: slope of `log error` against `log h`.
pub fn convergence_order(steps: &[f64], errors: &[f64]) -> Result<f64> {
    Ok(fit_loglog(steps, errors)?.slope)
}

/// `count` dyadic radii `start, 2 start, 4 start, ...`.
pub fn dyadic(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * 2f64.powi(k as i32)).collect()
}
