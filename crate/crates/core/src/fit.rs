//! Decay-law fitting: ordinary least squares in transformed coordinates,
//! with floor-clamping bookkeeping so that fits near the numerical noise
//! floor are flagged rather than silently trusted.

use crate::error::{CoreError, Result};

/// Result of a straight-line fit y ≈ intercept + slope·x.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Plain OLS on (x, y).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "linear fit needs ≥2 matched points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(CoreError::InvalidArgument("degenerate fit: all x equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let e = y - (intercept + slope * x);
        ss_res += e * e;
        ss_tot += (y - my) * (y - my);
    }
    let r_squared = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LineFit { slope, intercept, r_squared, n: xs.len() })
}

/// Power-law fit y ≈ C·x^p via OLS in (ln x, ln y).
#[derive(Clone, Copy, Debug)]
pub struct PowerLawFit {
    /// Exponent p (the log-log slope).
    pub exponent: f64,
    /// Prefactor C.
    pub prefactor: f64,
    pub r_squared: f64,
    /// How many y values sat at or below `floor` and were clamped to it.
    /// A nonzero count means part of the window is numerical noise.
    pub clamped: usize,
    pub n: usize,
}

pub fn log_log_fit(xs: &[f64], ys: &[f64], floor: f64) -> Result<PowerLawFit> {
    if xs.iter().any(|&x| !(x > 0.0)) {
        return Err(CoreError::InvalidArgument("log-log fit needs positive x".into()));
    }
    let mut clamped = 0usize;
    let lys: Vec<f64> = ys
        .iter()
        .map(|&y| {
            if y <= floor {
                clamped += 1;
                floor.ln()
            } else {
                y.ln()
            }
        })
        .collect();
    let lxs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let line = linear_fit(&lxs, &lys)?;
    Ok(PowerLawFit {
        exponent: line.slope,
        prefactor: line.intercept.exp(),
        r_squared: line.r_squared,
        clamped,
        n: line.n,
    })
}

/// Exponential fit y ≈ A·e^{−λx} via OLS in (x, ln y); returns (A, λ, r²,
/// clamped count).
pub fn exp_fit(xs: &[f64], ys: &[f64], floor: f64) -> Result<(f64, f64, f64, usize)> {
    let mut clamped = 0usize;
    let lys: Vec<f64> = ys
        .iter()
        .map(|&y| {
            if y <= floor {
                clamped += 1;
                floor.ln()
            } else {
                y.ln()
            }
        })
        .collect();
    let line = linear_fit(xs, &lys)?;
    Ok((line.intercept.exp(), -line.slope, line.r_squared, clamped))
}

/// Least-squares (a, b) with y ≈ a + b·h: separates a semiclassical limit
/// from its first correction given samples at several ℏ.
pub fn linear_in_h(hs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let line = linear_fit(hs, ys)?;
    Ok((line.intercept, line.slope))
}

/// Indices of xs lying in [lo, hi].
pub fn window_indices(xs: &[f64], lo: f64, hi: f64) -> Vec<usize> {
    xs.iter()
        .enumerate()
        .filter(|(_, &x)| x >= lo && x <= hi)
        .map(|(i, _)| i)
        .collect()
}
