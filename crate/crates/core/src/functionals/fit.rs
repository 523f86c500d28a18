use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub exponent: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub samples: usize,
}

/// Least squares of log(value) against log(t) over samples with t in [t_lo, t_hi].
pub fn fit_decay(series: &[(f64, f64)], t_lo: f64, t_hi: f64) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= t_lo && t <= t_hi).collect();
    if pts.len() < 5 {
        return Err(Error::range(
            "fit window",
            format!("[{t_lo}, {t_hi}] holds {} samples, need at least 5", pts.len()),
        ));
    }
    if let Some(&(t, v)) = pts.iter().find(|&&(t, v)| !(v > 0.0) || !(t > 0.0)) {
        return Err(Error::domain(format!("cannot fit a power law through t = {t}, value = {v}")));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit window has a single distinct time"));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let r_squared = if syy <= 1e-30 * n { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(FitResult {
        exponent: slope,
        amplitude: icpt.exp(),
        r_squared,
        t_lo: pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        t_hi: pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
        samples: pts.len(),
    })
}

/// The decade [10 t_min, 100 t_min] when it fits below t_max, else [t_max/4, t_max].
pub fn late_window(t_min: f64, t_max: f64) -> (f64, f64) {
    if 100.0 * t_min <= t_max {
        (10.0 * t_min, 100.0 * t_min)
    } else {
        ((t_max / 4.0).max(t_min), t_max)
    }
}
