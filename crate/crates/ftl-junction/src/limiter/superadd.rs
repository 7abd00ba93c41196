use serde::Serialize;

use super::estimate::{mean_curve, window_slope};
use crate::error::{Error, Result};
use crate::homog::EffectiveModel;

/// Running infimum `M(t) = min_{s <= t} theta(s) - rate * s` over the grid.
pub fn running_infimum(times: &[f64], theta: &[f64], rate: f64) -> Vec<f64> {
    let mut m = f64::INFINITY;
    times
        .iter()
        .zip(theta)
        .map(|(t, th)| {
            m = m.min(th - rate * t);
            m
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub rate: f64,
    /// Tail slope of the running infimum.
    pub slope: f64,
    /// Jackknife standard error of the slope over replicates.
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Defect {
    pub t: f64,
    pub h: f64,
    /// `M(t + h) - M(t) - M(h)`.
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperadditivityReport {
    pub times: Vec<f64>,
    pub fits: Vec<RateFit>,
    /// Index into `fits` of the rate reaching the smallest slope.
    pub best: usize,
    /// Running infimum for the best rate.
    pub infimum: Vec<f64>,
    pub defects: Vec<Defect>,
    /// Whether the smallest slope is below minus three standard errors.
    pub limited: bool,
    /// `-(slope + rate)` at the best rate when limited, `a0` otherwise.
    pub implied_limiter: f64,
}

fn tail_slope(times: &[f64], theta: &[f64], rate: f64) -> f64 {
    let horizon = times[times.len() - 1];
    window_slope(times, &running_infimum(times, theta, rate), horizon / 2.0, horizon)
}

/// Fits the growth of the running infimum for each test rate, with
/// jackknife errors over the replicate curves, and tabulates the
/// superadditivity defect at the best rate.
pub fn superadditivity_diagnostic(
    times: &[f64],
    curves: &[Vec<u64>],
    eff: &EffectiveModel,
    rates: &[f64],
) -> Result<SuperadditivityReport> {
    if rates.is_empty() || curves.len() < 2 {
        return Err(Error::Precondition("need test rates and at least two replicates".into()));
    }
    if let Some(&r) = rates.iter().find(|&&r| r >= -eff.a0) {
        return Err(Error::Precondition(format!("test rate {r} must stay below {}", -eff.a0)));
    }
    let mean = mean_curve(curves);
    let n = curves.len() as f64;
    let leave_one_out: Vec<Vec<f64>> = (0..curves.len())
        .map(|skip| {
            mean.iter()
                .enumerate()
                .map(|(j, m)| (m * n - curves[skip][j] as f64) / (n - 1.0))
                .collect()
        })
        .collect();
    let fits: Vec<RateFit> = rates
        .iter()
        .map(|&rate| {
            let slope = tail_slope(times, &mean, rate);
            let loo: Vec<f64> = leave_one_out.iter().map(|c| tail_slope(times, c, rate)).collect();
            let loo_mean = loo.iter().sum::<f64>() / n;
            let var = (n - 1.0) / n * loo.iter().map(|s| (s - loo_mean).powi(2)).sum::<f64>();
            RateFit {
                rate,
                slope,
                std_error: var.sqrt(),
            }
        })
        .collect();
    let best = (0..fits.len())
        .min_by(|&a, &b| fits[a].slope.total_cmp(&fits[b].slope))
        .unwrap();
    let infimum = running_infimum(times, &mean, fits[best].rate);
    let stride = (times.len() / 20).max(1);
    let mut defects = Vec::new();
    for a in (0..times.len()).step_by(stride) {
        for b in (0..times.len()).step_by(stride) {
            let target = times[a] + times[b];
            if let Some(c) = times.iter().position(|&t| (t - target).abs() < 1e-9) {
                defects.push(Defect {
                    t: times[a],
                    h: times[b],
                    defect: infimum[c] - infimum[a] - infimum[b],
                });
            }
        }
    }
    let f = &fits[best];
    let limited = f.slope < -3.0 * f.std_error && f.slope < 0.0;
    let implied_limiter = if limited { -(f.slope + f.rate) } else { eff.a0 };
    Ok(SuperadditivityReport {
        times: times.to_vec(),
        fits,
        best,
        infimum,
        defects,
        limited,
        implied_limiter,
    })
}
