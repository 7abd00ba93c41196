use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::homog::EffectiveModel;
use crate::micro_sim::{flat_initial_condition, theta, theta_window, SimConfig, Simulator, WINDOW_MARGIN};
use crate::model::{ModelSpec, Realization, VelocityLaw};
use crate::stats::{self, Z95};

/// `theta` at each of `times` for one flat-datum run from seed `seed`.
pub fn theta_curve(
    spec: &ModelSpec,
    law: &dyn VelocityLaw,
    eff: &EffectiveModel,
    seed: u64,
    times: &[f64],
    margin: i64,
) -> Result<Vec<u64>> {
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = theta_window(spec, horizon, margin);
    let real = Realization::sample(spec, seed, lo, hi)?;
    let mut state = flat_initial_condition(&real, &eff.spacings(), &eff.steady_speeds(), spec.delta_min)?;
    let sim = Simulator::new(law, &real, spec, SimConfig::for_law(law, spec))?;
    let mut out = Vec::with_capacity(times.len());
    sim.run(&mut state, times, |s| {
        out.push(theta(s)?);
        Ok(())
    })?;
    Ok(out)
}

/// One curve per seed, in seed order.
pub fn theta_curves(
    spec: &ModelSpec,
    law: &dyn VelocityLaw,
    eff: &EffectiveModel,
    seeds: &[u64],
    times: &[f64],
) -> Result<Vec<Vec<u64>>> {
    seeds
        .par_iter()
        .map(|&s| theta_curve(spec, law, eff, s, times, WINDOW_MARGIN))
        .collect()
}

/// Unit-spaced sample times `0, 1, ..., horizon`.
pub fn unit_times(horizon: f64) -> Vec<f64> {
    (0..=horizon.floor() as usize).map(|s| s as f64).collect()
}

/// Pointwise replicate mean of integer curves.
pub fn mean_curve(curves: &[Vec<u64>]) -> Vec<f64> {
    let n = curves[0].len();
    (0..n)
        .map(|j| curves.iter().map(|c| c[j] as f64).sum::<f64>() / curves.len() as f64)
        .collect()
}

/// Least-squares slope of `ys` over the sample times in `[from, to]`.
pub fn window_slope(times: &[f64], ys: &[f64], from: f64, to: f64) -> f64 {
    let (xs, vs): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(ys)
        .filter(|(t, _)| **t >= from && **t <= to)
        .map(|(t, y)| (*t, *y))
        .unzip();
    stats::linear_fit(&xs, &vs).0
}

/// Slope error caused by rounding a linear curve to integers: a deviation of
/// at most 1/2 moves the least-squares slope over a window of length `len`
/// by at most `1.5 / len`.
pub fn quantization_floor(len: f64) -> f64 {
    1.5 / len
}

#[derive(Debug, Clone, Serialize)]
pub struct LimiterEstimate {
    pub estimate: f64,
    /// Estimate clamped to `[a0, 0]` for reporting.
    pub clamped: f64,
    pub ci: f64,
    pub horizon: f64,
    pub replicates: usize,
    pub window: (f64, f64),
    /// Per-replicate `-slope`.
    pub replicate_estimates: Vec<f64>,
    pub times: Vec<f64>,
    pub mean_theta: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Limiter estimate `-slope` of the mean crossing count over
/// `[horizon / 2, horizon]`, with a normal interval over replicate slopes
/// widened by the integer rounding floor.
pub fn estimate_from_curves(
    eff: &EffectiveModel,
    seeds: &[u64],
    times: &[f64],
    curves: &[Vec<u64>],
    horizon: f64,
) -> Result<LimiterEstimate> {
    let window = (horizon / 2.0, horizon);
    let mean = mean_curve(curves);
    let estimate = -window_slope(times, &mean, window.0, window.1);
    if !estimate.is_finite() {
        return Err(Error::NonFinite { t: horizon });
    }
    let reps: Vec<f64> = curves
        .iter()
        .map(|c| {
            let ys: Vec<f64> = c.iter().map(|&v| v as f64).collect();
            -window_slope(times, &ys, window.0, window.1)
        })
        .collect();
    let (_, sd) = stats::mean_sd(&reps);
    let ci = Z95 * sd / (reps.len() as f64).sqrt() + quantization_floor(window.1 - window.0);
    Ok(LimiterEstimate {
        estimate,
        clamped: estimate.clamp(eff.a0, 0.0),
        ci,
        horizon,
        replicates: curves.len(),
        window,
        replicate_estimates: reps,
        times: times.to_vec(),
        mean_theta: mean,
        seeds: seeds.to_vec(),
    })
}

pub fn estimate_flux_limiter(
    spec: &ModelSpec,
    law: &dyn VelocityLaw,
    eff: &EffectiveModel,
    seeds: &[u64],
    horizon: f64,
) -> Result<LimiterEstimate> {
    if seeds.len() < 8 {
        return Err(Error::Precondition(format!("need at least 8 replicates, got {}", seeds.len())));
    }
    let times = unit_times(horizon);
    let curves = theta_curves(spec, law, eff, seeds, &times)?;
    estimate_from_curves(eff, seeds, &times, &curves, horizon)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub times: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma_over_t: Vec<f64>,
    /// Log-log slope of `sigma(t)`; `None` when degenerate.
    pub slope: Option<f64>,
    pub degenerate: bool,
}

/// Spread of `theta(t)` across replicates at each sample time.
pub fn concentration_from_curves(times: &[f64], curves: &[Vec<u64>]) -> ConcentrationReport {
    let sigma: Vec<f64> = (0..times.len())
        .map(|j| stats::mean_sd(&curves.iter().map(|c| c[j] as f64).collect::<Vec<_>>()).1)
        .collect();
    let sigma_over_t = sigma.iter().zip(times).map(|(s, t)| s / t).collect();
    let degenerate = curves.len() < 2 || times.len() < 2 || sigma.iter().any(|s| !(*s > 0.0));
    let slope = (!degenerate).then(|| {
        let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = sigma.iter().map(|s| s.ln()).collect();
        stats::linear_fit(&lx, &ly).0
    });
    ConcentrationReport {
        times: times.to_vec(),
        sigma,
        sigma_over_t,
        slope,
        degenerate,
    }
}

pub fn concentration_diagnostic(
    spec: &ModelSpec,
    law: &dyn VelocityLaw,
    eff: &EffectiveModel,
    seeds: &[u64],
    times: &[f64],
) -> Result<ConcentrationReport> {
    let curves = theta_curves(spec, law, eff, seeds, times)?;
    Ok(concentration_from_curves(times, &curves))
}
