use serde::Serialize;

use super::closed::closed_form_nu;
use super::scheme::{sample_initial, solve_hj, GridSolution, JunctionGrid};
use crate::error::Result;
use crate::homog::{junction_profile, EffectiveModel};
use crate::micro_sim::{
    branch_x, flat_initial_condition, observe, scaled_nu, scaled_u, ObservableTrace, SimConfig, Simulator,
    WINDOW_MARGIN,
};
use crate::model::{ModelSpec, Realization, VelocityLaw};

#[derive(Debug, Clone, Serialize)]
pub struct CompareConfig {
    pub eps: Vec<f64>,
    /// Macroscopic sample times, the last one being the horizon.
    pub times: Vec<f64>,
    /// Distances from the junction sampled on every road.
    pub distances: Vec<f64>,
    /// Labels used for the inverse-map check.
    pub labels: Vec<f64>,
    pub dx: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub eps: f64,
    pub dx: f64,
    pub micro_vs_closed: f64,
    /// Micro-versus-closed error per road.
    pub road_errors: Vec<f64>,
    pub micro_vs_grid: f64,
    pub grid_vs_closed: f64,
    /// Micro-versus-closed error at the first sample time.
    pub initial_error: f64,
    /// Per road, largest `|nu(u(y)) + y|` over labels and times; road 0
    /// only counts labels still upstream of the junction.
    pub duality: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRun {
    pub row: CompareRow,
    pub trace: ObservableTrace,
}

fn flat_datum(eff: &EffectiveModel) -> impl Fn(f64, usize) -> f64 + '_ {
    move |x, k| {
        let road = if x <= 0.0 { 0 } else { k };
        -x / eff.road(road).spacing
    }
}

/// Grid solution of the flat-datum problem at time `t`.
pub fn flat_grid_solution(eff: &EffectiveModel, level: f64, dx: f64, reach: f64, t: f64) -> Result<GridSolution> {
    let extent = reach + 2.0 * eff.max_slope() * t + 1.0;
    let grid = JunctionGrid::new(eff, dx, (extent / dx).ceil() as usize);
    let init = sample_initial(eff, &grid, flat_datum(eff));
    solve_hj(eff, level, init, grid, t)
}

/// Runs the particle system at scale `eps` from the flat datum and compares
/// its scaled counts with the closed-form flat solution at limiter `level`
/// and with the grid solution.
pub fn compare_at_scale(
    spec: &ModelSpec,
    law: &dyn VelocityLaw,
    eff: &EffectiveModel,
    level: f64,
    eps: f64,
    cfg: &CompareConfig,
) -> Result<CompareRun> {
    let profile = junction_profile(eff, level)?;
    let horizon = cfg.times.iter().copied().fold(0.0, f64::max);
    let x_max = cfg.distances.iter().copied().fold(0.0, f64::max);
    let y_max = cfg.labels.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let spacing_max = eff.spacings().into_iter().fold(0.0, f64::max);
    let reach = (x_max.max(y_max * spacing_max) + 1.0 + spec.v_sup() * horizon) / eps;
    let w = (reach / spec.delta_min).ceil() as i64 + WINDOW_MARGIN;
    let real = Realization::sample(spec, cfg.seed, -w, w)?;
    let mut state = flat_initial_condition(&real, &eff.spacings(), &eff.steady_speeds(), spec.delta_min)?;
    let sim = Simulator::new(law, &real, spec, SimConfig::for_law(law, spec))?;
    let micro_times: Vec<f64> = cfg.times.iter().map(|t| t / eps).collect();
    let mut trace = ObservableTrace::new(eps, cfg.distances.clone());
    let mut duality = vec![0.0f64; spec.roads + 1];
    sim.run(&mut state, &micro_times, |s| {
        trace.frames.push(observe(s, &real, spec, eps, &cfg.distances)?);
        for (k, worst) in duality.iter_mut().enumerate() {
            for &y in &cfg.labels {
                let x = scaled_u(s, &real, eps, k, y)?;
                // The incoming count only lives on x <= 0.
                if k == 0 && x > 0.0 {
                    continue;
                }
                let nu = scaled_nu(s, &real, spec, eps, k, x)?;
                *worst = worst.max((nu + y).abs());
            }
        }
        Ok(())
    })?;
    let mut micro_vs_closed: f64 = 0.0;
    let mut micro_vs_grid: f64 = 0.0;
    let mut grid_vs_closed: f64 = 0.0;
    let mut initial_error: f64 = 0.0;
    let mut road_errors = vec![0.0f64; spec.roads + 1];
    for (n, frame) in trace.frames.iter().enumerate() {
        let t = cfg.times[n];
        let grid = flat_grid_solution(eff, level, cfg.dx, x_max, t)?;
        for k in 0..=spec.roads {
            for (j, &d) in cfg.distances.iter().enumerate() {
                let x = branch_x(k, d);
                let exact = closed_form_nu(eff, &profile, x, k, t);
                let g = grid.eval(x, k);
                let micro = frame.nu[k][j];
                micro_vs_closed = micro_vs_closed.max((micro - exact).abs());
                road_errors[k] = road_errors[k].max((micro - exact).abs());
                micro_vs_grid = micro_vs_grid.max((micro - g).abs());
                grid_vs_closed = grid_vs_closed.max((g - exact).abs());
                if n == 0 {
                    initial_error = initial_error.max((micro - exact).abs());
                }
            }
        }
    }
    Ok(CompareRun {
        row: CompareRow {
            eps,
            dx: cfg.dx,
            micro_vs_closed,
            road_errors,
            micro_vs_grid,
            grid_vs_closed,
            initial_error,
            duality,
        },
        trace,
    })
}

/// One comparison per scale in `cfg.eps`.
pub fn micro_macro_compare(
    spec: &ModelSpec,
    law: &dyn VelocityLaw,
    eff: &EffectiveModel,
    level: f64,
    cfg: &CompareConfig,
) -> Result<Vec<CompareRun>> {
    use rayon::prelude::*;
    cfg.eps
        .par_iter()
        .map(|&eps| compare_at_scale(spec, law, eff, level, eps, cfg))
        .collect()
}
