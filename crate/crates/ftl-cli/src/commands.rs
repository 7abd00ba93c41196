use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ftl_junction::homog::{check_convexity, compute_effective, junction_profile, EffectiveModel};
use ftl_junction::limiter::{
    build_corrector, concentration_from_curves, corrector_lipschitz_violations, estimate_flux_limiter,
    estimate_from_curves, superadditivity_diagnostic, theta_curves, unit_times,
};
use ftl_junction::macro_solver::{closed_form_nu, flat_grid_solution, micro_macro_compare, CompareConfig};
use ftl_junction::micro_sim::io::{write_nu_csv, write_positions_csv, TrajectoryWriter};
use ftl_junction::micro_sim::{
    finite_speed_check, flat_initial_condition, nu_lipschitz_constant, propagation_growth, theta,
    theta_increment_constant, theta_window, velocity_floor, SimConfig, Simulator, WINDOW_MARGIN,
};
use ftl_junction::model::{
    estimate_alpha, validate_assumptions, FreeRoadLaw, JunctionLaw, ModelSpec, Realization, VelocityLaw,
};
use ftl_junction::seeds::replicate_seeds;
use ftl_junction::stats::mean_sd;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{LawKind, Resolved};
use crate::output::{sha256_hex, Csv, Staging};
use crate::svg::{Chart, Scale, Series};

/// Loaded inputs and the staging area of one run.
pub struct Run {
    pub command: &'static str,
    pub cfg: Resolved,
    pub spec: ModelSpec,
    pub spec_sha256: String,
    pub staging: Staging,
    pub seeds: Vec<u64>,
    pub summary: Value,
    /// Set when the run completed but an invariant check failed.
    pub failed_checks: Vec<String>,
}

impl Run {
    pub fn new(command: &'static str, cfg: Resolved) -> Result<Self> {
        let bytes = std::fs::read(&cfg.spec).with_context(|| format!("cannot read spec {}", cfg.spec.display()))?;
        let text = String::from_utf8(bytes.clone()).context("spec is not UTF-8")?;
        let spec =
            ModelSpec::from_toml_str(&text).with_context(|| format!("invalid model spec {}", cfg.spec.display()))?;
        let staging = Staging::new(&cfg.out)?;
        Ok(Self {
            command,
            spec_sha256: sha256_hex(&bytes),
            cfg,
            spec,
            staging,
            seeds: Vec::new(),
            summary: Value::Null,
            failed_checks: Vec::new(),
        })
    }

    fn law(&self) -> Result<Box<dyn VelocityLaw>> {
        Ok(match self.cfg.law {
            LawKind::Junction => Box::new(JunctionLaw::new(&self.spec)?),
            LawKind::FreeRoad => Box::new(FreeRoadLaw::new(&self.spec)),
        })
    }

    fn svg(&mut self, name: &str, chart: Chart, series: &[Series]) -> Result<()> {
        self.staging.write(name, chart.render(series).as_bytes())
    }

    /// Writes the manifest and moves the output into place.
    pub fn publish(self) -> Result<(PathBuf, Vec<String>)> {
        let Run {
            command,
            cfg,
            spec_sha256,
            staging,
            seeds,
            summary,
            failed_checks,
            ..
        } = self;
        let dest = staging.publish(|artifacts| {
            json!({
                "tool": "ftl-junction",
                "version": env!("CARGO_PKG_VERSION"),
                "library_version": ftl_junction::VERSION,
                "command": command,
                "spec": { "path": cfg.spec, "sha256": spec_sha256 },
                "config": cfg,
                "seeds": seeds,
                "artifacts": artifacts,
                "failed_checks": failed_checks,
                "summary": summary,
            })
        })?;
        Ok((dest, failed_checks))
    }
}

const EFFECTIVE_HEADER: &str = "\
# Homogenized model.
# delta_min: minimal spacing. a0: lowest admissible limiter level.
# [[roads]]: road 0 is incoming. weight: share of vehicles on the road.
#   velocity.x / velocity.y: knots (spacing, effective velocity), saturating at v_bar.
#   hamiltonian.x / hamiltonian.y: knots (p, H(p)) for p < 0.
#   spacing: flat-datum spacing e with H(-1/e) = h_min; steady_speed: velocity at e.
";

fn effective_toml(eff: &EffectiveModel) -> Result<String> {
    Ok(format!("{EFFECTIVE_HEADER}{}", toml::to_string(eff)?))
}

pub fn homogenize(run: &mut Run) -> Result<()> {
    let eff = compute_effective(&run.spec)?;
    let report = check_convexity(&eff);
    if !report.passed() {
        bail!("convexity check failed: {}", serde_json::to_string(&report)?);
    }
    run.staging.write("effective.toml", effective_toml(&eff)?.as_bytes())?;
    run.staging.write_json("convexity.json", &report)?;
    let mut velocity = Csv::new(&["road", "e", "value"]);
    let mut hamiltonian = Csv::new(&["road", "p", "value"]);
    let mut series = Vec::new();
    for r in &eff.roads {
        for (x, y) in r.velocity.x.iter().zip(&r.velocity.y) {
            velocity.row(&[&r.road, x, y]);
        }
        let from = -1.0 / (r.weight * eff.delta_min);
        let mut pts = Vec::new();
        for (p, h) in r.hamiltonian.x.iter().zip(&r.hamiltonian.y) {
            hamiltonian.row(&[&r.road, p, h]);
            if *p >= from {
                pts.push((*p, *h));
            }
        }
        series.push(Series::new(format!("road {}", r.road), pts));
    }
    run.staging.write("velocity.csv", &velocity.into_bytes())?;
    run.staging.write("hamiltonian.csv", &hamiltonian.into_bytes())?;
    run.svg(
        "hamiltonian.svg",
        Chart {
            title: "Effective Hamiltonians",
            x_label: "p",
            y_label: "H(p)",
            scale: Scale::Linear,
        },
        &series,
    )?;
    run.summary = json!({
        "a0": eff.a0,
        "spacings": eff.spacings(),
        "steady_speeds": eff.steady_speeds(),
        "minima": eff.roads.iter().map(|r| r.h_min).collect::<Vec<_>>(),
    });
    Ok(())
}

fn sample_times(horizon: f64, every: f64) -> Vec<f64> {
    let n = (horizon / every + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|j| j as f64 * every).collect();
    if horizon - times[n] > 1e-9 {
        times.push(horizon);
    }
    times
}

pub fn simulate(run: &mut Run) -> Result<()> {
    let law = run.law()?;
    let spec = &run.spec;
    let eff = compute_effective(spec)?;
    let horizon = run.cfg.horizon;
    let (lo, hi) = theta_window(spec, horizon, WINDOW_MARGIN);
    let real = Realization::sample(spec, run.cfg.seed, lo, hi)?;
    let mut state = flat_initial_condition(&real, &eff.spacings(), &eff.steady_speeds(), spec.delta_min)?;
    let cfg = SimConfig::for_law(law.as_ref(), spec).aligned_to(run.cfg.record_every);
    let sim = Simulator::new(law.as_ref(), &real, spec, cfg)?;
    let times = sample_times(horizon, run.cfg.record_every);
    let mut snapshots = Vec::with_capacity(times.len());
    let mut thetas = Vec::with_capacity(times.len());
    sim.run(&mut state, &times, |s| {
        thetas.push((s.t, theta(s)?));
        snapshots.push(s.clone());
        Ok(())
    })?;
    let mut positions = Vec::new();
    write_positions_csv(&mut positions, &snapshots)?;
    run.staging.write("positions.csv", &positions)?;
    if run.cfg.binary {
        let mut w = TrajectoryWriter::new(Vec::new())?;
        for s in &snapshots {
            w.write_state(s)?;
        }
        run.staging.write("trajectory.bin", &w.finish()?)?;
    }
    let mut csv = Csv::new(&["time", "value"]);
    for (t, th) in &thetas {
        csv.row(&[t, th]);
    }
    run.staging.write("theta.csv", &csv.into_bytes())?;
    let pts: Vec<(f64, f64)> = thetas.iter().map(|&(t, th)| (t, th as f64)).collect();
    let reference: Vec<(f64, f64)> = [0.0, horizon].iter().map(|&t| (t, -eff.a0 * t)).collect();
    run.svg(
        "theta.svg",
        Chart {
            title: "Vehicles through the junction",
            x_label: "t",
            y_label: "theta(t)",
            scale: Scale::Linear,
        },
        &[Series::new("theta", pts), Series::new("-A0 t", reference).dashed()],
    )?;
    run.seeds = vec![run.cfg.seed];
    run.summary = json!({
        "dt": cfg.dt,
        "tau_ord": cfg.tau_ord,
        "window": [lo, hi],
        "final_theta": thetas.last().map(|p| p.1),
        "stats": state.stats,
    });
    Ok(())
}

#[derive(Serialize)]
struct LimiterReport<'a> {
    estimate: f64,
    clamped: f64,
    ci: f64,
    replicates: usize,
    horizon: f64,
    window: (f64, f64),
    seeds: &'a [u64],
    spec_sha256: &'a str,
    limited: bool,
    implied_limiter: f64,
    best_rate: f64,
    fits: &'a [ftl_junction::limiter::RateFit],
    concentration_times: Vec<f64>,
    concentration_slope: Option<f64>,
}

pub fn estimate_limiter(run: &mut Run) -> Result<()> {
    let law = run.law()?;
    let spec = &run.spec;
    let eff = compute_effective(spec)?;
    let horizon = run.cfg.horizon;
    if run.cfg.replicates < 8 {
        bail!("need at least 8 replicates");
    }
    let seeds = replicate_seeds(run.cfg.seed, run.cfg.replicates);
    let times = unit_times(horizon);
    let curves = theta_curves(spec, law.as_ref(), &eff, &seeds, &times)?;
    let est = estimate_from_curves(&eff, &seeds, &times, &curves, horizon)?;
    let rates: Vec<f64> = (1..=8).map(|j| -eff.a0 * j as f64 / 9.0).collect();
    let sup = superadditivity_diagnostic(&times, &curves, &eff, &rates)?;
    let probe: Vec<usize> = [8.0, 4.0, 2.0, 1.0]
        .iter()
        .map(|d| times.iter().position(|&t| t >= horizon / d).unwrap_or(times.len() - 1))
        .filter(|&j| times[j] > 0.0)
        .collect();
    let probe_curves: Vec<Vec<u64>> = curves.iter().map(|c| probe.iter().map(|&j| c[j]).collect()).collect();
    let probe_times: Vec<f64> = probe.iter().map(|&j| times[j]).collect();
    let conc = concentration_from_curves(&probe_times, &probe_curves);

    let report = LimiterReport {
        estimate: est.estimate,
        clamped: est.clamped,
        ci: est.ci,
        replicates: est.replicates,
        horizon,
        window: est.window,
        seeds: &seeds,
        spec_sha256: &run.spec_sha256,
        limited: sup.limited,
        implied_limiter: sup.implied_limiter,
        best_rate: sup.fits[sup.best].rate,
        fits: &sup.fits,
        concentration_times: probe_times.clone(),
        concentration_slope: conc.slope,
    };
    run.staging.write_json("report.json", &report)?;
    let mut csv = Csv::new(&["t", "theta_mean", "sigma", "m_bar"]);
    for (j, t) in times.iter().enumerate() {
        let column: Vec<f64> = curves.iter().map(|c| c[j] as f64).collect();
        let (_, sigma) = mean_sd(&column);
        csv.row(&[t, &est.mean_theta[j], &sigma, &sup.infimum[j]]);
    }
    run.staging.write("curves.csv", &csv.into_bytes())?;
    let mut reps = Csv::new(&["seed", "estimate"]);
    for (s, e) in seeds.iter().zip(&est.replicate_estimates) {
        reps.row(&[s, e]);
    }
    run.staging.write("replicates.csv", &reps.into_bytes())?;
    let mean: Vec<(f64, f64)> = times.iter().copied().zip(est.mean_theta.iter().copied()).collect();
    let reference: Vec<(f64, f64)> = [0.0, horizon].iter().map(|&t| (t, -eff.a0 * t)).collect();
    run.svg(
        "theta.svg",
        Chart {
            title: "Mean crossing count",
            x_label: "t",
            y_label: "theta",
            scale: Scale::Linear,
        },
        &[Series::new("replicate mean", mean), Series::new("-A0 t", reference).dashed()],
    )?;
    run.seeds = seeds.clone();
    run.summary = json!({
        "estimate": est.estimate,
        "ci": est.ci,
        "a0": eff.a0,
        "limited": sup.limited,
    });
    Ok(())
}

pub fn solve_macro(run: &mut Run) -> Result<()> {
    let eff = compute_effective(&run.spec)?;
    let level = run.cfg.level.unwrap_or(eff.a0);
    let profile = junction_profile(&eff, level)?;
    let (dx, reach) = (run.cfg.dx, run.cfg.reach);
    let mut grid_csv = Csv::new(&["t", "x", "k", "value"]);
    let mut closed_csv = Csv::new(&["t", "x", "k", "value"]);
    let mut worst: f64 = 0.0;
    let mut last = None;
    for &t in &run.cfg.times {
        let sol = flat_grid_solution(&eff, level, dx, reach, t)?;
        let nodes = (reach / dx).round() as usize;
        for k in 0..eff.roads.len() {
            for j in usize::from(k > 0)..=nodes {
                let d = sol.grid.distance(j);
                let x = if k == 0 { -d } else { d };
                let v = sol.values[k][j];
                let exact = closed_form_nu(&eff, &profile, x, k, t);
                worst = worst.max((v - exact).abs());
                grid_csv.row(&[&t, &x, &k, &v]);
                closed_csv.row(&[&t, &x, &k, &exact]);
            }
        }
        last = Some(sol);
    }
    run.staging.write("solution.csv", &grid_csv.into_bytes())?;
    run.staging.write("closed_form.csv", &closed_csv.into_bytes())?;
    let sol = last.context("no sample times given")?;
    let nodes = (reach / dx).round() as usize;
    let mut series = Vec::new();
    for k in 0..eff.roads.len() {
        let side = |j: usize| if k == 0 { -sol.grid.distance(j) } else { sol.grid.distance(j) };
        let grid: Vec<(f64, f64)> = (0..=nodes).map(|j| (side(j), sol.values[k][j])).collect();
        let exact: Vec<(f64, f64)> = (0..=nodes)
            .map(|j| (side(j), closed_form_nu(&eff, &profile, side(j), k, sol.t)))
            .collect();
        series.push(Series::new(format!("road {k}"), grid));
        series.push(Series::new(format!("road {k} exact"), exact).dashed());
    }
    run.svg(
        "profile.svg",
        Chart {
            title: &format!("Flat-datum solution at t = {}", sol.t),
            x_label: "x",
            y_label: "nu",
            scale: Scale::Linear,
        },
        &series,
    )?;
    run.summary = json!({
        "level": level,
        "a0": eff.a0,
        "dt": sol.grid.dt,
        "steps": sol.steps,
        "node": sol.node(),
        "max_error_vs_closed_form": worst,
    });
    Ok(())
}

pub fn compare(run: &mut Run) -> Result<()> {
    let law = run.law()?;
    let spec = run.spec.clone();
    let eff = compute_effective(&spec)?;
    let (level, estimate) = match run.cfg.level {
        Some(l) => (l, None),
        None => {
            let seeds = replicate_seeds(run.cfg.seed, run.cfg.replicates);
            let est = estimate_flux_limiter(&spec, law.as_ref(), &eff, &seeds, run.cfg.horizon)?;
            run.seeds = seeds;
            (est.clamped.min(-1e-9), Some(est))
        }
    };
    let cfg = CompareConfig {
        eps: run.cfg.eps.clone(),
        times: run.cfg.times.clone(),
        distances: run.cfg.distances.clone(),
        labels: run.cfg.labels.clone(),
        dx: run.cfg.dx,
        seed: run.cfg.seed,
    };
    let runs = micro_macro_compare(&spec, law.as_ref(), &eff, level, &cfg)?;
    if !run.seeds.contains(&run.cfg.seed) {
        run.seeds.push(run.cfg.seed);
    }
    let mut table = Csv::new(&["eps", "dx", "micro_vs_closed", "micro_vs_grid", "grid_vs_closed"]);
    let mut duality = Csv::new(&["eps", "road", "value"]);
    let mut roads = Csv::new(&["eps", "road", "value"]);
    for r in &runs {
        let row = &r.row;
        table.row(&[&row.eps, &row.dx, &row.micro_vs_closed, &row.micro_vs_grid, &row.grid_vs_closed]);
        for (k, d) in row.duality.iter().enumerate() {
            duality.row(&[&row.eps, &k, d]);
        }
        for (k, e) in row.road_errors.iter().enumerate() {
            roads.row(&[&row.eps, &k, e]);
        }
        let mut nu = Vec::new();
        write_nu_csv(&mut nu, &r.trace)?;
        run.staging.write(&format!("nu-eps{}.csv", row.eps), &nu)?;
    }
    run.staging.write("compare.csv", &table.into_bytes())?;
    run.staging.write("duality.csv", &duality.into_bytes())?;
    run.staging.write("road_errors.csv", &roads.into_bytes())?;

    let pick = |f: fn(&ftl_junction::macro_solver::CompareRow) -> f64| -> Vec<(f64, f64)> {
        runs.iter().map(|r| (r.row.eps, f(&r.row))).collect()
    };
    run.svg(
        "errors.svg",
        Chart {
            title: "Sup errors against scale",
            x_label: "eps",
            y_label: "error",
            scale: Scale::Log,
        },
        &[
            Series::new("micro vs closed", pick(|r| r.micro_vs_closed)),
            Series::new("micro vs grid", pick(|r| r.micro_vs_grid)),
            Series::new("grid vs closed", pick(|r| r.grid_vs_closed)),
        ],
    )?;
    let finest = runs
        .iter()
        .min_by(|a, b| a.row.eps.total_cmp(&b.row.eps))
        .context("no scales given")?;
    let frame = finest.trace.frames.last().context("no sample times given")?;
    let profile = junction_profile(&eff, level)?;
    let mut series = Vec::new();
    for k in 0..=spec.roads {
        let xs: Vec<f64> = cfg
            .distances
            .iter()
            .map(|&d| if k == 0 { -d } else { d })
            .collect();
        series.push(Series::new(
            format!("road {k}"),
            xs.iter().copied().zip(frame.nu[k].iter().copied()).collect(),
        ));
        series.push(
            Series::new(
                format!("road {k} limit"),
                xs.iter().map(|&x| (x, closed_form_nu(&eff, &profile, x, k, frame.t))).collect(),
            )
            .dashed(),
        );
    }
    run.svg(
        "nu.svg",
        Chart {
            title: &format!("Scaled counts at t = {}, eps = {}", frame.t, finest.row.eps),
            x_label: "x",
            y_label: "nu",
            scale: Scale::Linear,
        },
        &series,
    )?;
    run.summary = json!({
        "level": level,
        "a0": eff.a0,
        "estimate": estimate.as_ref().map(|e| json!({ "value": e.estimate, "ci": e.ci, "horizon": e.horizon })),
        "rows": runs.iter().map(|r| &r.row).collect::<Vec<_>>(),
    });
    Ok(())
}

pub fn diagnostics(run: &mut Run) -> Result<()> {
    let law = run.law()?;
    let spec = run.spec.clone();
    let eff = compute_effective(&spec)?;
    let assumptions = validate_assumptions(law.as_ref(), &spec);
    let floor = velocity_floor(&spec, law.as_ref(), &eff);
    let seeds = replicate_seeds(run.cfg.seed, run.cfg.replicates.max(2));
    let alpha = estimate_alpha(&spec, &seeds, 1_000)?;

    let growth = propagation_growth(law.as_ref());
    let steps = ((growth + 1e3f64.ln()) / 2f64.ln()).ceil() as usize;
    let back = (8.0 * spec.roads as f64 / spec.min_route_weight() * steps as f64).ceil() as i64 + 400;
    let real = Realization::sample(&spec, run.cfg.seed, -back, 300)?;
    let base = flat_initial_condition(&real, &eff.spacings(), &eff.steady_speeds(), spec.delta_min)?;
    let cfg = SimConfig::for_law(law.as_ref(), &spec);
    let speed = finite_speed_check(law.as_ref(), &spec, &real, &base, -50, 150, 10.0, steps, 1.0, cfg)?;

    let span = 2_000;
    let corr_real = Realization::sample(&spec, run.cfg.seed, -span - 16, span + 16)?;
    let corrector = build_corrector(&corr_real, &spec, &eff, 0, span)?;
    let corrector_violations = corrector_lipschitz_violations(&corrector, &corr_real, spec.e_max).len();

    if !assumptions.is_clean() {
        run.failed_checks.push("assumptions".into());
    }
    if !(floor > 0.0) {
        run.failed_checks.push("velocity_floor".into());
    }
    if corrector_violations > 0 {
        run.failed_checks.push("corrector_lipschitz".into());
    }
    if speed.max_deviation > speed.decay * speed.initial_leader_deviation {
        run.failed_checks.push("finite_speed".into());
    }
    let report = json!({
        "assumptions": assumptions,
        "velocity_floor": floor,
        "theta_increment_constant": theta_increment_constant(&spec, &eff, floor),
        "nu_lipschitz_constants": (0..=spec.roads).map(|k| nu_lipschitz_constant(&spec, k)).collect::<Vec<_>>(),
        "propagation_growth": growth,
        "alpha": { "mean": alpha.alpha, "ci_half_width": alpha.ci_half_width, "steps": alpha.steps },
        "finite_speed": speed,
        "corrector": { "span": span, "violations": corrector_violations },
    });
    run.staging.write_json("diagnostics.json", &report)?;
    let mut csv = Csv::new(&["seed", "alpha"]);
    for (s, a) in seeds.iter().zip(&alpha.per_replicate) {
        csv.row(&[s, a]);
    }
    run.staging.write("alpha.csv", &csv.into_bytes())?;
    run.seeds = seeds;
    run.summary = json!({ "failed_checks": run.failed_checks, "velocity_floor": floor, "alpha": alpha.alpha });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_times_cover_the_horizon() {
        assert_eq!(sample_times(3.0, 1.0), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(sample_times(2.5, 1.0), vec![0.0, 1.0, 2.0, 2.5]);
    }
}
