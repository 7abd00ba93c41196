//! Acceptance criteria, one report line each. Exits nonzero when any
//! criterion fails.

use std::sync::OnceLock;
use std::time::Duration;

use ftl_junction::homog::{check_convexity, compute_effective, junction_profile, EffectiveModel};
use ftl_junction::limiter::{
    build_corrector, concentration_diagnostic, corrector_lipschitz_violations, estimate_flux_limiter,
    LimiterEstimate,
};
use ftl_junction::macro_solver::{closed_form_nu, flat_grid_solution, micro_macro_compare, CompareConfig, CompareRun};
use ftl_junction::micro_sim::{
    check_ordering, flat_initial_condition, nu_lipschitz_constant, theta, theta_increment_constant, velocity_floor,
    SimConfig, Simulator,
};
use ftl_junction::model::{
    estimate_alpha, FreeRoadLaw, JunctionLaw, ModelSpec, Realization, VehicleType, VelocityLaw, VelocityProfile,
};
use ftl_junction::seeds::replicate_seeds;
use ftl_junction::stats::{linear_fit, linspace};
use ftl_validation::{check, Outcome, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Independent homogenization oracle

fn invert(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Effective velocity at spacing `e` from `(weight, inverse profile)` pairs:
/// the speed at which the expected spacing equals `e`.
fn velocity_oracle(parts: &[(f64, fn(f64) -> f64)], v_bar: f64, e: f64) -> f64 {
    let g = |v: f64| parts.iter().map(|(w, inv)| w * inv(v)).sum::<f64>();
    if e <= g(0.0) {
        0.0
    } else if e >= g(v_bar) {
        v_bar
    } else {
        invert(g, e, 0.0, v_bar)
    }
}

/// Minimum of `p V(-1/(weight p))` over a `1e-4` grid in `p`; returns the
/// spacing `-1/p` at the largest minimizing `p` and the minimum.
fn grid_argmin(v: impl Fn(f64) -> f64, weight: f64) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    let n = (2.0 / weight / 1e-4) as usize;
    for i in 1..=n {
        let p = -(i as f64) * 1e-4;
        let h = p * v(-1.0 / (weight * p));
        if h < best.1 - 1e-13 {
            best = (p, h);
        }
    }
    (-1.0 / best.0, best.1)
}

fn slope1_inverse(v: f64) -> f64 {
    1.0 + v
}

fn slope2_inverse(v: f64) -> f64 {
    1.0 + v / 2.0
}

fn criterion_1() -> Verdict {
    let tol = 1e-3;
    let two = compute_effective(&ModelSpec::two_type()).map_err(err)?;
    let parts: [(f64, fn(f64) -> f64); 2] = [(0.5, slope1_inverse), (0.5, slope2_inverse)];
    let r0 = two.road(0);
    let v_err = (0..=300)
        .map(|j| 1.0 + 0.01 * j as f64)
        .map(|e| (r0.velocity.eval(e).min(r0.v_bar) - velocity_oracle(&parts, 2.0, e)).abs())
        .fold(0.0, f64::max);
    let (e0, h0) = grid_argmin(|e| velocity_oracle(&parts, 2.0, e), 1.0);
    let two_ok = v_err <= tol
        && (r0.spacing - e0).abs() <= tol
        && (r0.h_min - h0).abs() <= tol
        && (r0.spacing - 2.5).abs() <= tol
        && (r0.h_min + 0.8).abs() <= tol;

    let sym = compute_effective(&ModelSpec::sym_two_roads()).map_err(err)?;
    let v = |s: f64| (s - 1.0).clamp(0.0, 2.0);
    let mut oracle_a0 = f64::NEG_INFINITY;
    let mut spacing_ok = true;
    for (k, (weight, target)) in [(1.0, 3.0), (0.5, 1.5), (0.5, 1.5)].into_iter().enumerate() {
        let (e, h) = grid_argmin(v, weight);
        oracle_a0 = oracle_a0.max(h);
        let r = sym.road(k);
        spacing_ok &= (r.spacing - e).abs() <= tol && (r.spacing - target).abs() <= tol;
    }
    let target_a0 = -4.0 / 3.0;
    let a0_ok = (sym.a0 - target_a0).abs() <= tol;
    Ok((
        two_ok && spacing_ok && a0_ok,
        format!(
            "two-type: e0 {:.4} (oracle {e0:.4}), min H0 {:.4} (oracle {h0:.4}), velocity error {v_err:.1e}; \
             sym: spacings ({:.3}, {:.3}, {:.3}), A0 {:.4} (oracle {oracle_a0:.4}, target {target_a0:.4})",
            r0.spacing,
            r0.h_min,
            sym.road(0).spacing,
            sym.road(1).spacing,
            sym.road(2).spacing,
            sym.a0
        ),
    ))
}

// ---------------------------------------------------------------------------
// Convexity

/// Concave increasing piecewise-linear profile from `delta_min = 1`.
fn random_profile(rng: &mut ChaCha8Rng) -> VelocityProfile {
    let n = rng.gen_range(1..4);
    let mut slopes: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
    slopes.sort_by(|a, b| b.total_cmp(a));
    let mut bp = vec![1.0];
    let mut vals = vec![0.0];
    for (j, s) in slopes.iter().enumerate() {
        let w = rng.gen_range(0.1..1.0);
        bp.push(bp[j] + w);
        vals.push(vals[j] + s * w);
    }
    VelocityProfile::new(bp, vals).expect("valid profile")
}

fn random_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    let roads = rng.gen_range(1..4);
    let n = rng.gen_range(roads..roads + 3);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let types: Vec<VehicleType> = raw
        .iter()
        .enumerate()
        .map(|(z, w)| VehicleType {
            name: format!("t{z}"),
            route: 1 + z % roads,
            weight: w / total,
            incoming: random_profile(rng),
            outgoing: random_profile(rng),
        })
        .collect();
    let e_max = types
        .iter()
        .flat_map(|t| [t.incoming.h_max(), t.outgoing.h_max()])
        .fold(0.0, f64::max);
    ModelSpec {
        name: "random".into(),
        roads,
        delta_min: 1.0,
        e_max,
        radii: [e_max + 3.0, e_max + 2.0, e_max + 1.0, e_max],
        kappa: None,
        types,
    }
}

/// Smallest second difference of `H` on a uniform grid over the whole
/// domain `[-1 / (weight delta_min), 0]`, which contains the asserted
/// convexity interval.
fn min_second_difference(eff: &EffectiveModel) -> f64 {
    let n = 4000;
    eff.roads
        .iter()
        .map(|r| {
            let lo = -1.0 / (r.weight * eff.delta_min);
            let h: Vec<f64> = (0..=n).map(|j| r.h(lo * (1.0 - j as f64 / n as f64))).collect();
            h.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut specs = vec![ModelSpec::two_type(), ModelSpec::sym_two_roads()];
    for _ in 0..20 {
        let spec = random_spec(&mut rng);
        spec.validate().map_err(err)?;
        specs.push(spec);
    }
    let mut worst = f64::INFINITY;
    let mut failed = 0;
    for spec in &specs {
        let eff = compute_effective(spec).map_err(err)?;
        let d2 = min_second_difference(&eff);
        worst = worst.min(d2);
        if !check_convexity(&eff).passed() || d2 < -1e-9 {
            failed += 1;
        }
    }
    Ok((
        failed == 0,
        format!("{} specs, {failed} failing, smallest second difference {worst:.2e}", specs.len()),
    ))
}

// ---------------------------------------------------------------------------
// Simulator invariants

fn criterion_3() -> Verdict {
    let spec = ModelSpec::sym_two_roads();
    let eff = compute_effective(&spec).map_err(err)?;
    let law = JunctionLaw::new(&spec).map_err(err)?;
    let floor = velocity_floor(&spec, &law, &eff);
    let c_theta = theta_increment_constant(&spec, &eff, floor);
    // Ordering is only audited up to tau_ord, which the law can turn into
    // a speed deficit of at most L tau_ord.
    let slack = law.bounds().lipschitz() * SimConfig::for_law(&law, &spec).tau_ord;
    let times: Vec<f64> = (0..=100).map(|t| t as f64).collect();
    let seeds = replicate_seeds(3, 16);
    let results: Vec<Result<(usize, f64, f64, u64), String>> = {
        use std::thread;
        thread::scope(|s| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| {
                    let (spec, law, eff, times) = (&spec, &law, &eff, &times);
                    s.spawn(move || -> Result<(usize, f64, f64, u64), String> {
                        let real = Realization::sample(spec, seed, -1000, 999).map_err(err)?;
                        let mut state =
                            flat_initial_condition(&real, &eff.spacings(), &eff.steady_speeds(), spec.delta_min)
                                .map_err(err)?;
                        let cfg = SimConfig::for_law(law, spec);
                        let sim = Simulator::new(law, &real, spec, cfg).map_err(err)?;
                        let mut violations = 0;
                        let mut thetas = Vec::new();
                        sim.run(&mut state, times, |st| {
                            violations += check_ordering(st, &real, spec, cfg.tau_ord).len();
                            thetas.push(theta(st)?);
                            Ok(())
                        })
                        .map_err(err)?;
                        let mut excess = f64::NEG_INFINITY;
                        for a in 0..thetas.len() {
                            for b in a..thetas.len() {
                                let inc = thetas[b] as f64 - thetas[a] as f64;
                                let bound = c_theta * (times[b] - times[a] + 1.0);
                                excess = excess.max((-inc).max(inc - bound));
                            }
                        }
                        Ok((violations, state.stats.min_step_velocity, excess, state.stats.halvings))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let mut violations = 0;
    let mut min_speed = f64::INFINITY;
    let mut excess = f64::NEG_INFINITY;
    let mut halvings = 0;
    for r in results {
        let (v, m, e, h) = r?;
        violations += v;
        min_speed = min_speed.min(m);
        excess = excess.max(e);
        halvings += h;
    }
    Ok((
        violations == 0 && floor > 0.0 && min_speed >= floor - slack && excess <= 0.0,
        format!(
            "16 runs: {violations} ordering violations, {halvings} step halvings, min speed floor {floor} {:+.1e} (slack \
             {slack:.1e}), worst increment excess {excess:.2} (C = {c_theta:.2})",
            min_speed - floor
        ),
    ))
}

// ---------------------------------------------------------------------------
// Propagation statistics

fn criterion_4() -> Verdict {
    let seeds = replicate_seeds(4, 64);
    let sym = ModelSpec::sym_two_roads();
    let short = estimate_alpha(&sym, &seeds, 1_000).map_err(err)?;
    let long = estimate_alpha(&sym, &seeds, 10_000).map_err(err)?;
    let drift = (long.alpha / short.alpha - 1.0).abs();
    let single = estimate_alpha(&ModelSpec::two_type(), &seeds, 1_000).map_err(err)?;
    Ok((
        drift <= 0.02 && single.alpha == 1.0 && single.per_replicate.iter().all(|&a| a == 1.0),
        format!(
            "alpha {:.4} at n=1e3, {:.4} at n=1e4 (drift {:.2}%); one route: {}",
            short.alpha,
            long.alpha,
            100.0 * drift,
            single.alpha
        ),
    ))
}

// ---------------------------------------------------------------------------
// Corrector

fn criterion_5() -> Verdict {
    let n = 10_000i64;
    let mut worst_slope: f64 = 0.0;
    let mut violations = 0;
    for spec in [ModelSpec::sym_two_roads(), ModelSpec::two_type()] {
        let eff = compute_effective(&spec).map_err(err)?;
        let real = Realization::sample(&spec, 5, -n - 16, n + 16).map_err(err)?;
        let seq = build_corrector(&real, &spec, &eff, 0, n).map_err(err)?;
        violations += corrector_lipschitz_violations(&seq, &real, spec.e_max).len();
        for k in 0..=spec.roads {
            let (xs, ys): (Vec<f64>, Vec<f64>) = (seq.lo..=seq.hi())
                .filter(|&i| if k == 0 { i <= 0 } else { i > 0 && real.route_of(i) == k })
                .map(|i| (i as f64, seq.get(i)))
                .unzip();
            let slope = linear_fit(&xs, &ys).0;
            worst_slope = worst_slope.max((slope / eff.road(k).spacing - 1.0).abs());
        }
    }
    Ok((
        violations == 0 && worst_slope <= 0.03,
        format!(
            "window 2e4 on both specs: {violations} Lipschitz violations, worst slope deviation {:.2}%",
            100.0 * worst_slope
        ),
    ))
}

// ---------------------------------------------------------------------------
// Concentration

fn criterion_6() -> Verdict {
    let spec = ModelSpec::two_type();
    let eff = compute_effective(&spec).map_err(err)?;
    let law = JunctionLaw::new(&spec).map_err(err)?;
    let times = [25.0, 50.0, 100.0, 200.0];
    let report = concentration_diagnostic(&spec, &law, &eff, &replicate_seeds(6, 256), &times).map_err(err)?;
    let decreasing = report.sigma_over_t.windows(2).all(|w| w[1] < w[0]);
    let slope = report.slope;
    let slope_ok = slope.is_some_and(|s| (0.3..=0.7).contains(&s));
    Ok((
        decreasing && slope_ok,
        format!(
            "two-type, 256 replicates: sigma/t {:?}, log-log slope {}",
            report.sigma_over_t.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>(),
            slope.map_or("degenerate".into(), |s| format!("{s:.3}"))
        ),
    ))
}

// ---------------------------------------------------------------------------
// Flux limiter

const LIMITER_REPLICATES: usize = 64;
const LIMITER_HORIZON: f64 = 200.0;

fn sym_limiter() -> &'static Result<LimiterEstimate, String> {
    static CELL: OnceLock<Result<LimiterEstimate, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = ModelSpec::sym_two_roads();
        let eff = compute_effective(&spec).map_err(err)?;
        let law = JunctionLaw::new(&spec).map_err(err)?;
        let seeds = replicate_seeds(7, LIMITER_REPLICATES);
        estimate_flux_limiter(&spec, &law, &eff, &seeds, LIMITER_HORIZON).map_err(err)
    })
}

fn criterion_7() -> Verdict {
    let seeds = replicate_seeds(7, LIMITER_REPLICATES);
    let profile = VelocityProfile::new(vec![1.0, 3.0], vec![0.0, 2.0]).map_err(err)?;
    let control = ModelSpec::single_type(profile, 3.0, [4.0, 3.0, 2.0, 1.0]).map_err(err)?;
    let control_eff = compute_effective(&control).map_err(err)?;
    let free = FreeRoadLaw::new(&control);
    let c = estimate_flux_limiter(&control, &free, &control_eff, &seeds, LIMITER_HORIZON).map_err(err)?;
    let control_ok = (c.estimate - control_eff.a0).abs() <= c.ci;

    let spec = ModelSpec::sym_two_roads();
    let eff = compute_effective(&spec).map_err(err)?;
    let law = JunctionLaw::new(&spec).map_err(err)?;
    let j = sym_limiter().as_ref().map_err(Clone::clone)?;
    let range_ok = j.estimate >= eff.a0 - 3.0 * j.ci && j.estimate <= 0.0;
    let half = estimate_flux_limiter(&spec, &law, &eff, &seeds, LIMITER_HORIZON / 2.0).map_err(err)?;
    let shift = (j.estimate - half.estimate).abs();
    let doubling_ok = shift < 2.0 * j.ci;
    Ok((
        control_ok && range_ok && doubling_ok,
        format!(
            "control {:.4} vs A0 {:.4} (ci {:.4}); junction {:.4} vs A0 {:.4} (ci {:.4}); doubling shift {shift:.4} \
             vs width {:.4}",
            c.estimate,
            control_eff.a0,
            c.ci,
            j.estimate,
            eff.a0,
            j.ci,
            2.0 * j.ci
        ),
    ))
}

// ---------------------------------------------------------------------------
// Macro scheme

fn criterion_8() -> Verdict {
    let eff = compute_effective(&ModelSpec::sym_two_roads()).map_err(err)?;
    let profile = junction_profile(&eff, eff.a0).map_err(err)?;
    let reach = 3.0;
    let mut errors = Vec::new();
    for dx in [0.04, 0.02, 0.01] {
        let sol = flat_grid_solution(&eff, eff.a0, dx, reach, 1.0).map_err(err)?;
        let mut worst: f64 = 0.0;
        for k in 0..eff.roads.len() {
            for j in 0..=(reach / dx).round() as usize {
                let d = sol.grid.distance(j);
                let x = if k == 0 { -d } else { d };
                worst = worst.max((sol.values[k][j] - closed_form_nu(&eff, &profile, x, k, 1.0)).abs());
            }
        }
        errors.push((dx, worst));
    }
    let bound_ok = errors.iter().all(|(dx, e)| *e <= 2.0 * dx);
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let ratio_ok = ratios.iter().all(|r| (1.6..=2.4).contains(r));
    Ok((
        bound_ok && ratio_ok,
        format!(
            "errors {}; ratios {}",
            errors.iter().map(|(dx, e)| format!("{e:.4} at dx={dx}")).collect::<Vec<_>>().join(", "),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// Micro-macro comparison

fn compare_runs() -> &'static Result<(f64, Vec<CompareRun>), String> {
    static CELL: OnceLock<Result<(f64, Vec<CompareRun>), String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = ModelSpec::sym_two_roads();
        let eff = compute_effective(&spec).map_err(err)?;
        let law = JunctionLaw::new(&spec).map_err(err)?;
        let est = sym_limiter().as_ref().map_err(Clone::clone)?;
        // The solver needs a level in [A0, 0).
        let level = est.clamped.min(-1e-9);
        let cfg = CompareConfig {
            eps: vec![0.1, 0.05, 0.025],
            times: linspace(0.0, 2.0, 5),
            distances: linspace(0.0, 1.0, 11),
            labels: linspace(-0.3, 0.3, 13),
            dx: 0.01,
            seed: 2024,
        };
        let runs = micro_macro_compare(&spec, &law, &eff, level, &cfg).map_err(err)?;
        Ok((level, runs))
    })
}

fn criterion_9() -> Verdict {
    let (level, runs) = compare_runs().as_ref().map_err(Clone::clone)?;
    let errs: Vec<f64> = runs.iter().map(|r| r.row.micro_vs_closed).collect();
    let nonincreasing = errs.windows(2).all(|w| w[1] <= 1.2 * w[0]);
    let last = errs[errs.len() - 1];
    let roads: Vec<String> = runs
        .iter()
        .map(|r| {
            r.row
                .road_errors
                .iter()
                .map(|e| format!("{e:.3}"))
                .collect::<Vec<_>>()
                .join("/")
        })
        .collect();
    Ok((
        nonincreasing && last <= 0.15,
        format!(
            "level {level:.4}; sup errors {} at eps 0.1/0.05/0.025 (per road {})",
            errs.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>().join(", "),
            roads.join(", ")
        ),
    ))
}

fn criterion_10() -> Verdict {
    let spec = ModelSpec::sym_two_roads();
    let (_, runs) = compare_runs().as_ref().map_err(Clone::clone)?;
    let inv_weight = (1..=spec.roads).map(|k| 1.0 / spec.route_weight(k)).fold(1.0, f64::max);
    let constants: Vec<f64> = (0..=spec.roads).map(|k| nu_lipschitz_constant(&spec, k)).collect();
    let mut duality_ok = true;
    let mut lipschitz_ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let bound = r.row.eps * inv_weight + 1e-6;
        duality_ok &= r.row.duality.iter().all(|&d| d <= bound);
        let excess = r.trace.lipschitz_excess(&constants);
        lipschitz_ok &= excess <= 0.0;
        parts.push(format!(
            "eps {}: duality {} vs {bound:.3}, Lipschitz excess {excess:.3}",
            r.row.eps,
            r.row.duality.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>().join("/")
        ));
    }
    Ok((duality_ok && lipschitz_ok, parts.join("; ")))
}

fn main() {
    let criteria: Vec<(&str, &str, u64, fn() -> Verdict)> = vec![
        ("1", "homogenization oracle", 1, criterion_1),
        ("2", "Hamiltonian convexity", 5, criterion_2),
        ("3", "simulator invariants", 120, criterion_3),
        ("4", "propagation statistics", 30, criterion_4),
        ("5", "corrector bounds and slopes", 10, criterion_5),
        ("6", "concentration of crossing counts", 900, criterion_6),
        ("7", "flux limiter sanity", 900, criterion_7),
        ("8", "macro scheme against closed form", 60, criterion_8),
        ("9", "micro-macro convergence", 1200, criterion_9),
        ("10", "count/position duality and Lipschitz bound", 1200, criterion_10),
    ];
    let mut outcomes: Vec<Outcome> = Vec::new();
    for (id, title, budget, body) in criteria {
        let outcome = check(id, title, secs(budget), body);
        println!("{outcome}");
        outcomes.push(outcome);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.id.as_str()).collect();
    println!(
        "\nacceptance: {} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
