use ftl_junction::homog::{compute_effective, junction_profile, EffectiveModel};
use ftl_junction::macro_solver::*;
use ftl_junction::model::ModelSpec;
use proptest::prelude::*;

fn sym() -> EffectiveModel {
    compute_effective(&ModelSpec::sym_two_roads()).unwrap()
}

/// Hand-derived flat solution on the symmetric spec at the lowest level:
/// `d / 3 + 2t / 3` upstream, and downstream the minimum of the free
/// branch `-2x / 3 + 4t / 3` and the node branch `-x / 3 + 2t / 3`.
fn sym_flat_oracle(x: f64, t: f64) -> f64 {
    if x <= 0.0 {
        -x / 3.0 + 2.0 * t / 3.0
    } else {
        (-x / 3.0 + 2.0 * t / 3.0).min(-2.0 * x / 3.0 + 4.0 * t / 3.0)
    }
}

fn max_grid_error(eff: &EffectiveModel, sol: &GridSolution, level: f64, reach: f64) -> f64 {
    let profile = junction_profile(eff, level).unwrap();
    let mut err: f64 = 0.0;
    for k in 0..eff.roads.len() {
        for j in 0..=(reach / sol.grid.dx).round() as usize {
            let d = sol.grid.distance(j);
            let x = if k == 0 { -d } else { d };
            err = err.max((sol.values[k][j] - closed_form_nu(eff, &profile, x, k, sol.t)).abs());
        }
    }
    err
}

#[test]
fn closed_form_matches_hand_oracle() {
    let eff = sym();
    assert!((eff.a0 + 2.0 / 3.0).abs() < 1e-9);
    let profile = junction_profile(&eff, eff.a0).unwrap();
    for t in [0.0, 0.5, 1.0, 2.0] {
        for j in -40..=40 {
            let x = j as f64 * 0.1;
            for k in 1..=2 {
                let got = closed_form_nu(&eff, &profile, x, k, t);
                assert!((got - sym_flat_oracle(x, t)).abs() < 1e-6, "x {x} t {t}");
            }
        }
    }
}

#[test]
fn closed_form_starts_from_flat_datum() {
    for eff in [sym(), compute_effective(&ModelSpec::two_type()).unwrap()] {
        for level in [eff.a0, eff.a0 / 2.0] {
            let profile = junction_profile(&eff, level).unwrap();
            for j in -30..=30 {
                let x = j as f64 * 0.1;
                for k in 1..eff.roads.len() {
                    let road = if x <= 0.0 { 0 } else { k };
                    let datum = -x / eff.road(road).spacing;
                    assert!((closed_form_nu(&eff, &profile, x, k, 0.0) - datum).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn closed_form_is_nonincreasing_in_level() {
    let eff = sym();
    let levels = [eff.a0, -0.5, -0.3, -0.1];
    for w in levels.windows(2) {
        let lo = junction_profile(&eff, w[0]).unwrap();
        let hi = junction_profile(&eff, w[1]).unwrap();
        for j in -20..=20 {
            let x = j as f64 * 0.1;
            let a = closed_form_nu(&eff, &lo, x, 1, 1.5);
            let b = closed_form_nu(&eff, &hi, x, 1, 1.5);
            assert!(b <= a + 1e-12);
        }
    }
}

#[test]
fn constant_data_stays_constant() {
    let eff = sym();
    let grid = JunctionGrid::new(&eff, 0.05, 40);
    let init = sample_initial(&eff, &grid, |_, _| 1.25);
    let sol = solve_hj(&eff, eff.a0, init, grid, 1.0).unwrap();
    assert!(sol.values.iter().flatten().all(|&v| v == 1.25));
}

#[test]
fn grid_tracks_closed_form_at_lowest_level() {
    let eff = sym();
    for dx in [0.04, 0.02] {
        let sol = flat_grid_solution(&eff, eff.a0, dx, 3.0, 1.0).unwrap();
        let err = max_grid_error(&eff, &sol, eff.a0, 3.0);
        assert!(err <= 2.0 * dx, "dx {dx}: {err}");
    }
}

#[test]
fn grid_tracks_closed_form_above_lowest_level() {
    let eff = sym();
    let level = -0.4;
    let sol = flat_grid_solution(&eff, level, 0.02, 3.0, 1.0).unwrap();
    assert!(max_grid_error(&eff, &sol, level, 3.0) < 0.03);
    assert!((sol.node() + level * 1.0).abs() < 0.02);
}

#[test]
fn node_drifts_at_the_limiter_rate() {
    let eff = sym();
    for level in [eff.a0, -0.5, -0.2] {
        let sol = flat_grid_solution(&eff, level, 0.02, 1.0, 2.0).unwrap();
        assert!((sol.node() + 2.0 * level).abs() < 1e-9, "level {level}: {}", sol.node());
    }
}

#[test]
fn grid_is_nonincreasing_in_level() {
    let eff = sym();
    let a = flat_grid_solution(&eff, eff.a0, 0.05, 2.0, 1.0).unwrap();
    let b = flat_grid_solution(&eff, -0.3, 0.05, 2.0, 1.0).unwrap();
    for (ra, rb) in a.values.iter().zip(&b.values) {
        for (va, vb) in ra.iter().zip(rb) {
            assert!(vb <= &(va + 1e-12));
        }
    }
}

#[test]
fn eval_interpolates_between_nodes() {
    let eff = sym();
    let sol = flat_grid_solution(&eff, eff.a0, 0.1, 1.0, 0.0).unwrap();
    assert_eq!(sol.steps, 0);
    assert!((sol.eval(-0.25, 1) - 0.25 / 3.0).abs() < 1e-12);
    assert!((sol.eval(0.25, 2) + 0.25 / 1.5).abs() < 1e-12);
}

#[test]
fn cfl_and_level_are_checked() {
    let eff = sym();
    let grid = JunctionGrid::new(&eff, 0.05, 20);
    let init = sample_initial(&eff, &grid, |x, _| -x);
    assert!(solve_hj(&eff, eff.a0, init.clone(), grid.with_dt(grid.dt * 1.5), 1.0).is_err());
    assert!(solve_hj(&eff, eff.a0 - 0.1, init.clone(), grid, 1.0).is_err());
    assert!(solve_hj(&eff, 0.0, init, grid, 1.0).is_err());
}

#[test]
fn half_line_matches_its_closed_form() {
    let eff = sym();
    let level = -0.5;
    let profile = junction_profile(&eff, level).unwrap();
    // Left root of the incoming Hamiltonian at -1/2 is -1/2.
    assert!((profile.roots[0].0 + 0.5).abs() < 1e-9);
    let oracle = |x: f64, t: f64| (-x / 3.0 + 2.0 * t / 3.0).min(-0.5 * x + 0.5 * t);
    let mut errors = Vec::new();
    for dx in [0.02, 0.01] {
        let m = (4.0 / dx) as usize;
        let initial: Vec<f64> = (0..=m).map(|j| j as f64 * dx / 3.0).collect();
        let dt = dx / (2.0 * eff.road(0).max_slope());
        let out = solve_half_line(eff.road(0), initial, dx, dt, 1.0, |t| 0.5 * t).unwrap();
        let mut err: f64 = 0.0;
        for (j, v) in out.iter().enumerate().take((2.0 / dx) as usize) {
            let x = -(j as f64) * dx;
            assert!((half_line_nu(&eff, &profile, x, 1.0) - oracle(x, 1.0)).abs() < 1e-9);
            err = err.max((v - oracle(x, 1.0)).abs());
        }
        errors.push(err);
    }
    assert!(errors[0] < 0.03 && errors[1] < errors[0], "{errors:?}");
}

fn bumps() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..0.2, 3 * 31)
}

proptest! {
    #[test]
    fn closed_form_inverse_round_trips(y in -2.0f64..2.0, t in 0.0f64..3.0, frac in 0.0f64..0.99, k in 1usize..3) {
        let eff = sym();
        let level = eff.a0 * (1.0 - frac);
        let profile = junction_profile(&eff, level).unwrap();
        let x = closed_form_u(&eff, &profile, y, k, t);
        prop_assert!((closed_form_nu(&eff, &profile, x, k, t) + y).abs() < 1e-9);
    }

    #[test]
    fn scheme_preserves_order(bump in bumps(), frac in 0.0f64..0.99) {
        let eff = sym();
        let level = eff.a0 * (1.0 - frac);
        let grid = JunctionGrid::new(&eff, 0.05, 30);
        let lower = sample_initial(&eff, &grid, |x, k| -x / eff.road(if x <= 0.0 { 0 } else { k }).spacing);
        let mut upper = lower.clone();
        // The far-field ghost follows the initial last increment, so the
        // last two nodes stay put to keep one boundary condition.
        for (k, row) in upper.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate().take(grid.nodes - 1) {
                *v += if j == 0 { bump[0] } else { bump[k * 31 + j - 1] };
            }
        }
        let a = solve_hj(&eff, level, lower, grid, 0.5).unwrap();
        let b = solve_hj(&eff, level, upper, grid, 0.5).unwrap();
        for (ra, rb) in a.values.iter().zip(&b.values) {
            for (va, vb) in ra.iter().zip(rb) {
                prop_assert!(va <= &(vb + 1e-12));
            }
        }
    }
}
