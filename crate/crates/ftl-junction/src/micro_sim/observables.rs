use serde::Serialize;

use super::integrate::theta;
use super::state::WindowState;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Realization};

/// Signed vehicle count through `x` for route `road >= 1`: route vehicles
/// with `i <= 0` ahead of `x` minus those with `i > 0` at or behind `x`.
/// Road 0 sums over all routes.
pub fn crossing_count(state: &WindowState, real: &Realization, road: usize, x: f64) -> i64 {
    scaled_crossing_count(state, real, road, 1.0, x)
}

/// Count through `x` in coordinates scaled by `eps`. Comparing `eps * U`
/// with `x` keeps `x = eps * U_i` exactly at vehicle `i`.
fn scaled_crossing_count(state: &WindowState, real: &Realization, road: usize, eps: f64, x: f64) -> i64 {
    let mut n = 0;
    for (j, &u) in state.positions.iter().enumerate() {
        let i = state.lo + j as i64;
        let u = eps * u;
        if road != 0 && real.route_of(i) != road {
            continue;
        }
        if i <= 0 && u > x {
            n += 1;
        } else if i > 0 && u <= x {
            n -= 1;
        }
    }
    n
}

/// Fails unless the window determines the count at `x` for `road`.
pub fn check_covered(state: &WindowState, real: &Realization, spec: &ModelSpec, road: usize, x: f64) -> Result<()> {
    let tail = state.positions[0];
    let uncovered = Err(Error::Uncovered { x, road });
    if tail > -spec.inner_radius() || x < tail || state.hi < 0 {
        return uncovered;
    }
    for k in 1..=spec.roads {
        if road != 0 && k != road {
            continue;
        }
        let last = (state.lo..=state.hi).rev().find(|&i| real.route_of(i) == k);
        match last {
            Some(i) if x < state.position(i) => {}
            _ => return uncovered,
        }
    }
    Ok(())
}

/// Scaled count `eps / pi_k * N(x / eps, k)` at the state's time.
pub fn scaled_nu(state: &WindowState, real: &Realization, spec: &ModelSpec, eps: f64, road: usize, x: f64) -> Result<f64> {
    check_covered(state, real, spec, road, x / eps)?;
    Ok(eps / spec.route_weight(road) * scaled_crossing_count(state, real, road, eps, x) as f64)
}

/// `[x]_k`: last index `<= x` on route `road`, or `floor(x)` on road 0.
pub fn route_floor(real: &Realization, road: usize, x: f64) -> Result<i64> {
    let top = x.floor() as i64;
    if road == 0 {
        return Ok(top);
    }
    let start = top.min(real.ext_hi());
    (real.lo()..=start)
        .rev()
        .find(|&i| real.route_of(i) == road)
        .ok_or(Error::WindowUnderflow {
            index: top,
            lo: real.lo(),
            hi: real.hi(),
        })
}

/// Scaled position `eps * U_{[y / eps]_k}`.
pub fn scaled_u(state: &WindowState, real: &Realization, eps: f64, road: usize, y: f64) -> Result<f64> {
    let i = route_floor(real, road, y / eps)?;
    if i < state.lo || i > state.hi {
        return Err(Error::WindowUnderflow {
            index: i,
            lo: state.lo,
            hi: state.hi,
        });
    }
    Ok(eps * state.position(i))
}

/// Observables at one sample time. Road 0 is sampled at `x = -d`, outgoing
/// roads at `x = d`, for each distance `d` of the grid.
#[derive(Debug, Clone, Serialize)]
pub struct ObservableFrame {
    /// Macroscopic time `eps * t`.
    pub t: f64,
    pub theta: u64,
    /// `nu[k][j]` at distance `distances[j]` on road `k`.
    pub nu: Vec<Vec<f64>>,
    /// Minus the difference quotient of `nu` in `x` between consecutive
    /// distances.
    pub rho: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservableTrace {
    pub eps: f64,
    pub distances: Vec<f64>,
    pub frames: Vec<ObservableFrame>,
}

/// Signed macroscopic coordinate of distance `d` on road `road`.
pub fn branch_x(road: usize, d: f64) -> f64 {
    if road == 0 {
        -d
    } else {
        d
    }
}

pub fn observe(
    state: &WindowState,
    real: &Realization,
    spec: &ModelSpec,
    eps: f64,
    distances: &[f64],
) -> Result<ObservableFrame> {
    let mut nu = Vec::with_capacity(spec.roads + 1);
    let mut rho = Vec::with_capacity(spec.roads + 1);
    for k in 0..=spec.roads {
        let vals = distances
            .iter()
            .map(|&d| scaled_nu(state, real, spec, eps, k, branch_x(k, d)))
            .collect::<Result<Vec<_>>>()?;
        let dens = distances
            .windows(2)
            .zip(vals.windows(2))
            .map(|(d, v)| {
                let (dx, dv) = (branch_x(k, d[1]) - branch_x(k, d[0]), v[1] - v[0]);
                -dv / dx
            })
            .collect();
        nu.push(vals);
        rho.push(dens);
    }
    Ok(ObservableFrame {
        t: eps * state.t,
        theta: theta(state)?,
        nu,
        rho,
    })
}

impl ObservableTrace {
    pub fn new(eps: f64, distances: Vec<f64>) -> Self {
        Self {
            eps,
            distances,
            frames: Vec::new(),
        }
    }

    /// Largest excess of `|nu(x, k, t) - nu(y, k, s)|` over
    /// `c_k (|x - y| + |t - s| + eps)` across all recorded pairs.
    pub fn lipschitz_excess(&self, constants: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (k, &c) in constants.iter().enumerate() {
            let pts: Vec<(f64, f64, f64)> = self
                .frames
                .iter()
                .flat_map(|f| {
                    self.distances
                        .iter()
                        .zip(&f.nu[k])
                        .map(move |(&d, &v)| (branch_x(k, d), f.t, v))
                })
                .collect();
            for (a, p) in pts.iter().enumerate() {
                for q in &pts[a + 1..] {
                    let excess = (p.2 - q.2).abs() - c * ((p.0 - q.0).abs() + (p.1 - q.1).abs() + self.eps);
                    worst = worst.max(excess);
                }
            }
        }
        worst
    }
}
