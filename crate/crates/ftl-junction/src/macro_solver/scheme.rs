use serde::Serialize;

use crate::error::{Error, Result};
use crate::homog::{EffectiveModel, RoadModel};

/// Uniform grid on the junction: `nodes` cells of width `dx` on each road,
/// sharing the node `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JunctionGrid {
    pub dx: f64,
    pub nodes: usize,
    pub dt: f64,
}

impl JunctionGrid {
    /// Largest stable step `dx / (2 max |H'|)`.
    pub fn cfl_bound(eff: &EffectiveModel, dx: f64) -> f64 {
        let slope = eff.max_slope();
        if slope > 0.0 {
            dx / (2.0 * slope)
        } else {
            dx
        }
    }

    pub fn new(eff: &EffectiveModel, dx: f64, nodes: usize) -> Self {
        Self {
            dx,
            nodes,
            dt: Self::cfl_bound(eff, dx),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Distance of node `j` from the junction.
    pub fn distance(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn extent(&self) -> f64 {
        self.distance(self.nodes)
    }
}

/// Values on the junction grid; `values[k][j]` sits at distance `j dx` on
/// road `k`, and `values[k][0]` is the shared node.
#[derive(Debug, Clone, Serialize)]
pub struct GridSolution {
    pub grid: JunctionGrid,
    pub level: f64,
    pub t: f64,
    pub steps: usize,
    pub values: Vec<Vec<f64>>,
}

impl GridSolution {
    /// Linear interpolation at signed position `x` on road `k`; `x <= 0`
    /// reads the incoming road.
    pub fn eval(&self, x: f64, k: usize) -> f64 {
        let (road, d) = if x <= 0.0 { (0, -x) } else { (k, x) };
        let s = d / self.grid.dx;
        let j = (s.floor() as usize).min(self.grid.nodes - 1);
        let w = s - j as f64;
        let v = &self.values[road];
        v[j] * (1.0 - w) + v[j + 1] * w
    }

    pub fn node(&self) -> f64 {
        self.values[0][0]
    }
}

/// Godunov flux for a convex Hamiltonian from its monotone envelopes.
fn godunov(road: &RoadModel, back: f64, fwd: f64) -> f64 {
    road.h_plus(back).max(road.h_minus(fwd))
}

/// One explicit step. `initial_far` holds the frozen far-field increments.
fn step(eff: &EffectiveModel, level: f64, grid: &JunctionGrid, initial_far: &[f64], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (dx, dt, m) = (grid.dx, grid.dt, grid.nodes);
    let mut out = v.to_vec();
    for (k, road) in eff.roads.iter().enumerate() {
        let u = &v[k];
        // Value one cell past the far end, continuing the initial slope.
        let ghost = u[m] + initial_far[k];
        for j in 1..=m {
            let further = if j == m { ghost } else { u[j + 1] };
            // Differences in increasing x: road 0 runs against the index.
            let (back, fwd) = if k == 0 {
                ((u[j] - further) / dx, (u[j - 1] - u[j]) / dx)
            } else {
                ((u[j] - u[j - 1]) / dx, (further - u[j]) / dx)
            };
            out[k][j] = u[j] - dt * godunov(road, back, fwd);
        }
    }
    let node = v[0][0];
    let mut flux = level.max(eff.roads[0].h_plus((node - v[0][1]) / dx));
    for k in 1..eff.roads.len() {
        flux = flux.max(eff.roads[k].h_minus((v[k][1] - node) / dx));
    }
    let new_node = node - dt * flux;
    for row in &mut out {
        row[0] = new_node;
    }
    out
}

fn check_level(eff: &EffectiveModel, level: f64) -> Result<()> {
    if !(level >= eff.a0 - 1e-12 && level < 0.0) {
        return Err(Error::LimiterLevel { level, a0: eff.a0 });
    }
    Ok(())
}

fn check_cfl(eff: &EffectiveModel, grid: &JunctionGrid) -> Result<()> {
    let bound = JunctionGrid::cfl_bound(eff, grid.dx);
    if !(grid.dt > 0.0) || grid.dt > bound * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt: grid.dt, bound });
    }
    if grid.nodes < 2 {
        return Err(Error::Precondition("grid needs at least two cells per road".into()));
    }
    Ok(())
}

/// Samples `init(x, k)` on the grid; the node takes road 0's value.
pub fn sample_initial(eff: &EffectiveModel, grid: &JunctionGrid, init: impl Fn(f64, usize) -> f64) -> Vec<Vec<f64>> {
    (0..eff.roads.len())
        .map(|k| {
            (0..=grid.nodes)
                .map(|j| {
                    let d = grid.distance(j);
                    if j == 0 {
                        init(0.0, 0)
                    } else if k == 0 {
                        init(-d, 0)
                    } else {
                        init(d, k)
                    }
                })
                .collect()
        })
        .collect()
}

/// Explicit monotone scheme for the flux-limited junction problem with
/// limiter `level`, run from `initial` to time `t_end`. The step is reduced
/// so that `t_end` is reached exactly.
pub fn solve_hj(
    eff: &EffectiveModel,
    level: f64,
    initial: Vec<Vec<f64>>,
    grid: JunctionGrid,
    t_end: f64,
) -> Result<GridSolution> {
    check_level(eff, level)?;
    check_cfl(eff, &grid)?;
    let steps = (t_end / grid.dt * (1.0 - 1e-12)).ceil().max(0.0) as usize;
    let grid = if steps > 0 { grid.with_dt(t_end / steps as f64) } else { grid };
    let far: Vec<f64> = initial.iter().map(|r| r[grid.nodes] - r[grid.nodes - 1]).collect();
    let mut v = initial;
    for _ in 0..steps {
        v = step(eff, level, &grid, &far, &v);
        if v.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { t: t_end });
        }
    }
    Ok(GridSolution {
        grid,
        level,
        t: t_end,
        steps,
        values: v,
    })
}

/// Incoming road alone with prescribed node values `node(t)`.
pub fn solve_half_line(
    road: &RoadModel,
    initial: Vec<f64>,
    dx: f64,
    dt: f64,
    t_end: f64,
    node: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let bound = dx / (2.0 * road.max_slope());
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, bound });
    }
    let m = initial.len() - 1;
    let steps = (t_end / dt * (1.0 - 1e-12)).ceil() as usize;
    let dt = t_end / steps as f64;
    let far = initial[m] - initial[m - 1];
    let mut u = initial;
    for s in 0..steps {
        let mut next = u.clone();
        let ghost = u[m] + far;
        for j in 1..=m {
            let further = if j == m { ghost } else { u[j + 1] };
            next[j] = u[j] - dt * godunov(road, (u[j] - further) / dx, (u[j - 1] - u[j]) / dx);
        }
        next[0] = node((s + 1) as f64 * dt);
        u = next;
    }
    Ok(u)
}
