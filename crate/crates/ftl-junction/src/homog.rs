//! Homogenized velocities and Hamiltonians, the flat-datum spacings and the
//! junction profile functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Continuous piecewise-linear map given by its knots, extended by constants
/// on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knots {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Knots {
    pub fn eval(&self, t: f64) -> f64 {
        let (x, y) = (&self.x, &self.y);
        if t <= x[0] {
            return y[0];
        }
        let n = x.len();
        if t >= x[n - 1] {
            return y[n - 1];
        }
        let j = x.partition_point(|&b| b <= t);
        y[j - 1] + (y[j] - y[j - 1]) * (t - x[j - 1]) / (x[j] - x[j - 1])
    }
}

/// Homogenized description of one road (0 = incoming).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadModel {
    pub road: usize,
    /// Probability of the road; 1 for the incoming road.
    pub weight: f64,
    /// Effective velocity as a function of same-route spacing, from
    /// `(delta_min, 0)` to the saturation knot.
    pub velocity: Knots,
    /// Saturated effective velocity.
    pub v_bar: f64,
    /// Flat-datum spacing: `H(-1/spacing)` is the minimum of `H`.
    pub spacing: f64,
    /// Effective velocity at the flat-datum spacing.
    pub steady_speed: f64,
    pub h_min: f64,
    /// Tabulated Hamiltonian `(p, H(p))`.
    pub hamiltonian: Knots,
}

impl RoadModel {
    /// Minimizer of the Hamiltonian, `-1 / spacing`.
    pub fn p_star(&self) -> f64 {
        -1.0 / self.spacing
    }

    /// `H(p) = p V(-1 / (weight p))` for `p < 0`, 0 otherwise.
    pub fn h(&self, p: f64) -> f64 {
        if p >= 0.0 {
            0.0
        } else {
            p * self.velocity.eval(-1.0 / (self.weight * p))
        }
    }

    /// Largest nondecreasing function below `H`.
    pub fn h_plus(&self, p: f64) -> f64 {
        if p <= self.p_star() {
            self.h_min
        } else {
            self.h(p)
        }
    }

    /// Largest nonincreasing function below `H`.
    pub fn h_minus(&self, p: f64) -> f64 {
        if p >= self.p_star() {
            self.h_min
        } else {
            self.h(p)
        }
    }

    /// Largest `|H'|`. `H` is affine in `p` between the images of the
    /// velocity knots, with slope equal to the intercept of the velocity
    /// segment.
    pub fn max_slope(&self) -> f64 {
        let (x, y) = (&self.velocity.x, &self.velocity.y);
        let mut m: f64 = self.v_bar;
        for j in 1..x.len() {
            let b = (y[j] - y[j - 1]) / (x[j] - x[j - 1]);
            m = m.max((y[j] - b * x[j]).abs());
        }
        m
    }

    /// Left end of the interval where `H` is asserted convex.
    pub fn convex_from(&self, delta_min: f64) -> f64 {
        -self.weight / delta_min
    }

    fn root(&self, level: f64, mut lo: f64, mut hi: f64, increasing: bool) -> f64 {
        while hi - lo > ROOT_TOL {
            let mid = 0.5 * (lo + hi);
            if (self.h(mid) > level) == increasing {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

const ROOT_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;
const GRID_POINTS: usize = 4096;
const GRID_NEAR_ZERO: f64 = 1e-4;

/// Homogenized model: one [`RoadModel`] per road and the level `A0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub delta_min: f64,
    pub roads: Vec<RoadModel>,
    /// Largest of the road minima of `H`.
    pub a0: f64,
}

impl EffectiveModel {
    pub fn road(&self, k: usize) -> &RoadModel {
        &self.roads[k]
    }

    pub fn outgoing(&self) -> usize {
        self.roads.len() - 1
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.roads.iter().map(|r| r.spacing).collect()
    }

    pub fn steady_speeds(&self) -> Vec<f64> {
        self.roads.iter().map(|r| r.steady_speed).collect()
    }

    pub fn max_slope(&self) -> f64 {
        self.roads.iter().map(RoadModel::max_slope).fold(0.0, f64::max)
    }
}

/// Effective velocity of road `k` and its Hamiltonian table.
fn road_model(spec: &ModelSpec, k: usize) -> RoadModel {
    let weight = spec.route_weight(k);
    let members: Vec<(f64, usize)> = (0..spec.type_count())
        .filter(|&z| k == 0 || spec.route(z) == k)
        .map(|z| (spec.types[z].weight / weight, z))
        .collect();
    let v_bar = members
        .iter()
        .map(|&(_, z)| spec.profile(z, k).v_max())
        .fold(f64::INFINITY, f64::min);
    let mut levels: Vec<f64> = members
        .iter()
        .flat_map(|&(_, z)| spec.profile(z, k).values().to_vec())
        .filter(|&v| v > 0.0 && v < v_bar)
        .collect();
    levels.push(v_bar);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mean_spacing = |v: f64| -> f64 {
        members
            .iter()
            .map(|&(w, z)| w * spec.profile(z, k).inverse(v).expect("level in range"))
            .sum()
    };
    let mut x = vec![spec.delta_min];
    let mut y = vec![0.0];
    for &v in &levels {
        x.push(mean_spacing(v));
        y.push(v);
    }
    let velocity = Knots { x, y };

    let mut best = 1;
    for j in 2..velocity.x.len() {
        let f = velocity.y[j] / velocity.x[j];
        let g = velocity.y[best] / velocity.x[best];
        if f >= g * (1.0 - TIE_TOL) {
            best = j;
        }
    }
    let s_star = velocity.x[best];
    let steady_speed = velocity.y[best];
    let spacing = weight * s_star;

    let lo = -2.0 / (weight * spec.delta_min);
    let ratio = (GRID_NEAR_ZERO / -lo).powf(1.0 / (GRID_POINTS - 1) as f64);
    let mut ps: Vec<f64> = (0..GRID_POINTS).map(|i| lo * ratio.powi(i as i32)).collect();
    ps.extend(velocity.x.iter().map(|s| -1.0 / (weight * s)));
    ps.push(0.0);
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut road = RoadModel {
        road: k,
        weight,
        velocity,
        v_bar,
        spacing,
        steady_speed,
        h_min: -steady_speed / spacing,
        hamiltonian: Knots { x: vec![], y: vec![] },
    };
    let hs = ps.iter().map(|&p| road.h(p)).collect();
    road.hamiltonian = Knots { x: ps, y: hs };
    road
}

/// Exact homogenization over the finite type set.
pub fn compute_effective(spec: &ModelSpec) -> Result<EffectiveModel> {
    spec.validate()?;
    let roads: Vec<RoadModel> = (0..=spec.roads).map(|k| road_model(spec, k)).collect();
    let a0 = roads.iter().map(|r| r.h_min).fold(f64::NEG_INFINITY, f64::max);
    Ok(EffectiveModel {
        delta_min: spec.delta_min,
        roads,
        a0,
    })
}

/// Smallest increment of consecutive slopes through `(xs, ys)`; nonnegative
/// for convex data.
pub fn discrete_convexity(xs: &[f64], ys: &[f64]) -> f64 {
    (1..xs.len().saturating_sub(1))
        .map(|i| {
            let right = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            let left = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            right - left
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct RoadConvexity {
    pub road: usize,
    pub interval: (f64, f64),
    /// Smallest slope increment of the tabulated `H` on the interval.
    pub hamiltonian: f64,
    /// Largest slope increment of the effective velocity knots.
    pub velocity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub tolerance: f64,
    pub roads: Vec<RoadConvexity>,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.roads
            .iter()
            .all(|r| r.hamiltonian >= -self.tolerance && r.velocity <= self.tolerance)
    }
}

pub const CONVEXITY_TOL: f64 = 1e-9;

/// Discrete convexity of each tabulated `H` on `[-weight / delta_min, 0]`
/// and concavity of each effective velocity from `delta_min` on.
pub fn check_convexity(eff: &EffectiveModel) -> ConvexityReport {
    let roads = eff
        .roads
        .iter()
        .map(|r| {
            let from = r.convex_from(eff.delta_min);
            let (ps, hs): (Vec<f64>, Vec<f64>) = r
                .hamiltonian
                .x
                .iter()
                .zip(&r.hamiltonian.y)
                .filter(|(p, _)| **p >= from && **p <= 0.0)
                .unzip();
            let v = &r.velocity;
            let mut vx = v.x.clone();
            let mut vy = v.y.clone();
            vx.push(v.x[v.x.len() - 1] + 1.0);
            vy.push(r.v_bar);
            RoadConvexity {
                road: r.road,
                interval: (from, 0.0),
                hamiltonian: discrete_convexity(&ps, &hs),
                velocity: -discrete_convexity(&vx, &vy.iter().map(|y| -y).collect::<Vec<_>>()),
            }
        })
        .collect();
    ConvexityReport {
        tolerance: CONVEXITY_TOL,
        roads,
    }
}

/// Slopes of the junction profile at level `A` and its evaluators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JunctionProfile {
    pub level: f64,
    /// `(p_minus, p_plus)` per road: smallest and largest roots of `H = A`.
    pub roots: Vec<(f64, f64)>,
}

impl JunctionProfile {
    /// `p_minus(0) x` on the incoming road, `p_plus(k) x` on road `k`.
    pub fn phi(&self, x: f64, k: usize) -> f64 {
        if x <= 0.0 {
            self.roots[0].0 * x
        } else {
            self.roots[k].1 * x
        }
    }

    /// Inverse of `x -> -phi(x, k)`.
    pub fn psi(&self, y: f64, k: usize) -> f64 {
        if y <= 0.0 {
            y / -self.roots[0].0
        } else {
            y / -self.roots[k].1
        }
    }
}

pub fn junction_profile(eff: &EffectiveModel, level: f64) -> Result<JunctionProfile> {
    if !(level >= eff.a0 - ROOT_TOL && level < 0.0) {
        return Err(Error::LimiterLevel { level, a0: eff.a0 });
    }
    let roots = eff
        .roads
        .iter()
        .map(|r| {
            let p = r.p_star();
            if level <= r.h_min {
                return (p, p);
            }
            let left = -1.0 / (r.weight * eff.delta_min);
            (r.root(level, left, p, false), r.root(level, p, 0.0, true))
        })
        .collect();
    Ok(JunctionProfile { level, roots })
}
