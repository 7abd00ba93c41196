use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Realization};

/// Virtual vehicle beyond the right window edge moving at constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ghost {
    pub start: f64,
    pub speed: f64,
}

impl Ghost {
    pub fn at(&self, t: f64) -> f64 {
        self.start + self.speed * t
    }
}

/// Positions of the vehicles `lo..=hi` of a realization at time `t`, plus
/// constant-speed virtual leaders for the indices `hi + 1..=ext_hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowState {
    pub lo: i64,
    pub hi: i64,
    pub t: f64,
    pub positions: Vec<f64>,
    pub ghosts: Vec<Ghost>,
    pub stats: RunStats,
}

/// Counters accumulated while integrating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: u64,
    pub halvings: u64,
    /// Smallest step-averaged velocity over all steps and vehicles.
    pub min_step_velocity: f64,
    pub max_step_velocity: f64,
}

impl Default for RunStats {
    fn default() -> Self {
        Self {
            steps: 0,
            halvings: 0,
            min_step_velocity: f64::INFINITY,
            max_step_velocity: f64::NEG_INFINITY,
        }
    }
}

impl WindowState {
    pub fn new(real: &Realization, positions: Vec<f64>, ghosts: Vec<Ghost>) -> Result<Self> {
        let n = (real.hi() - real.lo() + 1) as usize;
        let g = (real.ext_hi() - real.hi()) as usize;
        if positions.len() != n || ghosts.len() != g {
            return Err(Error::Precondition(format!(
                "state sizes {}+{} do not match realization {n}+{g}",
                positions.len(),
                ghosts.len()
            )));
        }
        Ok(Self {
            lo: real.lo(),
            hi: real.hi(),
            t: 0.0,
            positions,
            ghosts,
            stats: RunStats::default(),
        })
    }

    /// Position of vehicle `i`, virtual or not.
    pub fn position(&self, i: i64) -> f64 {
        if i <= self.hi {
            self.positions[(i - self.lo) as usize]
        } else {
            self.ghosts[(i - self.hi - 1) as usize].at(self.t)
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Flat datum: `spacings[0] * i` for `i <= 0`, `spacings[T_i] * i` for
/// `i >= 0`. Virtual leaders continue the datum and move at the road's
/// steady speed.
pub fn flat_initial_condition(
    real: &Realization,
    spacings: &[f64],
    speeds: &[f64],
    delta_min: f64,
) -> Result<WindowState> {
    for (k, &e) in spacings.iter().enumerate().skip(1) {
        if !(e > delta_min) {
            return Err(Error::SpacingTooSmall { road: k, spacing: e });
        }
    }
    let road = |i: i64| if i <= 0 { 0 } else { real.route_of(i) };
    let positions = (real.lo()..=real.hi()).map(|i| spacings[road(i)] * i as f64).collect();
    let ghosts = (real.hi() + 1..=real.ext_hi())
        .map(|j| Ghost {
            start: spacings[road(j)] * j as f64,
            speed: speeds[road(j)],
        })
        .collect();
    WindowState::new(real, positions, ghosts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingKind {
    /// Vehicle closer than the minimal spacing to its same-route leader.
    SameRoute,
    /// Vehicles out of order or too close where one of them is behind the
    /// ordering zone.
    Upstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingViolation {
    pub index: i64,
    pub kind: OrderingKind,
    pub shortfall: f64,
}

/// Checks `U_l(i) - U_i >= delta_min` for every window index, and
/// `U_j - U_i >= (j - i) delta_min` for `i < j` whenever one of the two is
/// behind `-inner_radius`, each up to `tol`.
pub fn check_ordering(
    state: &WindowState,
    real: &Realization,
    spec: &ModelSpec,
    tol: f64,
) -> Vec<OrderingViolation> {
    let d = spec.delta_min;
    let zone = -spec.inner_radius();
    let mut out = Vec::new();
    for i in state.lo..=state.hi {
        let gap = state.position(real.next_same(i)) - state.position(i);
        if gap < d - tol {
            out.push(OrderingViolation {
                index: i,
                kind: OrderingKind::SameRoute,
                shortfall: d - gap,
            });
        }
    }
    // With w_i = U_i - i d the pairwise condition reads w_j >= w_i.
    let w: Vec<f64> = (state.lo..=state.hi)
        .map(|i| state.position(i) - i as f64 * d)
        .collect();
    let n = w.len();
    let mut suffix_min = vec![f64::INFINITY; n + 1];
    for j in (0..n).rev() {
        suffix_min[j] = suffix_min[j + 1].min(w[j]);
    }
    let mut prefix_max = f64::NEG_INFINITY;
    for j in 0..n {
        let u = state.positions[j];
        let i = state.lo + j as i64;
        if u <= zone && suffix_min[j + 1] < w[j] - tol {
            out.push(OrderingViolation {
                index: i,
                kind: OrderingKind::Upstream,
                shortfall: w[j] - suffix_min[j + 1],
            });
        } else if u <= zone && w[j] < prefix_max - tol {
            out.push(OrderingViolation {
                index: i,
                kind: OrderingKind::Upstream,
                shortfall: prefix_max - w[j],
            });
        }
        prefix_max = prefix_max.max(w[j]);
    }
    out
}

/// Compatibility of an initial datum: consecutive vehicles behind the
/// ordering zone and same-route pairs keep the minimal spacing.
pub fn check_compatibility(state: &WindowState, real: &Realization, spec: &ModelSpec) -> Vec<OrderingViolation> {
    let tol = COMPAT_TOL * spec.delta_min;
    let d = spec.delta_min;
    let mut out: Vec<OrderingViolation> = check_ordering(state, real, spec, tol)
        .into_iter()
        .filter(|v| v.kind == OrderingKind::SameRoute)
        .collect();
    for i in state.lo..state.hi {
        let next = state.position(i + 1);
        if next <= -spec.inner_radius() && next - state.position(i) < d - tol {
            out.push(OrderingViolation {
                index: i,
                kind: OrderingKind::Upstream,
                shortfall: d - (next - state.position(i)),
            });
        }
    }
    out
}

/// Relative slack of the compatibility check, absorbing rounding in `e * i`.
pub const COMPAT_TOL: f64 = 1e-9;
