use serde::Serialize;

use super::state::{check_ordering, WindowState};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Realization, VelocityLaw};

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    /// Slack allowed on the ordering audit after each step.
    pub tau_ord: f64,
    pub max_halvings: u32,
}

/// Default ordering slack relative to the minimal spacing.
pub const TAU_ORD_REL: f64 = 1e-6;

impl SimConfig {
    /// Largest admissible step `min(delta_min / (4 sup), 1 / (4 L))`.
    pub fn max_dt(law: &dyn VelocityLaw, delta_min: f64) -> f64 {
        let b = law.bounds();
        let by_speed = if b.sup > 0.0 { delta_min / (4.0 * b.sup) } else { f64::INFINITY };
        let by_lip = if b.lipschitz() > 0.0 { 0.25 / b.lipschitz() } else { f64::INFINITY };
        by_speed.min(by_lip).min(1.0)
    }

    pub fn for_law(law: &dyn VelocityLaw, spec: &ModelSpec) -> Self {
        Self {
            dt: Self::max_dt(law, spec.delta_min),
            tau_ord: TAU_ORD_REL * spec.delta_min,
            max_halvings: 8,
        }
    }

    /// Shrinks `dt` so that `interval` is an integer number of steps.
    pub fn aligned_to(mut self, interval: f64) -> Self {
        let n = (interval / self.dt).ceil().max(1.0);
        self.dt = interval / n;
        self
    }

    pub fn validate(&self, law: &dyn VelocityLaw, spec: &ModelSpec) -> Result<()> {
        let bound = Self::max_dt(law, spec.delta_min);
        if !(self.dt > 0.0) || self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt: self.dt, bound });
        }
        if !(self.tau_ord >= 0.0) {
            return Err(Error::Precondition("negative ordering tolerance".into()));
        }
        Ok(())
    }
}

/// Fixed-step RK4 integrator of the follow-the-leader system on one
/// realization window.
pub struct Simulator<'a> {
    law: &'a dyn VelocityLaw,
    real: &'a Realization,
    spec: &'a ModelSpec,
    cfg: SimConfig,
    types: Vec<usize>,
    links: Vec<usize>,
}

impl<'a> Simulator<'a> {
    pub fn new(law: &'a dyn VelocityLaw, real: &'a Realization, spec: &'a ModelSpec, cfg: SimConfig) -> Result<Self> {
        cfg.validate(law, spec)?;
        let lo = real.lo();
        let types = (lo..=real.hi()).map(|i| real.type_of(i)).collect();
        let links = (lo..=real.hi()).map(|i| (real.next_same(i) - lo) as usize).collect();
        Ok(Self {
            law,
            real,
            spec,
            cfg,
            types,
            links,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn realization(&self) -> &Realization {
        self.real
    }

    /// Velocities of all window vehicles for the given positions at time `t`.
    /// `buf` holds window positions followed by the virtual leaders.
    fn rhs(&self, state: &WindowState, positions: &[f64], t: f64, buf: &mut Vec<f64>, out: &mut [f64]) {
        buf.clear();
        buf.extend_from_slice(positions);
        buf.extend(state.ghosts.iter().map(|g| g.at(t)));
        let n = positions.len();
        for j in 0..n {
            let x = buf[j];
            out[j] = self.law.velocity(self.types[j], buf[j + 1] - x, buf[self.links[j]] - x, x);
        }
    }

    /// Velocities at the current state.
    pub fn velocities(&self, state: &WindowState) -> Vec<f64> {
        let mut out = vec![0.0; state.len()];
        self.rhs(state, &state.positions, state.t, &mut Vec::new(), &mut out);
        out
    }

    fn rk4(&self, state: &mut WindowState, h: f64) {
        let n = state.len();
        let t = state.t;
        let mut buf = Vec::with_capacity(n + state.ghosts.len());
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        let u = &state.positions;
        self.rhs(state, u, t, &mut buf, &mut k1);
        for j in 0..n {
            tmp[j] = u[j] + 0.5 * h * k1[j];
        }
        self.rhs(state, &tmp, t + 0.5 * h, &mut buf, &mut k2);
        for j in 0..n {
            tmp[j] = u[j] + 0.5 * h * k2[j];
        }
        self.rhs(state, &tmp, t + 0.5 * h, &mut buf, &mut k3);
        for j in 0..n {
            tmp[j] = u[j] + h * k3[j];
        }
        self.rhs(state, &tmp, t + h, &mut buf, &mut k4);
        let mut lo_v = f64::INFINITY;
        let mut hi_v = f64::NEG_INFINITY;
        for j in 0..n {
            let v = (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0;
            tmp[j] = u[j] + h * v;
            lo_v = lo_v.min(v);
            hi_v = hi_v.max(v);
        }
        state.positions = tmp;
        state.t = t + h;
        state.stats.steps += 1;
        state.stats.min_step_velocity = state.stats.min_step_velocity.min(lo_v);
        state.stats.max_step_velocity = state.stats.max_step_velocity.max(hi_v);
    }

    /// One audited step of size `h`, retried as two half steps on an
    /// ordering violation.
    fn audited_step(&self, state: &mut WindowState, h: f64, depth: u32) -> Result<()> {
        let saved = state.clone();
        self.rk4(state, h);
        if state.positions.iter().any(|u| !u.is_finite()) {
            return Err(Error::NonFinite { t: state.t });
        }
        let bad = check_ordering(state, self.real, self.spec, self.cfg.tau_ord);
        if bad.is_empty() {
            return Ok(());
        }
        if depth >= self.cfg.max_halvings {
            return Err(Error::Ordering {
                index: bad[0].index,
                t: state.t,
                halvings: depth,
            });
        }
        let halvings = state.stats.halvings;
        *state = saved;
        state.stats.halvings = halvings + 1;
        self.audited_step(state, 0.5 * h, depth + 1)?;
        self.audited_step(state, 0.5 * h, depth + 1)
    }

    /// Integrates until `t_end`, landing on it exactly.
    pub fn advance_to(&self, state: &mut WindowState, t_end: f64) -> Result<()> {
        let span = t_end - state.t;
        if span < -1e-12 {
            return Err(Error::Precondition(format!("cannot integrate backwards to {t_end}")));
        }
        if span <= 1e-12 {
            return Ok(());
        }
        let n = (span / self.cfg.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let t0 = state.t;
        for s in 0..n {
            self.audited_step(state, h, 0)?;
            // Recompute from the start time to keep sample times exact.
            state.t = if s + 1 == n { t_end } else { t0 + (s + 1) as f64 * h };
        }
        Ok(())
    }

    /// Integrates through `times` (increasing) and calls `record` at each.
    pub fn run<F>(&self, state: &mut WindowState, times: &[f64], mut record: F) -> Result<()>
    where
        F: FnMut(&WindowState) -> Result<()>,
    {
        for &t in times {
            self.advance_to(state, t)?;
            record(state)?;
        }
        Ok(())
    }
}

/// Index `θ` of the first vehicle at or behind the node: the smallest
/// `i >= 0` with `U_{-i} <= 0`.
pub fn theta(state: &WindowState) -> Result<u64> {
    let mut i = 0i64;
    loop {
        if -i < state.lo {
            return Err(Error::WindowExhausted { t: state.t });
        }
        if state.position(-i) <= 0.0 {
            return Ok(i as u64);
        }
        i += 1;
    }
}

/// Window `(lo, hi)` for a run of length `horizon` starting from the flat
/// datum: `ceil(sup * horizon / delta_min) + margin` on each side.
pub fn theta_window(spec: &ModelSpec, horizon: f64, margin: i64) -> (i64, i64) {
    let w = (spec.v_sup() * horizon / spec.delta_min).ceil() as i64 + margin;
    (-w, w)
}

/// Default extra vehicles beyond the travel-distance bound.
pub const WINDOW_MARGIN: i64 = 32;
