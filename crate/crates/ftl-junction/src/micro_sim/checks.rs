use serde::Serialize;

use super::integrate::{SimConfig, Simulator};
use super::state::WindowState;
use crate::error::{Error, Result};
use crate::homog::EffectiveModel;
use crate::model::{propagation_index, ModelSpec, Realization, VelocityLaw};

/// Position samples used to minimize the law over `x`.
fn position_samples(spec: &ModelSpec) -> Vec<f64> {
    let lo = -spec.outer_radius() - 1.0;
    let n = 4000;
    let mut xs: Vec<f64> = (0..=n).map(|j| lo + (1.0 - lo) * j as f64 / n as f64).collect();
    xs.extend(spec.radii.iter().map(|r| -r));
    xs
}

fn min_over_positions(spec: &ModelSpec, law: &dyn VelocityLaw, gap: f64) -> f64 {
    let xs = position_samples(spec);
    (0..spec.type_count())
        .flat_map(|z| xs.iter().map(move |&x| law.velocity(z, gap, gap, x)))
        .fold(f64::INFINITY, f64::min)
}

/// Lower bound on every vehicle speed for the flat datum at the optimal
/// spacings: the least of `kappa`, the steady speeds, and the law at the
/// smallest spacing and at `R1 - R2 + delta_min`.
pub fn velocity_floor(spec: &ModelSpec, law: &dyn VelocityLaw, eff: &EffectiveModel) -> f64 {
    let e_min = eff.spacings().into_iter().fold(f64::INFINITY, f64::min);
    let band = spec.middle_radius() - spec.inner_radius() + spec.delta_min;
    let steady = eff.steady_speeds().into_iter().fold(f64::INFINITY, f64::min);
    spec.kappa()
        .min(steady)
        .min(min_over_positions(spec, law, e_min))
        .min(min_over_positions(spec, law, band))
}

/// `C` with `0 <= theta(t) - theta(s) <= C (t - s + 1)`, from the speed
/// bound, the velocity floor and the incoming spacing.
pub fn theta_increment_constant(spec: &ModelSpec, eff: &EffectiveModel, floor: f64) -> f64 {
    let sup = spec.v_sup();
    let d = spec.delta_min;
    let r2 = spec.inner_radius();
    sup / d + sup * r2 / (floor * d) + sup * r2 / (floor * eff.road(0).spacing) + 2.0
}

/// Lipschitz constant of the scaled count on road `road` in space and time,
/// up to an additive `eps`.
pub fn nu_lipschitz_constant(spec: &ModelSpec, road: usize) -> f64 {
    2.0 / spec.route_weight(road) * spec.v_sup().max(1.0) / spec.delta_min
}

/// Growth rate `gamma + 2 C1` of the finite-speed estimate.
pub fn propagation_growth(law: &dyn VelocityLaw) -> f64 {
    let b = law.bounds();
    b.gap_lipschitz + 2.0 * b.space_lipschitz
}

#[derive(Debug, Clone, Serialize)]
pub struct FiniteSpeedReport {
    /// `J_n(i0 + len)`: deviations are measured at indices up to here.
    pub limit_index: i64,
    pub steps: usize,
    pub horizon: f64,
    /// `2^-n exp(beta T)`.
    pub decay: f64,
    /// Largest positive part of `U_i - U~_i` for `i` in `[lo, limit_index]`
    /// over the sample times.
    pub max_deviation: f64,
    /// Displacement of the leader itself at time 0.
    pub initial_leader_deviation: f64,
    /// Smallest `C` with `max_deviation <= C decay initial_leader_deviation`;
    /// `None` without a displacement.
    pub fitted_constant: Option<f64>,
}

/// Integrates `base` and a copy whose vehicles from `i0 + len` onwards are
/// pushed forward by `displacement`, and compares them behind `J_n(i0 + len)`.
#[allow(clippy::too_many_arguments)]
pub fn finite_speed_check(
    law: &dyn VelocityLaw,
    spec: &ModelSpec,
    real: &Realization,
    base: &WindowState,
    i0: i64,
    len: i64,
    displacement: f64,
    n: usize,
    horizon: f64,
    cfg: SimConfig,
) -> Result<FiniteSpeedReport> {
    let leader = i0 + len;
    if i0 < base.lo || leader > base.hi || displacement < 0.0 {
        return Err(Error::Precondition(format!(
            "leader range [{i0}, {leader}] must lie in [{}, {}] with a forward displacement",
            base.lo, base.hi
        )));
    }
    let limit = propagation_index(real, leader, n)?;
    let mut shifted = base.clone();
    for j in (leader - base.lo) as usize..shifted.positions.len() {
        shifted.positions[j] += displacement;
    }
    for g in &mut shifted.ghosts {
        g.start += displacement;
    }
    let initial_leader_deviation = shifted.position(leader) - base.position(leader);
    let sim = Simulator::new(law, real, spec, cfg)?;
    let mut a = base.clone();
    let mut b = shifted;
    let samples = 32;
    let upto = (limit - base.lo + 1).max(0) as usize;
    let mut worst: f64 = 0.0;
    for s in 0..=samples {
        let t = horizon * s as f64 / samples as f64;
        sim.advance_to(&mut a, t)?;
        sim.advance_to(&mut b, t)?;
        for j in 0..upto {
            worst = worst.max(b.positions[j] - a.positions[j]);
        }
    }
    let decay = 2f64.powi(-(n as i32)) * (propagation_growth(law) * horizon).exp();
    Ok(FiniteSpeedReport {
        limit_index: limit,
        steps: n,
        horizon,
        decay,
        max_deviation: worst,
        initial_leader_deviation,
        fitted_constant: (initial_leader_deviation > 0.0).then(|| worst / (decay * initial_leader_deviation)),
    })
}
