use crate::homog::{EffectiveModel, JunctionProfile};

/// Flat-datum solution `min(phi(x, k) - A t, -x / e_k - t H_k(-1 / e_k))`.
/// Points with `x <= 0` belong to the incoming road.
pub fn closed_form_nu(eff: &EffectiveModel, profile: &JunctionProfile, x: f64, k: usize, t: f64) -> f64 {
    let road = if x <= 0.0 { 0 } else { k };
    let r = eff.road(road);
    let limited = profile.phi(x, road) - profile.level * t;
    let free = -x / r.spacing - t * r.h_min;
    limited.min(free)
}

/// Position of the vehicle with scaled label `y`: the inverse of the flat
/// solution in `x`. Labels below `A t` sit on the incoming road.
pub fn closed_form_u(eff: &EffectiveModel, profile: &JunctionProfile, y: f64, k: usize, t: f64) -> f64 {
    let a = profile.level;
    let road = if y <= a * t { 0 } else { k };
    let r = eff.road(road);
    let limited = profile.psi(y - a * t, road);
    let free = y * r.spacing - r.spacing * t * r.h_min;
    limited.min(free)
}

/// Half-line solution with node data `rate * t`:
/// `min(-x / e0 - t H0(-1 / e0), p x + rate t)` where `p` is the left root
/// of `H0 = -rate`.
pub fn half_line_nu(eff: &EffectiveModel, profile: &JunctionProfile, x: f64, t: f64) -> f64 {
    let r = eff.road(0);
    let rate = -profile.level;
    (-x / r.spacing - t * r.h_min).min(profile.roots[0].0 * x + rate * t)
}
