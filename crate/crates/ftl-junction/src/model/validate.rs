use serde::Serialize;

use super::law::VelocityLaw;
use super::spec::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Nondecreasing in both gaps.
    Monotone,
    /// Zero velocity at minimal gaps.
    ZeroRegion,
    /// Insensitive to gaps beyond the horizon.
    Saturation,
    /// Free-road motion outside the junction zone.
    FreeRoad,
    /// Slow vehicles behind the ordering zone follow the incoming profile.
    SlowFollowsIncoming,
    /// Slow vehicles near the node do not slow down with `x`.
    SlowNondecreasingInX,
    Positivity,
    /// Finite differences within the declared Lipschitz bounds.
    Lipschitz,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub z: usize,
    pub e1: f64,
    pub e2: f64,
    pub x: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub gaps: Vec<f64>,
    pub positions: Vec<f64>,
    pub points_checked: usize,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, c: Condition) -> usize {
        self.violations.iter().filter(|v| v.condition == c).count()
    }
}

const GAP_POINTS: usize = 33;
const POSITION_POINTS: usize = 61;
const TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-6;

fn lattice(lo: f64, hi: f64, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    v.extend_from_slice(extra);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Samples the law on a tensor lattice and reports every violated condition.
///
/// Gaps: `GAP_POINTS` uniform points on `[0, e_max + 1]` plus `delta_min` and
/// `e_max`. Positions: `POSITION_POINTS` uniform points on
/// `[-r0 - 1, 1]` plus every band edge and band midpoint.
pub fn validate_assumptions(law: &dyn VelocityLaw, spec: &ModelSpec) -> AssumptionReport {
    let d = spec.delta_min;
    let r = spec.radii;
    let (r_out, r_mid, r_in) = (spec.outer_radius(), spec.middle_radius(), spec.inner_radius());
    let gaps = lattice(0.0, spec.e_max + 1.0, GAP_POINTS, &[d, spec.e_max]);
    let mut edges = vec![0.0];
    for i in 0..4 {
        edges.push(-r[i]);
        if i < 3 {
            edges.push(-(r[i] + r[i + 1]) / 2.0);
        }
    }
    let positions = lattice(-r_out - 1.0, 1.0, POSITION_POINTS, &edges);
    let kappa = spec.kappa();
    let b = law.bounds();
    let mut out = Vec::new();
    let mut checked = 0;

    for z in 0..spec.type_count() {
        let k = spec.route(z);
        let (p0, pk) = (spec.profile(z, 0), spec.profile(z, k));
        let mut flag = |condition, e1, e2, x, observed| {
            out.push(Violation { condition, z, e1, e2, x, observed });
        };
        for &x in &positions {
            for (a, &e1) in gaps.iter().enumerate() {
                for (c, &e2) in gaps.iter().enumerate() {
                    checked += 1;
                    let v = law.velocity(z, e1, e2, x);
                    if a + 1 < gaps.len() {
                        let next = law.velocity(z, gaps[a + 1], e2, x);
                        if next < v - TOL {
                            flag(Condition::Monotone, e1, e2, x, next - v);
                        }
                        if next - v > b.gap_lipschitz * (gaps[a + 1] - e1) + TOL {
                            flag(Condition::Lipschitz, e1, e2, x, next - v);
                        }
                    }
                    if c + 1 < gaps.len() {
                        let next = law.velocity(z, e1, gaps[c + 1], x);
                        if next < v - TOL {
                            flag(Condition::Monotone, e1, e2, x, next - v);
                        }
                        if next - v > b.gap_lipschitz * (gaps[c + 1] - e2) + TOL {
                            flag(Condition::Lipschitz, e1, e2, x, next - v);
                        }
                    }
                    if ((e1 <= d && x <= -r_in) || (e2 <= d && x >= -r_mid)) && v.abs() > TOL {
                        flag(Condition::ZeroRegion, e1, e2, x, v);
                    }
                    if e1 >= spec.e_max && v != law.velocity(z, spec.e_max, e2, x) {
                        flag(Condition::Saturation, e1, e2, x, v);
                    }
                    if e2 >= spec.e_max && v != law.velocity(z, e1, spec.e_max, x) {
                        flag(Condition::Saturation, e1, e2, x, v);
                    }
                    if x <= -r_out && v != p0.eval(e1) {
                        flag(Condition::FreeRoad, e1, e2, x, v - p0.eval(e1));
                    }
                    if x >= 0.0 && v != pk.eval(e2) {
                        flag(Condition::FreeRoad, e1, e2, x, v - pk.eval(e2));
                    }
                    if e1 <= e2 && x <= -r_in && v <= kappa && (v - p0.eval(e1)).abs() > TOL {
                        flag(Condition::SlowFollowsIncoming, e1, e2, x, v - p0.eval(e1));
                    }
                    if x >= -r_mid && x <= 0.0 && v <= kappa {
                        let lo = (x - FD_STEP).max(-r_mid);
                        let hi = (x + FD_STEP).min(0.0);
                        let dv = (law.velocity(z, e1, e2, hi) - law.velocity(z, e1, e2, lo)) / (hi - lo);
                        if dv < -FD_TOL {
                            flag(Condition::SlowNondecreasingInX, e1, e2, x, dv);
                        }
                    }
                    if e1.min(e2) > d && v <= 0.0 {
                        flag(Condition::Positivity, e1, e2, x, v);
                    }
                }
                let (lo, hi) = (x - FD_STEP, x + FD_STEP);
                for &e2 in &gaps {
                    let dv = (law.velocity(z, e1, e2, hi) - law.velocity(z, e1, e2, lo)) / (hi - lo);
                    if dv.abs() > b.space_lipschitz + FD_TOL {
                        flag(Condition::Lipschitz, e1, e2, x, dv);
                    }
                }
            }
        }
    }
    AssumptionReport {
        gaps,
        positions,
        points_checked: checked,
        violations: out,
    }
}
