use super::spec::ModelSpec;

/// Global bounds of a velocity law, used for step sizing and error budgets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawBounds {
    /// Upper bound of the velocity.
    pub sup: f64,
    /// Lipschitz bound of `e1 -> V` plus that of `e2 -> V`.
    pub gap_lipschitz: f64,
    /// Lipschitz bound in the position argument.
    pub space_lipschitz: f64,
}

impl LawBounds {
    /// Lipschitz constant of the vector field in the sup norm.
    pub fn lipschitz(&self) -> f64 {
        2.0 * self.gap_lipschitz + self.space_lipschitz
    }
}

/// Velocity `V_z(e1, e2, x)` of a type-`z` vehicle at position `x` with gap
/// `e1` to the vehicle right ahead and `e2` to the next vehicle on its route.
pub trait VelocityLaw: Sync {
    fn velocity(&self, z: usize, e1: f64, e2: f64, x: f64) -> f64;
    fn bounds(&self) -> LawBounds;
}

/// Cubic smoothstep cutoff: 1 for `x <= -outer`, 0 for `x >= -inner`.
pub fn cutoff(x: f64, outer: f64, inner: f64) -> f64 {
    if x <= -outer {
        return 1.0;
    }
    if x >= -inner {
        return 0.0;
    }
    let s = (x + outer) / (outer - inner);
    1.0 - s * s * (3.0 - 2.0 * s)
}

const CUTOFF_MAX_SLOPE: f64 = 1.5;

/// Junction law blending free-road motion on the incoming road into
/// free-road motion on the outgoing road across the bands
/// `[-r0, -r1]`, `[-r1, -r2]`, `[-r2, -r3]`.
///
/// Gaps are clamped at `e_max` before blending; without the clamp the last
/// band keeps reacting to gaps beyond the horizon.
#[derive(Debug, Clone)]
pub struct JunctionLaw {
    spec: ModelSpec,
    bounds: LawBounds,
}

impl JunctionLaw {
    pub fn new(spec: &ModelSpec) -> crate::Result<Self> {
        spec.validate()?;
        let sup = spec.v_sup();
        let gamma = spec.max_slope();
        let [r0, r1, r2, r3] = spec.radii;
        let space = CUTOFF_MAX_SLOPE
            * [
                sup / (r0 - r1),
                sup / (r1 - r2),
                gamma * (spec.e_max - spec.delta_min) / (r2 - r3),
            ]
            .into_iter()
            .fold(0.0, f64::max);
        Ok(Self {
            spec: spec.clone(),
            bounds: LawBounds {
                sup,
                gap_lipschitz: gamma,
                space_lipschitz: space,
            },
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// The three-term blend evaluated everywhere, without the free-road
    /// shortcut used by [`VelocityLaw::velocity`].
    pub fn blend(&self, z: usize, e1: f64, e2: f64, x: f64) -> f64 {
        let d = self.spec.delta_min;
        let [r0, r1, r2, r3] = self.spec.radii;
        let w0 = self.spec.profile(z, 0);
        let wk = self.spec.profile(z, self.spec.route(z));
        let (xi1, xi2, xi3) = (cutoff(x, r0, r1), cutoff(x, r1, r2), cutoff(x, r2, r3));
        let (e1, e2) = (e1.min(self.spec.e_max), e2.min(self.spec.e_max));
        let s1 = (e1 - d).max(0.0);
        let s12 = (e1.min(e2) - d).max(0.0);
        let s2 = (e2 - d).max(0.0);
        xi1 * w0.eval_offset(s1)
            + (1.0 - xi1) * xi2 * w0.eval_offset(s12)
            + (1.0 - xi2) * wk.eval_offset(xi3 * s12 + (1.0 - xi3) * s2)
    }
}

impl VelocityLaw for JunctionLaw {
    fn velocity(&self, z: usize, e1: f64, e2: f64, x: f64) -> f64 {
        if x <= -self.spec.outer_radius() {
            self.spec.profile(z, 0).eval(e1)
        } else if x >= 0.0 {
            self.spec.profile(z, self.spec.route(z)).eval(e2)
        } else {
            self.blend(z, e1, e2, x)
        }
    }

    fn bounds(&self) -> LawBounds {
        self.bounds
    }
}

/// No junction: incoming profile on `x < 0` driven by the gap ahead, outgoing
/// profile on `x >= 0` driven by the gap to the same-route leader.
#[derive(Debug, Clone)]
pub struct FreeRoadLaw {
    spec: ModelSpec,
}

impl FreeRoadLaw {
    pub fn new(spec: &ModelSpec) -> Self {
        Self { spec: spec.clone() }
    }
}

impl VelocityLaw for FreeRoadLaw {
    fn velocity(&self, z: usize, e1: f64, e2: f64, x: f64) -> f64 {
        if x < 0.0 {
            self.spec.profile(z, 0).eval(e1)
        } else {
            self.spec.profile(z, self.spec.route(z)).eval(e2)
        }
    }

    fn bounds(&self) -> LawBounds {
        LawBounds {
            sup: self.spec.v_sup(),
            gap_lipschitz: self.spec.max_slope(),
            space_lipschitz: 0.0,
        }
    }
}
