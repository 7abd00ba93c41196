use serde::{Deserialize, Serialize};

use super::profile::VelocityProfile;
use crate::error::{Error, Result};

/// One vehicle type: its outgoing road, its probability and its free-road
/// profiles on the incoming road and on its outgoing road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleType {
    pub name: String,
    pub route: usize,
    pub weight: f64,
    pub incoming: VelocityProfile,
    pub outgoing: VelocityProfile,
}

/// Junction model: one incoming road glued to `roads` outgoing roads.
///
/// `radii = [r0, r1, r2, r3]` are the transition radii of the junction law,
/// decreasing and positive. The law is exact free-road motion for
/// `x <= -r0` and `x >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub roads: usize,
    pub delta_min: f64,
    pub e_max: f64,
    pub radii: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub types: Vec<VehicleType>,
}

const WEIGHT_TOL: f64 = 1e-9;

const M_TWO_TYPE: &str = include_str!("../../specs/m-two-type.toml");
const M_SYM_2ROADS: &str = include_str!("../../specs/m-sym-2roads.toml");

impl ModelSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ModelSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model spec serializes")
    }

    /// One road, two types with slopes 1 and 2, both saturating at 2.
    pub fn two_type() -> Self {
        Self::from_toml_str(M_TWO_TYPE).expect("bundled spec is valid")
    }

    /// Two symmetric roads, one type per road, identical profiles.
    pub fn sym_two_roads() -> Self {
        Self::from_toml_str(M_SYM_2ROADS).expect("bundled spec is valid")
    }

    /// One road, one type, the same `profile` everywhere.
    pub fn single_type(profile: VelocityProfile, e_max: f64, radii: [f64; 4]) -> Result<Self> {
        let spec = ModelSpec {
            name: "single-type".into(),
            roads: 1,
            delta_min: profile.delta_min(),
            e_max,
            radii,
            kappa: None,
            types: vec![VehicleType {
                name: "z".into(),
                route: 1,
                weight: 1.0,
                incoming: profile.clone(),
                outgoing: profile,
            }],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.roads == 0 {
            return bad("at least one outgoing road is required".into());
        }
        if !(self.delta_min > 0.0) {
            return bad("minimal spacing must be positive".into());
        }
        if !(self.e_max > self.delta_min) {
            return bad("saturation horizon must exceed the minimal spacing".into());
        }
        let [r0, r1, r2, r3] = self.radii;
        if !(r0 > r1 && r1 > r2 && r2 > r3 && r3 > 0.0) {
            return bad(format!("radii {:?} must be strictly decreasing and positive", self.radii));
        }
        if !(r0 > self.e_max) {
            return bad(format!("outer radius {r0} must exceed the saturation horizon {}", self.e_max));
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0) {
                return bad("kappa must be positive".into());
            }
        }
        if self.types.is_empty() {
            return bad("no vehicle types".into());
        }
        let mut total = 0.0;
        for t in &self.types {
            if !(t.route >= 1 && t.route <= self.roads) {
                return bad(format!("type {} routes to road {} of {}", t.name, t.route, self.roads));
            }
            if !(t.weight > 0.0) {
                return bad(format!("type {} has non-positive weight", t.name));
            }
            total += t.weight;
            for p in [&t.incoming, &t.outgoing] {
                if p.delta_min() != self.delta_min {
                    return bad(format!("type {} profile does not start at the minimal spacing", t.name));
                }
                if p.h_max() > self.e_max {
                    return bad(format!("type {} saturates beyond the horizon", t.name));
                }
            }
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return bad(format!("type weights sum to {total}, not 1"));
        }
        for k in 1..=self.roads {
            if self.route_weight(k) <= 0.0 {
                return bad(format!("no type takes road {k}"));
            }
        }
        Ok(())
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn route(&self, z: usize) -> usize {
        self.types[z].route
    }

    /// Probability of taking road `k`; 1 for the incoming road.
    pub fn route_weight(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        self.types.iter().filter(|t| t.route == k).map(|t| t.weight).sum()
    }

    pub fn min_route_weight(&self) -> f64 {
        (1..=self.roads).map(|k| self.route_weight(k)).fold(f64::INFINITY, f64::min)
    }

    /// Free-road profile of type `z` on road `k` (0 = incoming).
    pub fn profile(&self, z: usize, road: usize) -> &VelocityProfile {
        let t = &self.types[z];
        if road == 0 {
            &t.incoming
        } else {
            &t.outgoing
        }
    }

    /// Radius beyond which the law is free-road motion on the incoming road.
    pub fn outer_radius(&self) -> f64 {
        self.radii[0]
    }

    /// Radius of the zone where slow vehicles may only speed up with `x`.
    pub fn middle_radius(&self) -> f64 {
        self.radii[1]
    }

    /// Radius of the ordering zone: vehicles behind `-inner_radius` keep
    /// their order and the minimal spacing.
    pub fn inner_radius(&self) -> f64 {
        self.radii[2]
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or_else(|| {
            let e = self.middle_radius() - self.inner_radius() + self.delta_min;
            self.types
                .iter()
                .flat_map(|t| [t.incoming.eval(e), t.outgoing.eval(e)])
                .fold(f64::INFINITY, f64::min)
                / 2.0
        })
    }

    /// Upper bound of every profile.
    pub fn v_sup(&self) -> f64 {
        self.types
            .iter()
            .flat_map(|t| [t.incoming.v_max(), t.outgoing.v_max()])
            .fold(0.0, f64::max)
    }

    /// Largest profile slope.
    pub fn max_slope(&self) -> f64 {
        self.types
            .iter()
            .flat_map(|t| [t.incoming.max_slope(), t.outgoing.max_slope()])
            .fold(0.0, f64::max)
    }

    /// Type with the smallest saturated velocity on road `k` among the types
    /// using that road (all types for `k = 0`).
    pub fn slowest_type(&self, road: usize) -> usize {
        (0..self.types.len())
            .filter(|&z| road == 0 || self.route(z) == road)
            .min_by(|&a, &b| {
                let va = self.profile(a, road).v_max();
                let vb = self.profile(b, road).v_max();
                va.total_cmp(&vb)
            })
            .expect("every road has a type")
    }
}
