use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous piecewise-linear free-road velocity `e -> V(e)`.
///
/// The first breakpoint is the minimal spacing and carries velocity 0. Values
/// increase with nonincreasing slopes up to the saturation spacing and stay
/// constant afterwards. Evaluation goes through the spacing offset
/// `(e - delta_min)+` so that `eval(e)` and `eval_offset((e - delta_min)+)`
/// are bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileTable", into = "ProfileTable")]
pub struct VelocityProfile {
    delta_min: f64,
    /// Breakpoint offsets from `delta_min`; `offsets[0] == 0`.
    offsets: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProfileTable {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<ProfileTable> for VelocityProfile {
    type Error = Error;
    fn try_from(t: ProfileTable) -> Result<Self> {
        VelocityProfile::new(t.breakpoints, t.values)
    }
}

impl From<VelocityProfile> for ProfileTable {
    fn from(p: VelocityProfile) -> Self {
        ProfileTable {
            breakpoints: p.breakpoints(),
            values: p.values,
        }
    }
}

const SLOPE_TOL: f64 = 1e-12;

impl VelocityProfile {
    /// Builds a profile from its knots. Trailing knots with the saturated value
    /// are dropped; the saturation spacing is the first knot reaching the max.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidProfile(msg.to_string()));
        if breakpoints.len() != values.len() {
            return bad("breakpoints and values differ in length");
        }
        if breakpoints.len() < 2 {
            return bad("need at least two knots");
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return bad("non-finite knot");
        }
        if values[0] != 0.0 {
            return bad("velocity at the minimal spacing must be 0");
        }
        if breakpoints[0] <= 0.0 {
            return bad("minimal spacing must be positive");
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return bad("breakpoints must be strictly increasing");
        }
        let mut n = breakpoints.len();
        while n > 2 && values[n - 1] == values[n - 2] {
            n -= 1;
        }
        let slopes: Vec<f64> = (1..n)
            .map(|j| (values[j] - values[j - 1]) / (breakpoints[j] - breakpoints[j - 1]))
            .collect();
        if slopes.iter().any(|&s| s <= 0.0) {
            return bad("velocity must increase strictly up to saturation");
        }
        if slopes.windows(2).any(|w| w[1] > w[0] * (1.0 + SLOPE_TOL)) {
            return bad("profile is not concave");
        }
        let delta_min = breakpoints[0];
        Ok(Self {
            delta_min,
            offsets: breakpoints[..n].iter().map(|b| b - delta_min).collect(),
            values: values[..n].to_vec(),
        })
    }

    /// `min(slope * (e - delta_min)+, v_max)`.
    pub fn clipped_linear(delta_min: f64, slope: f64, v_max: f64) -> Result<Self> {
        Self::new(vec![delta_min, delta_min + v_max / slope], vec![0.0, v_max])
    }

    pub fn delta_min(&self) -> f64 {
        self.delta_min
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.offsets.iter().map(|o| o + self.delta_min).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Spacing at which the profile saturates.
    pub fn h_max(&self) -> f64 {
        self.delta_min + self.offsets[self.offsets.len() - 1]
    }

    pub fn v_max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Steepest slope, i.e. the Lipschitz constant.
    pub fn max_slope(&self) -> f64 {
        (self.values[1] - self.values[0]) / (self.offsets[1] - self.offsets[0])
    }

    pub fn eval(&self, e: f64) -> f64 {
        self.eval_offset((e - self.delta_min).max(0.0))
    }

    /// Velocity as a function of the excess spacing `s = e - delta_min >= 0`.
    pub fn eval_offset(&self, s: f64) -> f64 {
        let o = &self.offsets;
        if s <= 0.0 {
            return 0.0;
        }
        if s >= o[o.len() - 1] {
            return self.v_max();
        }
        let j = o.partition_point(|&b| b <= s);
        let (s0, s1) = (o[j - 1], o[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        v0 + (v1 - v0) * (s - s0) / (s1 - s0)
    }

    /// Smallest spacing with velocity `v`, for `v` in `(0, v_max]`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v <= self.v_max()) {
            return Err(Error::OutOfRange {
                what: "profile inverse",
                value: v,
            });
        }
        let vals = &self.values;
        let j = vals.partition_point(|&w| w < v).max(1);
        let (v0, v1) = (vals[j - 1], vals[j]);
        let (s0, s1) = (self.offsets[j - 1], self.offsets[j]);
        Ok(self.delta_min + s0 + (s1 - s0) * (v - v0) / (v1 - v0))
    }
}
