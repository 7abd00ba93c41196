use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid velocity profile: {0}")]
    InvalidProfile(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("cannot parse model spec: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("{what}: value {value} out of range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("route extension exceeded {cap} indices past the window end")]
    ExtensionCap { cap: usize },

    #[error("index {index} falls outside the realization window [{lo}, {hi}]")]
    WindowUnderflow { index: i64, lo: i64, hi: i64 },

    #[error("spacing {spacing} on road {road} does not exceed the minimal spacing")]
    SpacingTooSmall { road: usize, spacing: f64 },

    #[error("ordering violated at index {index}, t = {t}, after {halvings} step halvings")]
    Ordering { index: i64, t: f64, halvings: u32 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("window exhausted computing the crossing count at t = {t}; widen the left margin")]
    WindowExhausted { t: f64 },

    #[error("point x = {x} on road {road} lies outside the simulated region")]
    Uncovered { x: f64, road: usize },

    #[error("limiter level {level} outside [{a0}, 0)")]
    LimiterLevel { level: f64, a0: f64 },

    #[error("time step {dt} violates the CFL bound {bound}")]
    Cfl { dt: f64, bound: f64 },

    #[error("{0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
