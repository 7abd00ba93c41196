//! Junction flux limiter: replicated crossing counts and the diagnostics
//! built on them.

mod corrector;
mod estimate;
mod superadd;

pub use corrector::{build_corrector, corrector_lipschitz_violations, truncated_theta, CorrectorSequence};
pub use estimate::{
    concentration_diagnostic, concentration_from_curves, estimate_flux_limiter, estimate_from_curves, mean_curve,
    quantization_floor, theta_curve, theta_curves, unit_times, window_slope, ConcentrationReport, LimiterEstimate,
};
pub use superadd::{running_infimum, superadditivity_diagnostic, Defect, RateFit, SuperadditivityReport};
