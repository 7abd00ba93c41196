//! Vehicle types, velocity laws and the random environment.

mod law;
mod profile;
mod realization;
mod spec;
mod validate;

pub use law::{cutoff, FreeRoadLaw, JunctionLaw, LawBounds, VelocityLaw};
pub use profile::VelocityProfile;
pub use realization::{estimate_alpha, propagation_index, AlphaEstimate, Realization};
pub use spec::{ModelSpec, VehicleType};
pub use validate::{validate_assumptions, AssumptionReport, Condition, Violation};
