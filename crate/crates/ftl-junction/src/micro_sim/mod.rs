//! Follow-the-leader dynamics on a finite index window.

mod checks;
mod integrate;
pub mod io;
mod observables;
mod state;

pub use checks::{
    finite_speed_check, nu_lipschitz_constant, propagation_growth, theta_increment_constant, velocity_floor,
    FiniteSpeedReport,
};
pub use integrate::{theta, theta_window, SimConfig, Simulator, TAU_ORD_REL, WINDOW_MARGIN};
pub use observables::{
    branch_x, check_covered, crossing_count, observe, route_floor, scaled_nu, scaled_u, ObservableFrame,
    ObservableTrace,
};
pub use state::{
    check_compatibility, check_ordering, flat_initial_condition, Ghost, OrderingKind, OrderingViolation, RunStats,
    WindowState, COMPAT_TOL,
};
