//! Flux-limited Hamilton-Jacobi problem on the junction: monotone scheme,
//! closed-form flat-datum solutions and the particle comparison.

mod closed;
mod compare;
mod scheme;

pub use closed::{closed_form_nu, closed_form_u, half_line_nu};
pub use compare::{
    compare_at_scale, flat_grid_solution, micro_macro_compare, CompareConfig, CompareRow, CompareRun,
};
pub use scheme::{sample_initial, solve_half_line, solve_hj, GridSolution, JunctionGrid};
