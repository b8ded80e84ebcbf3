//! Proportional-fair coding-rate and air-time allocation for unicast flows
//! over multi-cell networks of binary symmetric channels.
//!
//! Each flow picks a coding rate r = 1 - 2x. Stronger codes lower the
//! decoding error but cost schedule time in every cell on the route. The
//! [`solver`] maximises Σ ln(1 - e_f) subject to per-cell time budgets by
//! pricing each cell's time and iterating on the prices.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    flows_in_cell, validate, CellSpec, ChannelSpec, FlowChannel, FlowSpec, RateBounds, Scenario,
};
pub use solver::{solve, Allocation, PriceVector, SolveReport, SolverOptions, Status};
