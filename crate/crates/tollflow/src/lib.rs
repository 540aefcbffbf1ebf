//! Multi-class traffic equilibria under edge tolls, revenue-refunding schemes,
//! and wealth-inequality metrics, at desk scale.
//!
//! The crate is organized in five layers: [`network`] holds the scenario data
//! model (graph, latency functions, user groups, interchange format),
//! [`assignment`] computes exogenous equilibria and system costs, [`cprr`]
//! constructs toll-and-refund schemes, [`inequality`] measures income
//! distributions, and [`verify`] checks equilibrium and scheme properties,
//! including coordinated group deviations that take refunds into account.

pub mod assignment;
pub mod cprr;
pub mod inequality;
pub mod network;
pub mod verify;

pub use assignment::{
    solve_exogenous_equilibrium, EquilibriumSolution, FlowPattern, SolveOptions, TollVector,
};
pub use cprr::{optimal_cprr_pipeline, CprrScheme, RefundPolicy, RefundVector, TransferVector};
pub use inequality::IncomeDistribution;
pub use network::{load_scenario, Scenario};
