//! Config-driven Monte Carlo harness: scenario parsing, the deterministic
//! runner and CSV result tables.

mod runner;
mod scenario;
mod table;

pub use runner::{run, RunError};
pub use scenario::{
    parse_scenario, AllocationSpec, ComponentKind, DbValue, Experiment, MimoParams, MustParams,
    Scenario, ScenarioError,
};
pub use table::{Column, ColumnKind, ResultTable, TableError, Value};
