//! Adder-graph construction, serial scheduling, evaluation and cost.

mod build;
mod cost;
mod graph;
pub mod serial;

pub use build::{build_tree, flat_adders};
pub use cost::{area, cost, AreaEstimate, CostReport};
pub use graph::{sign_extend, wrap, AdderGraph, Node, NodeId, NodeKind, Operand};
pub use serial::{schedule_serial, serial_add, serial_sum, SerialSchedule};

#[cfg(test)]
mod tests;
