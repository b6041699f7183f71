//! Compiler and bit-exact simulator for ternary-weight CNN inference unrolled
//! into pruned, pipelined adder trees.
//!
//! The passes run in order:
//!
//! 1. [`ternarize`] turns real weights into {-1, 0, +1} plus a scale.
//! 2. [`cse`] shares partial sums between the rows of each weight matrix.
//! 3. [`treegen`] packs the sums into a stage-aligned adder graph, picks a
//!    digit-serial schedule and reports Adds/Regs cost.
//! 4. [`netlist`] writes and re-reads the graph as structural text.
//! 5. [`pipeline`] simulates the streaming network in fixed point and models
//!    throughput and operation counts.

pub mod cse;
pub mod error;
pub mod model;
pub mod netlist;
pub mod pipeline;
pub mod ternarize;
pub mod treegen;

pub use error::{Error, Result};
