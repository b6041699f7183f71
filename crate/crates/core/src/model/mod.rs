//! Domain types shared by every pass.

pub mod expr;
pub mod fixed;
pub mod matrix;
pub mod network;
pub mod scale;

pub use expr::{Expression, Sign, Term, Var};
pub use fixed::{FixedPointFormat, FixedValue, SaturationCounter};
pub use matrix::{FloatMatrix, TernaryMatrix};
pub use network::{Activation, CseMethod, LayerKind, LayerSpec, NetworkSpec, ScaleRule};
pub use scale::{QuantizedScaleShift, ScaleShiftParams};
