//! Streaming network simulation and analytic models.
//!
//! The simulator works on raw fixed-point integers. Convolutions run through
//! their adder graphs patch by patch; every other block follows its
//! functional definition. Throughput, latency and operation counts are
//! computed from the network description.

mod image;
mod layers;
mod ops;
mod simulate;
mod throughput;
mod weights;
mod window;

pub use image::ImageStream;
pub use layers::{
    argmax, dense, dense_mac, dense_memory, max_pool, mux_layer, scale_shift, DenseMemory, Mux, BRAM_BITS,
    BRAM_PORT_BITS, WEIGHT_BITS,
};
pub use ops::{op_count, OpRow, OpTable};
pub use simulate::{compile, compile_conv, simulate, CompiledNetwork, ConvEngine, SimResult, DEFAULT_ARITY};
pub use throughput::{frames_per_sec, throughput_model, LayerTiming, Rate, ThroughputReport};
pub use weights::{NetworkWeights, DEFAULT_EPSILON};
pub use window::{window_stream, WindowBuffer};

#[cfg(test)]
mod tests;
