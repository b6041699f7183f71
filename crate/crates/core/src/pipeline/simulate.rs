use std::collections::BTreeMap;

use crate::cse;
use crate::error::{Error, Result};
use crate::model::{
    CseMethod, LayerKind, LayerSpec, NetworkSpec, QuantizedScaleShift, SaturationCounter, TernaryMatrix,
};
use crate::treegen::{build_tree, cost, schedule_serial, AdderGraph, CostReport};

use super::image::ImageStream;
use super::layers::{argmax, dense_mac, max_pool, mux_layer, scale_shift};
use super::weights::NetworkWeights;
use super::window::window_stream;

/// Adder-tree arity used when a layer does not set one.
pub const DEFAULT_ARITY: usize = 2;

/// A convolution layer realised as a scheduled adder graph.
#[derive(Clone, Debug)]
pub struct ConvEngine {
    pub layer: usize,
    pub graph: AdderGraph,
    pub cost: CostReport,
}

/// Builds the adder graph of one convolution layer.
pub fn compile_conv(
    layer: &LayerSpec,
    index: usize,
    m: &TernaryMatrix,
    method: CseMethod,
    total_bits: u32,
) -> Result<ConvEngine> {
    let arity = layer.arity.unwrap_or(DEFAULT_ARITY);
    let interval = layer.pixel_interval.unwrap_or(1);
    if arity == 3 && interval > 1 {
        return Err(Error::Config(format!(
            "{}: 3-input adders need one pixel per cycle, but pixels arrive every {interval} cycles",
            layer.label(index)
        )));
    }
    let r = cse::run(m, method);
    let g = schedule_serial(&build_tree(&r, arity)?, interval, total_bits)?;
    Ok(ConvEngine { layer: index, cost: cost(&g), graph: g })
}

/// A network with its graphs built and its constants quantized.
#[derive(Clone, Debug)]
pub struct CompiledNetwork {
    pub net: NetworkSpec,
    pub method: CseMethod,
    pub convs: BTreeMap<usize, ConvEngine>,
    pub dense: BTreeMap<usize, TernaryMatrix>,
    pub scale_shift: BTreeMap<usize, QuantizedScaleShift>,
    /// Scale constants that had to be clamped while quantizing.
    pub constant_saturations: u64,
}

pub fn compile(net: &NetworkSpec, weights: &NetworkWeights, method: CseMethod) -> Result<CompiledNetwork> {
    weights.check(net)?;
    let mut out = CompiledNetwork {
        net: net.clone(),
        method,
        convs: BTreeMap::new(),
        dense: BTreeMap::new(),
        scale_shift: BTreeMap::new(),
        constant_saturations: 0,
    };
    for (i, layer) in net.layers.iter().enumerate() {
        match layer.kind {
            LayerKind::Conv => {
                let engine = compile_conv(layer, i, &weights.matrices[&i], method, net.act_format.total_bits)?;
                out.convs.insert(i, engine);
            }
            LayerKind::Dense => {
                out.dense.insert(i, weights.matrices[&i].clone());
            }
            LayerKind::ScaleShift => {
                let p = weights
                    .scale_shift
                    .get(&i)
                    .ok_or_else(|| Error::Shape(format!("{} has no scale parameters", layer.label(i))))?;
                let q = p.quantize(net.scale_format, net.act_format);
                out.constant_saturations += q.saturated;
                out.scale_shift.insert(i, q);
            }
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimResult {
    /// Raw fixed-point scores of the last layer.
    pub scores: Vec<i64>,
    pub argmax: Option<usize>,
    /// Values clamped in the activation datapath.
    pub saturations: u64,
}

enum Signal {
    Image(ImageStream),
    Vector(Vec<i64>),
}

impl Signal {
    fn image(self, layer: &str) -> Result<ImageStream> {
        match self {
            Signal::Image(img) => Ok(img),
            Signal::Vector(_) => Err(Error::Shape(format!("{layer} needs an image, got a flat vector"))),
        }
    }

    fn vector(self) -> Vec<i64> {
        match self {
            Signal::Image(img) => img.data,
            Signal::Vector(v) => v,
        }
    }
}

impl CompiledNetwork {
    /// Runs one image through every block in order.
    ///
    /// Buffers and FIFOs only reorder or delay the stream, so they pass values
    /// through; the windowing they feed is performed by the convolution that
    /// follows. Adder-tree and dense outputs saturate to the activation width.
    pub fn simulate(&self, img: &ImageStream) -> Result<SimResult> {
        let net = &self.net;
        let act = net.act_format;
        if (img.width, img.height, img.channels) != (net.input_width(), net.input_width(), net.input_channels()) {
            return Err(Error::Shape(format!(
                "network takes {0}x{0}x{1} images, got {2}x{3}x{4}",
                net.input_width(),
                net.input_channels(),
                img.width,
                img.height,
                img.channels
            )));
        }
        if img.format != act {
            return Err(Error::Shape(format!("image is {} but the network runs at {act}", img.format)));
        }
        let mut sat = SaturationCounter::default();
        let mut signal = Signal::Image(img.clone());
        for (i, layer) in net.layers.iter().enumerate() {
            let label = layer.label(i);
            signal = match layer.kind {
                LayerKind::Buffer | LayerKind::Fifo => signal,
                LayerKind::Conv => {
                    let img = signal.image(&label)?;
                    let g = &self.convs[&i].graph;
                    let mut values = Vec::with_capacity(g.nodes.len());
                    let (w, s) = (img.width, layer.stride);
                    let mut data = Vec::with_capacity(layer.out_width().pow(2) * layer.out_channels());
                    for (k, patch) in window_stream(&img, layer.kernel).into_iter().enumerate() {
                        if (k / w) % s != 0 || (k % w) % s != 0 {
                            continue;
                        }
                        data.extend(g.evaluate_with(&patch, &mut values).into_iter().map(|v| sat.saturate(&act, v)));
                    }
                    let ow = layer.out_width();
                    Signal::Image(ImageStream {
                        width: ow,
                        height: ow,
                        channels: layer.out_channels(),
                        format: act,
                        data,
                    })
                }
                LayerKind::MaxPool => Signal::Image(max_pool(&signal.image(&label)?, layer.kernel, layer.stride)?),
                LayerKind::ScaleShift => {
                    let p = &self.scale_shift[&i];
                    match signal {
                        Signal::Image(mut img) => {
                            let data: Vec<i64> =
                                img.pixels().flat_map(|px| scale_shift(px, p, layer.activation, &mut sat)).collect();
                            img.data = data;
                            Signal::Image(img)
                        }
                        Signal::Vector(v) => Signal::Vector(scale_shift(&v, p, layer.activation, &mut sat)),
                    }
                }
                LayerKind::Mux => match (signal, layer.pixel_interval) {
                    (Signal::Image(img), Some(m)) => Signal::Vector(mux_layer(&img, m as usize)?),
                    (other, _) => Signal::Vector(other.vector()),
                },
                LayerKind::Dense => {
                    let y = dense_mac(&signal.vector(), &self.dense[&i])?;
                    Signal::Vector(y.into_iter().map(|v| sat.saturate(&act, v)).collect())
                }
            };
        }
        let scores = signal.vector();
        Ok(SimResult { argmax: argmax(&scores), scores, saturations: sat.events })
    }
}

/// Compiles with the network's CSE method (none if unset) and simulates.
pub fn simulate(net: &NetworkSpec, weights: &NetworkWeights, img: &ImageStream) -> Result<SimResult> {
    compile(net, weights, net.cse_method.unwrap_or(CseMethod::None))?.simulate(img)
}
