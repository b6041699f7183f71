use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;

use crate::model::{LayerKind, NetworkSpec};
use crate::treegen::SerialSchedule;

/// A burst of `values` every `cycles` clock cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rate {
    pub values: u64,
    pub cycles: u64,
}

impl Rate {
    pub fn per_cycle(&self) -> Ratio<u64> {
        Ratio::new(self.values, self.cycles)
    }

    /// The steady stream carrying the same average rate.
    pub fn steady(&self) -> Rate {
        let r = self.per_cycle();
        Rate { values: *r.numer(), cycles: *r.denom() }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = if self.values == 1 { "value" } else { "values" };
        if self.cycles == 1 {
            write!(f, "{} {unit} every cycle", self.values)
        } else {
            write!(f, "{} {unit} every {} cycles", self.values, self.cycles)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerTiming {
    pub layer: usize,
    pub label: String,
    pub kind: LayerKind,
    /// Output image edge and channels (edge 1 for flat vectors).
    pub out_width: usize,
    pub out_channels: usize,
    pub out_rate: Rate,
    /// Serial adder schedule of a convolution.
    pub schedule: Option<SerialSchedule>,
    /// Values consumed per cycle by a dense layer.
    pub lanes: Option<u64>,
    pub latency_cycles: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThroughputReport {
    pub clock_hz: f64,
    pub input: Rate,
    pub layers: Vec<LayerTiming>,
    /// Cycles between consecutive images.
    pub frame_cycles: u64,
    /// Whole images per second.
    pub frames_per_sec: u64,
    /// Estimated cycles from the first input pixel to the last score: the
    /// image streaming time plus every block's own delay.
    pub latency_cycles: u64,
    /// Peak FIFO occupancy in values, by layer index.
    pub fifo_high_water: BTreeMap<usize, u64>,
}

impl ThroughputReport {
    pub fn latency_seconds(&self) -> f64 {
        self.latency_cycles as f64 / self.clock_hz
    }

    /// Distinct stream rates from the input through the first MUX, the part
    /// of the network whose rate is set by pooling.
    pub fn cascade(&self) -> Vec<Rate> {
        let mut out = vec![self.input];
        for l in &self.layers {
            if out.last() != Some(&l.out_rate) {
                out.push(l.out_rate);
            }
            if l.kind == LayerKind::Mux {
                break;
            }
        }
        out
    }

    /// Plain-text report: image size and rate per block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<14} {:<12} {:<12} {}\n", "block", "kind", "output", "rate"));
        out.push_str(&format!("{:<14} {:<12} {:<12} {}\n", "input", "-", "", self.input));
        for l in &self.layers {
            let size = if l.out_width == 1 {
                l.out_channels.to_string()
            } else {
                format!("{0}x{0}x{1}", l.out_width, l.out_channels)
            };
            let mut line = format!("{:<14} {:<12} {:<12} {}", l.label, kind_name(l.kind), size, l.out_rate);
            if let Some(s) = l.schedule {
                line.push_str(&format!("  [{}]", s.describe()));
            }
            if let Some(lanes) = l.lanes {
                line.push_str(&format!("  [{lanes} lane{}]", if lanes == 1 { "" } else { "s" }));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out.push_str(&format!("cycles/frame {}\n", self.frame_cycles));
        out.push_str(&format!("{} frames/sec\n", self.frames_per_sec));
        out.push_str(&format!(
            "latency (estimate) {} cycles = {:.2} us\n",
            self.latency_cycles,
            self.latency_seconds() * 1e6
        ));
        for (i, hw) in &self.fifo_high_water {
            out.push_str(&format!("fifo {} high-water {hw} values\n", self.layers[*i].label));
        }
        out
    }
}

fn kind_name(kind: LayerKind) -> &'static str {
    match kind {
        LayerKind::Buffer => "buffer",
        LayerKind::Conv => "conv",
        LayerKind::MaxPool => "max_pool",
        LayerKind::ScaleShift => "scale_shift",
        LayerKind::Mux => "mux",
        LayerKind::Dense => "dense",
        LayerKind::Fifo => "fifo",
    }
}

/// Images per second when one pixel enters per cycle.
pub fn frames_per_sec(clock_hz: f64, width: usize) -> u64 {
    (clock_hz / (width * width) as f64).floor() as u64
}

/// Smallest depth a tree summing `terms` operands can have.
fn min_depth(terms: usize, arity: usize) -> u64 {
    let mut d = 0;
    let mut reach = 1;
    while reach < terms {
        reach *= arity;
        d += 1;
    }
    d
}

/// Cycle on which each pixel of a layer's output becomes available, relative
/// to the first pixel entering that layer.
fn pool_ready_times(width: usize, interval: u64, kernel: usize, stride: usize) -> Vec<u64> {
    let ow = width / stride;
    let mut t = Vec::with_capacity(ow * ow);
    for i in 0..ow {
        for j in 0..ow {
            let r = (i * stride + kernel - 1).min(width - 1);
            let c = (j * stride + kernel - 1).min(width - 1);
            t.push((r * width + c) as u64 * interval);
        }
    }
    t
}

/// Peak occupancy of a FIFO filled by `arrivals` bursts of `burst` values per
/// frame and drained by a steady `drain` stream, over two overlapping frames.
fn fifo_peak(arrivals: &[u64], burst: u64, drain: Ratio<u64>, frame_cycles: u64) -> u64 {
    let mut events: Vec<u64> = arrivals.iter().flat_map(|&t| [t, t + frame_cycles]).collect();
    events.sort_unstable();
    let end = events.last().copied().unwrap_or(0) + frame_cycles;
    // Track occupancy in units of 1/denominator values so drains stay exact.
    let scale = *drain.denom();
    let per_cycle = *drain.numer();
    let mut level: u64 = 0;
    let mut peak = 0;
    let mut next = 0;
    for cycle in 0..=end {
        while next < events.len() && events[next] == cycle {
            level += burst * scale;
            next += 1;
        }
        peak = peak.max(level);
        level = level.saturating_sub(per_cycle);
    }
    peak.div_ceil(scale)
}

/// Analytic stream-rate and latency model. `depths` supplies adder-tree
/// depths of built convolution graphs; missing layers use the shallowest
/// possible tree over the full patch.
pub fn throughput_model(net: &NetworkSpec, depths: &BTreeMap<usize, u32>) -> ThroughputReport {
    let w0 = net.input_width();
    let frame_cycles = (w0 * w0) as u64;
    let input = Rate { values: net.input_channels() as u64, cycles: 1 };
    let mut rate = input;
    let mut vector_len: Option<u64> = None;
    let mut layers = Vec::new();
    let mut fifo_high_water = BTreeMap::new();
    let mut latency = 0u64;
    let bits = net.act_format.total_bits;
    for (i, layer) in net.layers.iter().enumerate() {
        let m = layer.pixel_interval.unwrap_or(1);
        let w = layer.in_width;
        let mut schedule = None;
        let mut lanes = None;
        let (out_rate, cycles) = match layer.kind {
            LayerKind::Buffer => {
                let h = if layer.kernel % 2 == 1 { layer.kernel / 2 } else { layer.kernel - 1 };
                (rate, (h * w + h) as u64 * m)
            }
            LayerKind::Fifo | LayerKind::ScaleShift => (rate, u64::from(layer.kind == LayerKind::ScaleShift)),
            LayerKind::Conv => {
                let s = SerialSchedule::for_interval(m, bits).ok();
                schedule = s;
                let arity = layer.arity.unwrap_or(2);
                let depth = depths
                    .get(&i)
                    .map(|&d| d as u64)
                    .unwrap_or_else(|| min_depth(layer.kernel * layer.kernel * layer.in_channels, arity));
                let digits = s.map_or(1, |s| s.digits as u64);
                let stride2 = (layer.stride * layer.stride) as u64;
                (Rate { values: layer.out_channels() as u64, cycles: m * stride2 }, depth + digits - 1)
            }
            LayerKind::MaxPool => {
                let stride2 = (layer.stride * layer.stride) as u64;
                (Rate { values: layer.in_channels as u64, cycles: m * stride2 }, 1)
            }
            LayerKind::Mux => {
                let out = rate.steady();
                if layer.in_width > 1 {
                    vector_len = Some((layer.in_width * layer.in_width * layer.in_channels) as u64);
                }
                (out, rate.cycles)
            }
            LayerKind::Dense => {
                let n = vector_len.unwrap_or(layer.in_channels as u64);
                let l = layer.lanes.map(|l| l as u64).unwrap_or_else(|| n.div_ceil(frame_cycles).max(1));
                lanes = Some(l);
                vector_len = Some(layer.out_channels() as u64);
                (Rate { values: layer.out_channels() as u64, cycles: frame_cycles }, n.div_ceil(l) + 1)
            }
        };
        if layer.kind == LayerKind::Fifo && layer.in_width > 1 {
            let arrivals = match i.checked_sub(1).map(|p| &net.layers[p]) {
                Some(prev) if prev.kind == LayerKind::MaxPool => {
                    pool_ready_times(prev.in_width, prev.pixel_interval.unwrap_or(1), prev.kernel, prev.stride)
                }
                _ => (0..(w * w) as u64).map(|k| k * m).collect(),
            };
            let drain = Ratio::new(layer.in_channels as u64, m);
            fifo_high_water.insert(i, fifo_peak(&arrivals, layer.in_channels as u64, drain, frame_cycles));
        }
        latency += cycles;
        rate = out_rate;
        layers.push(LayerTiming {
            layer: i,
            label: layer.label(i),
            kind: layer.kind,
            out_width: layer.out_width(),
            out_channels: layer.out_channels(),
            out_rate,
            schedule,
            lanes,
            latency_cycles: cycles,
        });
    }
    ThroughputReport {
        clock_hz: net.clock_hz,
        input,
        layers,
        frame_cycles,
        frames_per_sec: frames_per_sec(net.clock_hz, w0),
        latency_cycles: latency + frame_cycles,
        fifo_high_water,
    }
}
