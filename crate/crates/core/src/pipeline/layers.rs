use crate::error::{Error, Result};
use crate::model::fixed::shift_round;
use crate::model::{Activation, QuantizedScaleShift, SaturationCounter, TernaryMatrix};

use super::image::ImageStream;

/// Per-channel maximum over `k x k` windows taken every `n` pixels. Windows
/// that run past the border are clipped to the image.
pub fn max_pool(img: &ImageStream, k: usize, n: usize) -> Result<ImageStream> {
    if k == 0 || n == 0 || !img.width.is_multiple_of(n) || !img.height.is_multiple_of(n) {
        return Err(Error::Config(format!(
            "cannot pool a {}x{} image with window {k} and stride {n}",
            img.width, img.height
        )));
    }
    let (ow, oh, d) = (img.width / n, img.height / n, img.channels);
    let mut data = Vec::with_capacity(ow * oh * d);
    for i in 0..oh {
        for j in 0..ow {
            let mut best = vec![i64::MIN; d];
            for r in i * n..(i * n + k).min(img.height) {
                for c in j * n..(j * n + k).min(img.width) {
                    for (m, &v) in best.iter_mut().zip(img.pixel(r, c)) {
                        *m = (*m).max(v);
                    }
                }
            }
            data.extend(best);
        }
    }
    Ok(ImageStream { width: ow, height: oh, channels: d, format: img.format, data })
}

/// Fused scale and shift with optional ReLU on one pixel's channels.
///
/// The product of an activation and a scale constant carries both fraction
/// widths; it is shifted back to the activation format with round-half-away
/// rounding, the pre-aligned shift is added and the sum saturates to the
/// activation width.
pub fn scale_shift(x: &[i64], p: &QuantizedScaleShift, act: Activation, sat: &mut SaturationCounter) -> Vec<i64> {
    assert_eq!(x.len(), p.channels(), "scale_shift channel count");
    x.iter()
        .zip(p.c.iter().zip(&p.b))
        .map(|(&x, (&c, &b))| {
            let y = sat.saturate(&p.act, shift_round(x * c, p.scale.frac_bits) + b);
            match act {
                Activation::Relu => y.max(0),
                Activation::None => y,
            }
        })
        .collect()
}

/// Rate converter from a burst of `burst` values every `interval` cycles to a
/// steady `burst / interval` values per cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mux {
    pub burst: usize,
    pub interval: usize,
}

impl Mux {
    pub fn new(burst: usize, interval: usize) -> Result<Mux> {
        if interval == 0 || burst == 0 || !burst.is_multiple_of(interval) {
            return Err(Error::Config(format!("a MUX cannot spread {burst} values evenly over {interval} cycles")));
        }
        Ok(Mux { burst, interval })
    }

    pub fn per_cycle(&self) -> usize {
        self.burst / self.interval
    }

    /// Splits bursts into the words emitted on successive cycles.
    pub fn convert(&self, bursts: &[i64]) -> Result<Vec<Vec<i64>>> {
        if !bursts.len().is_multiple_of(self.burst) {
            return Err(Error::Shape(format!("{} values do not form whole bursts of {}", bursts.len(), self.burst)));
        }
        Ok(bursts.chunks(self.per_cycle()).map(<[i64]>::to_vec).collect())
    }
}

/// Flattens an image into one vector, pixel by pixel.
pub fn mux_layer(img: &ImageStream, interval: usize) -> Result<Vec<i64>> {
    let mux = Mux::new(img.channels, interval)?;
    Ok(mux.convert(&img.data)?.concat())
}

/// Multiply-accumulate over streamed ternary weights: each weight adds,
/// skips or subtracts its input. Accumulators are 64-bit and cannot overflow
/// for 16-bit inputs.
pub fn dense_mac(x: &[i64], t: &TernaryMatrix) -> Result<Vec<i64>> {
    if x.len() != t.cols() {
        return Err(Error::Shape(format!("dense layer takes {} inputs, got {}", t.cols(), x.len())));
    }
    Ok((0..t.rows())
        .map(|r| {
            t.row(r).iter().zip(x).fold(0i64, |acc, (&w, &v)| match w {
                1 => acc + v,
                -1 => acc - v,
                _ => acc,
            })
        })
        .collect())
}

/// Dense layer followed by its scale and shift.
pub fn dense(
    x: &[i64],
    t: &TernaryMatrix,
    p: &QuantizedScaleShift,
    act: Activation,
    sat: &mut SaturationCounter,
) -> Result<Vec<i64>> {
    let y: Vec<i64> = dense_mac(x, t)?.into_iter().map(|v| sat.saturate(&p.act, v)).collect();
    if y.len() != p.channels() {
        return Err(Error::Shape(format!("dense layer has {} outputs, scale has {}", y.len(), p.channels())));
    }
    Ok(scale_shift(&y, p, act, sat))
}

/// Weight storage and streaming cost of a dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseMemory {
    pub storage_bits: u64,
    pub bandwidth_bits_per_cycle: u64,
    pub brams: u64,
}

/// Bits per ternary weight.
pub const WEIGHT_BITS: u64 = 2;
/// Capacity and read width of one block RAM.
pub const BRAM_BITS: u64 = 64 * 1024;
pub const BRAM_PORT_BITS: u64 = 64;

/// `lanes` input values are consumed per cycle, each needing one weight per
/// output.
pub fn dense_memory(inputs: usize, outputs: usize, lanes: usize) -> DenseMemory {
    let storage_bits = inputs as u64 * outputs as u64 * WEIGHT_BITS;
    let bandwidth_bits_per_cycle = lanes as u64 * outputs as u64 * WEIGHT_BITS;
    let brams = storage_bits.div_ceil(BRAM_BITS).max(bandwidth_bits_per_cycle.div_ceil(BRAM_PORT_BITS));
    DenseMemory { storage_bits, bandwidth_bits_per_cycle, brams }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[i64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .fold(None, |best, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}
