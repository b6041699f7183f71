use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::fixed::{FixedPointFormat, SaturationCounter};

/// Per-channel constants of a fused scale-and-shift block: `y = c ⊙ x + b`
/// with `c = s · a`.
///
/// Text form (`.ssp`): a header `ssp <channels> <s>` and one `<c> <b>` line per
/// channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleShiftParams {
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub s: f64,
}

impl ScaleShiftParams {
    /// Folds the ternary scaling factor into the normalization scale.
    pub fn fuse(s: f64, a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Shape(format!("scale has {} channels, shift has {}", a.len(), b.len())));
        }
        Ok(ScaleShiftParams { c: a.iter().map(|a| s * a).collect(), b: b.to_vec(), s })
    }

    pub fn identity(channels: usize) -> Self {
        ScaleShiftParams { c: vec![1.0; channels], b: vec![0.0; channels], s: 1.0 }
    }

    pub fn channels(&self) -> usize {
        self.c.len()
    }

    /// `c` goes to the scale format; `b` is stored pre-aligned to the
    /// activation format.
    pub fn quantize(&self, scale: FixedPointFormat, act: FixedPointFormat) -> QuantizedScaleShift {
        let mut sat = SaturationCounter::default();
        let c = self.c.iter().map(|&v| scale.quantize_counted(v, &mut sat).raw).collect();
        let b = self.b.iter().map(|&v| act.quantize_counted(v, &mut sat).raw).collect();
        QuantizedScaleShift { c, b, scale, act, saturated: sat.events }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("ssp {} {:?}\n", self.c.len(), self.s);
        for (c, b) in self.c.iter().zip(&self.b) {
            out.push_str(&format!("{c:?} {b:?}\n"));
        }
        out
    }
}

impl FromStr for ScaleShiftParams {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, 1, "missing `ssp` header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (n, s) = match fields.as_slice() {
            ["ssp", n, s] => (
                n.parse::<usize>().map_err(|_| Error::parse(1, 5, "bad channel count"))?,
                s.parse::<f64>().map_err(|_| Error::parse(1, 5, "bad scale factor"))?,
            ),
            _ => return Err(Error::parse(1, 1, "expected `ssp <channels> <s>` header")),
        };
        let mut c = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::parse(i + 1, 1, "invalid number"))?;
            match vals.as_slice() {
                [cv, bv] => {
                    c.push(*cv);
                    b.push(*bv);
                }
                _ => return Err(Error::parse(i + 1, 1, "expected `<c> <b>`")),
            }
        }
        if c.len() != n {
            return Err(Error::Shape(format!("ssp header declares {n} channels, found {}", c.len())));
        }
        Ok(ScaleShiftParams { c, b, s })
    }
}

/// Scale-and-shift constants in raw fixed-point units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedScaleShift {
    pub c: Vec<i64>,
    pub b: Vec<i64>,
    pub scale: FixedPointFormat,
    pub act: FixedPointFormat,
    /// Constants clamped during quantization.
    pub saturated: u64,
}

impl QuantizedScaleShift {
    pub fn channels(&self) -> usize {
        self.c.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuse_multiplies_scale() {
        let p = ScaleShiftParams::fuse(0.5, &[2.0, -4.0], &[1.0, 0.0]).unwrap();
        assert_eq!(p.c, vec![1.0, -2.0]);
        assert!(ScaleShiftParams::fuse(1.0, &[1.0], &[]).is_err());
    }

    #[test]
    fn quantize_uses_both_formats() {
        let p = ScaleShiftParams { c: vec![0.05, 1.0], b: vec![5.0, -0.03125], s: 1.0 };
        let q = p.quantize(FixedPointFormat::SCALE, FixedPointFormat::ACTIVATION);
        assert_eq!(q.c, vec![3, 64]);
        assert_eq!(q.b, vec![80, -1]);
    }

    #[test]
    fn text_round_trip() {
        let p = ScaleShiftParams { c: vec![0.25, -1.5], b: vec![0.0, 3.0], s: 0.7 };
        assert_eq!(p.to_text().parse::<ScaleShiftParams>().unwrap(), p);
        assert!("ssp 2 1.0\n1 2\n".parse::<ScaleShiftParams>().is_err());
    }
}
