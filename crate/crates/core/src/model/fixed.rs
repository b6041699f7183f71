//! Two's-complement fixed-point formats.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `total_bits` wide two's-complement values with `frac_bits` fractional bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointFormat {
    pub total_bits: u32,
    pub frac_bits: u32,
}

impl FixedPointFormat {
    /// Q12.4, the activation format.
    pub const ACTIVATION: FixedPointFormat = FixedPointFormat { total_bits: 16, frac_bits: 4 };
    /// Q10.6, the scale-constant format.
    pub const SCALE: FixedPointFormat = FixedPointFormat { total_bits: 16, frac_bits: 6 };

    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self> {
        let fmt = FixedPointFormat { total_bits, frac_bits };
        fmt.validate()?;
        Ok(fmt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_bits == 0 || self.total_bits > 64 || self.frac_bits >= self.total_bits {
            return Err(Error::Config(format!(
                "fixed-point format needs 0 <= frac_bits < total_bits <= 64, got {self}"
            )));
        }
        Ok(())
    }

    pub fn min_raw(&self) -> i64 {
        if self.total_bits == 64 {
            i64::MIN
        } else {
            -(1i64 << (self.total_bits - 1))
        }
    }

    pub fn max_raw(&self) -> i64 {
        if self.total_bits == 64 {
            i64::MAX
        } else {
            (1i64 << (self.total_bits - 1)) - 1
        }
    }

    /// Value of one raw unit.
    pub fn resolution(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    /// Clamps a raw value into range; the flag reports whether it moved.
    pub fn saturate(&self, raw: i64) -> (i64, bool) {
        let clamped = raw.clamp(self.min_raw(), self.max_raw());
        (clamped, clamped != raw)
    }

    /// Round-to-nearest (ties away from zero), saturating.
    pub fn quantize(&self, x: f64) -> FixedValue {
        self.quantize_counted(x, &mut SaturationCounter::default())
    }

    pub fn quantize_counted(&self, x: f64, sat: &mut SaturationCounter) -> FixedValue {
        let scaled = (x * (self.frac_bits as f64).exp2()).round();
        let raw = if scaled.is_nan() {
            0
        } else if scaled >= self.max_raw() as f64 {
            if scaled > self.max_raw() as f64 {
                sat.record();
            }
            self.max_raw()
        } else if scaled <= self.min_raw() as f64 {
            if scaled < self.min_raw() as f64 {
                sat.record();
            }
            self.min_raw()
        } else {
            scaled as i64
        };
        FixedValue { raw, format: *self }
    }

    pub fn from_raw(&self, raw: i64) -> FixedValue {
        FixedValue { raw, format: *self }
    }
}

impl Default for FixedPointFormat {
    fn default() -> Self {
        FixedPointFormat::ACTIVATION
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.total_bits - self.frac_bits, self.frac_bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedValue {
    pub raw: i64,
    pub format: FixedPointFormat,
}

impl FixedValue {
    pub fn to_f64(self) -> f64 {
        self.raw as f64 * self.format.resolution()
    }
}

/// Counts values that had to be clamped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SaturationCounter {
    pub events: u64,
}

impl SaturationCounter {
    pub fn record(&mut self) {
        self.events += 1;
    }

    pub fn saturate(&mut self, format: &FixedPointFormat, raw: i64) -> i64 {
        let (v, hit) = format.saturate(raw);
        if hit {
            self.record();
        }
        v
    }
}

/// Arithmetic right shift with round-to-nearest, ties away from zero.
pub fn shift_round(value: i64, shift: u32) -> i64 {
    if shift == 0 {
        return value;
    }
    let half = 1i128 << (shift - 1);
    let v = value as i128;
    let r = if v >= 0 { (v + half) >> shift } else { -((-v + half) >> shift) };
    r as i64
}
