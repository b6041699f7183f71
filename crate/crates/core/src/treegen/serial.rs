//! Word- and bit-serial adders and the serial schedule of a graph.
//!
//! A serial adder consumes one digit of each operand per cycle, least
//! significant first, keeping the carry between cycles. A subtracted operand
//! is fed inverted and adds one to the reset value of the carry, so a plain
//! subtractor resets its carry to 1.

use num_rational::Ratio;

use super::graph::{word_mask, AdderGraph};
use crate::error::{Error, Result};
use crate::model::Sign;

/// Sums signed `digits × width`-bit words one digit per step. The result is
/// the exact sum modulo `2^(digits·width)`.
pub fn serial_sum(operands: &[(u64, Sign)], digits: u32, width: u32) -> u64 {
    let digit_mask = word_mask(width);
    let mut carry: u64 = operands.iter().filter(|(_, s)| s.is_neg()).count() as u64;
    let mut out = 0u64;
    for d in 0..digits {
        let shift = d * width;
        let mut acc = carry;
        for &(word, sign) in operands {
            let digit = (word >> shift) & digit_mask;
            acc += match sign {
                Sign::Pos => digit,
                Sign::Neg => !digit & digit_mask,
            };
        }
        out |= (acc & digit_mask) << shift;
        carry = acc >> width;
    }
    out & word_mask(digits * width)
}

/// Two-operand serial add or subtract on `total_bits`-wide words.
pub fn serial_add(a: u64, b: u64, subtract: bool, digits: u32, total_bits: u32) -> u64 {
    let sign = if subtract { Sign::Neg } else { Sign::Pos };
    serial_sum(&[(a, Sign::Pos), (b, sign)], digits, total_bits / digits)
}

/// How a layer's adders are time-multiplexed over the bits of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SerialSchedule {
    pub digits: u32,
    pub digit_width: u32,
}

impl SerialSchedule {
    /// One digit per cycle between samples, capped at one bit per digit.
    pub fn for_interval(pixel_interval: u64, total_bits: u32) -> Result<SerialSchedule> {
        if pixel_interval == 0 || total_bits == 0 || total_bits > 64 {
            return Err(Error::Config(format!(
                "no serial schedule for interval {pixel_interval} at {total_bits} bits"
            )));
        }
        let digits = pixel_interval.min(total_bits as u64) as u32;
        if !total_bits.is_multiple_of(digits) {
            return Err(Error::Config(format!(
                "pixel interval {pixel_interval} gives {digits} digits, which do not divide a {total_bits}-bit word"
            )));
        }
        Ok(SerialSchedule { digits, digit_width: total_bits / digits })
    }

    pub fn cycles_per_sample(&self) -> u32 {
        self.digits
    }

    /// Cycles from the first input digit to the last output digit.
    pub fn latency(&self, depth: u32) -> u32 {
        depth + self.digits - 1
    }

    /// Adder area relative to a word-parallel adder.
    pub fn area_factor(&self) -> Ratio<u32> {
        Ratio::new(1, self.digits)
    }

    pub fn describe(&self) -> String {
        match (self.digits, self.digit_width) {
            (1, w) => format!("parallel {w}-bit"),
            (_, 1) => "bit-serial".to_string(),
            (_, w) => format!("{w}-bit word-serial"),
        }
    }
}

/// Rewrites the graph's digit schedule for a layer fed one sample every
/// `pixel_interval` cycles. Node structure and results are unchanged.
pub fn schedule_serial(g: &AdderGraph, pixel_interval: u64, total_bits: u32) -> Result<AdderGraph> {
    let sched = SerialSchedule::for_interval(pixel_interval, total_bits)?;
    let mut out = g.clone();
    out.digits = sched.digits;
    out.word_bits = total_bits;
    Ok(out)
}
