use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{FixedPointFormat, SaturationCounter};

/// A raster image of raw fixed-point values. Pixels are stored in raster
/// order, each pixel holding `channels` consecutive values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageStream {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub format: FixedPointFormat,
    pub data: Vec<i64>,
}

impl ImageStream {
    pub fn new(width: usize, height: usize, channels: usize, format: FixedPointFormat, data: Vec<i64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Shape("image dimensions must be positive".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(&v) = data.iter().find(|&&v| v < format.min_raw() || v > format.max_raw()) {
            return Err(Error::Shape(format!("value {v} does not fit {format}")));
        }
        Ok(ImageStream { width, height, channels, format, data })
    }

    pub fn zeros(width: usize, height: usize, channels: usize, format: FixedPointFormat) -> Self {
        ImageStream { width, height, channels, format, data: vec![0; width * height * channels] }
    }

    /// Quantizes real pixel values, counting clamped ones.
    pub fn from_real(
        width: usize,
        height: usize,
        channels: usize,
        format: FixedPointFormat,
        values: &[f64],
        sat: &mut SaturationCounter,
    ) -> Result<Self> {
        let data = values.iter().map(|&v| format.quantize_counted(v, sat).raw).collect();
        ImageStream::new(width, height, channels, format, data)
    }

    /// Uniform raw values in `[-limit, limit]` from a seeded generator.
    pub fn random(
        width: usize,
        height: usize,
        channels: usize,
        format: FixedPointFormat,
        limit: i64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limit = limit.clamp(0, format.max_raw());
        let data = (0..width * height * channels).map(|_| rng.random_range(-limit..=limit)).collect();
        ImageStream { width, height, channels, format, data }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[i64] {
        let at = (row * self.width + col) * self.channels;
        &self.data[at..at + self.channels]
    }

    /// Pixels in streaming order.
    pub fn pixels(&self) -> std::slice::ChunksExact<'_, i64> {
        self.data.chunks_exact(self.channels)
    }

    /// Binary form: a header line `img <W> <H> <D> <frac_bits>` followed by
    /// 16-bit little-endian two's-complement values in raster order.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.format.total_bits != 16 {
            return Err(Error::Config(format!("binary images hold 16-bit values, not {}", self.format)));
        }
        let mut out =
            format!("img {} {} {} {}\n", self.width, self.height, self.channels, self.format.frac_bits).into_bytes();
        for &v in &self.data {
            out.extend_from_slice(&(v as i16).to_le_bytes());
        }
        Ok(out)
    }

    /// Text form: a header line `imgtxt <W> <H> <D> <frac_bits>` followed by one
    /// line per pixel of whitespace-separated raw values.
    pub fn to_text(&self) -> String {
        let mut out = format!("imgtxt {} {} {} {}\n", self.width, self.height, self.channels, self.format.frac_bits);
        for px in self.pixels() {
            let line: Vec<String> = px.iter().map(i64::to_string).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }

    /// Reads either the binary or the text form.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline =
            bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::parse(1, 1, "missing image header"))?;
        let header =
            std::str::from_utf8(&bytes[..newline]).map_err(|_| Error::parse(1, 1, "image header is not text"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (tag, dims) = match fields.as_slice() {
            [tag @ ("img" | "imgtxt"), rest @ ..] if rest.len() == 4 => (*tag, rest),
            _ => return Err(Error::parse(1, 1, "expected `img <W> <H> <D> <frac_bits>` or `imgtxt ...`")),
        };
        let mut nums = [0usize; 4];
        for (i, f) in dims.iter().enumerate() {
            nums[i] =
                f.parse().map_err(|_| Error::parse(1, header.find(f).unwrap_or(0) + 1, format!("bad number {f:?}")))?;
        }
        let [w, h, d, frac] = nums;
        if frac >= 16 {
            return Err(Error::parse(1, 1, "frac_bits must be below 16"));
        }
        let format = FixedPointFormat { total_bits: 16, frac_bits: frac as u32 };
        let body = &bytes[newline + 1..];
        let count =
            w.checked_mul(h).and_then(|n| n.checked_mul(d)).ok_or_else(|| Error::parse(1, 1, "image is too large"))?;
        let data = if tag == "img" {
            if body.len() != count * 2 {
                return Err(Error::Shape(format!("expected {} bytes of pixel data, found {}", count * 2, body.len())));
            }
            body.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]]) as i64).collect()
        } else {
            let text = std::str::from_utf8(body).map_err(|_| Error::parse(2, 1, "image body is not text"))?;
            let mut data = Vec::with_capacity(count);
            for (i, line) in text.lines().enumerate() {
                for tok in line.split_whitespace() {
                    let col = tok.as_ptr() as usize - line.as_ptr() as usize + 1;
                    data.push(tok.parse::<i64>().map_err(|_| Error::parse(i + 2, col, format!("bad value {tok:?}")))?);
                }
            }
            data
        };
        ImageStream::new(w, h, d, format, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ImageStream {
        ImageStream::new(2, 3, 2, FixedPointFormat::ACTIVATION, vec![0, 1, -2, 3, 32767, -32768, 5, 6, 7, 8, 9, 10])
            .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let img = sample();
        assert_eq!(ImageStream::from_bytes(&img.to_bytes().unwrap()).unwrap(), img);
    }

    #[test]
    fn text_round_trip() {
        let img = sample();
        assert_eq!(ImageStream::from_bytes(img.to_text().as_bytes()).unwrap(), img);
        assert_eq!(img.pixel(2, 1), &[9, 10]);
    }

    #[test]
    fn rejects_bad_images() {
        assert!(ImageStream::from_bytes(b"img 2 2 1 4\n\x00").is_err());
        assert!(ImageStream::from_bytes(b"imgtxt 1 1 1 4\n40000\n").is_err());
        assert!(ImageStream::from_bytes(b"picture 1 1 1 4\n").is_err());
        assert!(matches!(ImageStream::from_bytes(b"imgtxt 1 1 1 4\nx\n"), Err(Error::Parse { line: 2, col: 1, .. })));
    }
}
