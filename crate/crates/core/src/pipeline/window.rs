use std::collections::VecDeque;

use super::image::ImageStream;

/// Streaming im2row buffer for an `N x N` window with `N / 2` zero padding.
///
/// Pixels enter one at a time in raster order. `N - 1` line buffers, each one
/// image row long, delay the stream so that the newest column of the window
/// holds the pixels at the same image column in the `N` most recent rows. The
/// window itself is an `N x N` shift register of those columns. Positions that
/// fall outside the image are masked to zero when a patch is read out.
///
/// Patches are laid out by window row, then window column, then channel.
#[derive(Clone, Debug)]
pub struct WindowBuffer {
    kernel: usize,
    width: usize,
    height: usize,
    channels: usize,
    lines: Vec<VecDeque<Vec<i64>>>,
    /// `window[a][b]` holds the pixel `a` rows and `b` columns behind the
    /// newest one.
    window: Vec<Vec<Vec<i64>>>,
    /// Linear position of the newest pixel, counting flush pixels.
    pushed: usize,
}

impl WindowBuffer {
    pub fn new(kernel: usize, width: usize, height: usize, channels: usize) -> WindowBuffer {
        assert!(kernel % 2 == 1, "window edge must be odd");
        let zero = vec![0; channels];
        WindowBuffer {
            kernel,
            width,
            height,
            channels,
            lines: (1..kernel).map(|_| VecDeque::from(vec![zero.clone(); width])).collect(),
            window: vec![vec![zero; kernel]; kernel],
            pushed: 0,
        }
    }

    fn pad(&self) -> usize {
        self.kernel / 2
    }

    /// Same-column taps of the newest column, newest row first.
    pub fn column_taps(&self) -> Vec<&[i64]> {
        self.window.iter().map(|row| row[0].as_slice()).collect()
    }

    /// Feeds one pixel and returns the patch centred `pad` rows and `pad`
    /// columns behind it, once that centre lies in the image.
    pub fn push(&mut self, pixel: &[i64]) -> Option<Vec<i64>> {
        assert_eq!(pixel.len(), self.channels);
        let mut tap = pixel.to_vec();
        let mut column = Vec::with_capacity(self.kernel);
        column.push(tap.clone());
        for line in &mut self.lines {
            line.push_back(tap);
            tap = line.pop_front().expect("line buffer holds a full row");
            column.push(tap.clone());
        }
        for (a, value) in column.into_iter().enumerate() {
            self.window[a].pop();
            self.window[a].insert(0, value);
        }
        self.pushed += 1;
        let lag = self.pad() * self.width + self.pad();
        let centre = (self.pushed - 1).checked_sub(lag)?;
        (centre < self.width * self.height).then(|| self.patch(centre))
    }

    fn patch(&self, centre: usize) -> Vec<i64> {
        let (n, p) = (self.kernel, self.pad());
        let (ci, cj) = (centre / self.width, centre % self.width);
        let mut out = Vec::with_capacity(n * n * self.channels);
        for q in 0..n {
            for u in 0..n {
                let (r, c) = ((ci + q).wrapping_sub(p), (cj + u).wrapping_sub(p));
                if r < self.height && c < self.width {
                    out.extend_from_slice(&self.window[n - 1 - q][n - 1 - u]);
                } else {
                    out.extend(std::iter::repeat_n(0, self.channels));
                }
            }
        }
        out
    }

    /// Pushes the zero pixels that drain the last `pad` rows of patches.
    pub fn flush(&mut self) -> Vec<Vec<i64>> {
        let zero = vec![0; self.channels];
        let lag = self.pad() * self.width + self.pad();
        (0..lag).filter_map(|_| self.push(&zero)).collect()
    }
}

/// Every patch of an image, in raster order of the centre pixel.
pub fn window_stream(img: &ImageStream, kernel: usize) -> Vec<Vec<i64>> {
    let mut buffer = WindowBuffer::new(kernel, img.width, img.height, img.channels);
    let mut patches: Vec<Vec<i64>> = img.pixels().filter_map(|px| buffer.push(px)).collect();
    patches.extend(buffer.flush());
    patches
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::FixedPointFormat;

    fn numbered(w: usize) -> ImageStream {
        ImageStream::new(w, w, 1, FixedPointFormat::ACTIVATION, (0..(w * w) as i64).collect()).unwrap()
    }

    fn gather(img: &ImageStream, kernel: usize, i: usize, j: usize) -> Vec<i64> {
        let p = kernel as isize / 2;
        let mut out = Vec::new();
        for q in 0..kernel as isize {
            for u in 0..kernel as isize {
                let (a, b) = (i as isize + q - p, j as isize + u - p);
                if a >= 0 && b >= 0 && (a as usize) < img.height && (b as usize) < img.width {
                    out.extend_from_slice(img.pixel(a as usize, b as usize));
                } else {
                    out.extend(std::iter::repeat_n(0, img.channels));
                }
            }
        }
        out
    }

    #[test]
    fn taps_follow_the_line_buffers() {
        let img = numbered(6);
        let mut buffer = WindowBuffer::new(3, 6, 6, 1);
        for px in img.pixels().take(28) {
            buffer.push(px);
        }
        let taps: Vec<i64> = buffer.column_taps().iter().map(|t| t[0]).collect();
        assert_eq!(taps, vec![27, 21, 15]);
    }

    #[test]
    fn one_by_one_patches_are_pixels() {
        let img = numbered(4);
        let patches = window_stream(&img, 1);
        assert_eq!(patches, img.pixels().map(<[i64]>::to_vec).collect::<Vec<_>>());
    }

    #[test]
    fn matches_direct_gather() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (w, kernel) in [(8, 3), (5, 5), (7, 3), (3, 3)] {
            let data = (0..w * w * 3).map(|_| rng.random_range(-500..500)).collect();
            let img = ImageStream::new(w, w, 3, FixedPointFormat::ACTIVATION, data).unwrap();
            let patches = window_stream(&img, kernel);
            assert_eq!(patches.len(), w * w);
            for (k, patch) in patches.iter().enumerate() {
                assert_eq!(patch, &gather(&img, kernel, k / w, k % w), "patch {k}");
            }
        }
    }
}
