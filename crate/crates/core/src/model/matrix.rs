//! Dense weight matrices and their text formats.
//!
//! `.tmx` holds a ternary matrix: a `tmx <rows> <cols>` header followed by one
//! line per row written with the characters `-`, `0` and `+`. `.fmx` holds a
//! real matrix: an `fmx <rows> <cols>` header followed by rows of
//! whitespace-separated decimals.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Constant weight matrix with entries in {-1, 0, +1}, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TernaryMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl TernaryMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<i8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("ternary matrix must be non-empty, got {rows}x{cols}")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|t| !(-1..=1).contains(t)) {
            return Err(Error::Shape(format!(
                "entry ({}, {}) = {} is not a trit",
                pos / cols,
                pos % cols,
                entries[pos]
            )));
        }
        Ok(TernaryMatrix { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0; rows * cols])
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn nonzeros(&self) -> usize {
        self.entries.iter().filter(|&&t| t != 0).count()
    }

    /// Fraction of zero entries.
    pub fn sparsity(&self) -> f64 {
        let zeros = self.entries.len() - self.nonzeros();
        zeros as f64 / self.entries.len() as f64
    }

    /// Exact product `self · x`.
    pub fn apply(&self, x: &[i64]) -> Vec<i64> {
        assert_eq!(x.len(), self.cols, "input length must equal column count");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .map(|(&t, &v)| match t {
                        1 => v,
                        -1 => -v,
                        _ => 0,
                    })
                    .sum()
            })
            .collect()
    }

    pub fn to_tmx(&self) -> String {
        let mut out = format!("tmx {} {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            out.extend(self.row(r).iter().map(|&t| match t {
                1 => '+',
                -1 => '-',
                _ => '0',
            }));
            out.push('\n');
        }
        out
    }
}

impl fmt::Debug for TernaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tmx())
    }
}

fn parse_header(line: Option<&str>, magic: &str) -> Result<(usize, usize)> {
    let line = line.ok_or_else(|| Error::parse(1, 1, format!("missing `{magic}` header")))?;
    let mut fields = line.split(' ');
    if fields.next() != Some(magic) {
        return Err(Error::parse(1, 1, format!("expected `{magic} <rows> <cols>` header")));
    }
    let mut dim = |name: &str| -> Result<usize> {
        fields
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(1, magic.len() + 2, format!("bad {name} count")))
    };
    let rows = dim("row")?;
    let cols = dim("column")?;
    if fields.next().is_some() {
        return Err(Error::parse(1, 1, "trailing fields in header"));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::parse(1, 1, "matrix dimensions must be positive"));
    }
    Ok((rows, cols))
}

fn body_lines(text: &str) -> std::str::Lines<'_> {
    text.strip_suffix('\n').unwrap_or(text).lines()
}

impl FromStr for TernaryMatrix {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = body_lines(text);
        let (rows, cols) = parse_header(lines.next(), "tmx")?;
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line_no = r + 2;
            let line =
                lines.next().ok_or_else(|| Error::parse(line_no, 1, format!("expected {rows} rows, found {r}")))?;
            let mut n = 0;
            for (c, ch) in line.chars().enumerate() {
                let t = match ch {
                    '+' => 1,
                    '-' => -1,
                    '0' => 0,
                    other => return Err(Error::parse(line_no, c + 1, format!("invalid trit character {other:?}"))),
                };
                entries.push(t);
                n += 1;
            }
            if n != cols {
                return Err(Error::parse(line_no, n + 1, format!("expected {cols} trits, found {n}")));
            }
        }
        if lines.next().is_some() {
            return Err(Error::parse(rows + 2, 1, "unexpected data after last row"));
        }
        TernaryMatrix::new(rows, cols, entries)
    }
}

/// Real-valued weights prior to ternarization.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl FloatMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "float matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(FloatMatrix { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Standard normal entries from a seeded generator.
    pub fn random_gaussian(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = StandardNormal.sample_iter(&mut rng).take(rows * cols).collect();
        FloatMatrix::new(rows, cols, entries)
    }

    pub fn to_fmx(&self) -> String {
        let mut out = format!("fmx {} {}\n", self.rows, self.cols);
        for row in self.entries.chunks(self.cols) {
            let cells: Vec<String> = row.iter().map(|w| format!("{w:?}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

impl FromStr for FloatMatrix {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = body_lines(text);
        let (rows, cols) = parse_header(lines.next(), "fmx")?;
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line_no = r + 2;
            let line =
                lines.next().ok_or_else(|| Error::parse(line_no, 1, format!("expected {rows} rows, found {r}")))?;
            let before = entries.len();
            for token in line.split_whitespace() {
                let col = token.as_ptr() as usize - line.as_ptr() as usize + 1;
                let w: f64 =
                    token.parse().map_err(|_| Error::parse(line_no, col, format!("invalid number {token:?}")))?;
                if !w.is_finite() {
                    return Err(Error::parse(line_no, col, "non-finite weight"));
                }
                entries.push(w);
            }
            if entries.len() - before != cols {
                return Err(Error::parse(
                    line_no,
                    1,
                    format!("expected {cols} values, found {}", entries.len() - before),
                ));
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::parse(rows + 2, 1, "unexpected data after last row"));
        }
        FloatMatrix::new(rows, cols, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparsity_examples() {
        assert_eq!(TernaryMatrix::zeros(4, 4).unwrap().sparsity(), 1.0);
        let filter = TernaryMatrix::new(1, 9, vec![-1, 0, 1, 0, 1, 1, 0, -1, 0]).unwrap();
        assert_eq!(filter.sparsity(), 4.0 / 9.0);
        let eye = TernaryMatrix::new(3, 3, vec![1, 0, 0, 0, 1, 0, 0, 0, 1]).unwrap();
        assert_eq!(eye.sparsity(), 6.0 / 9.0);
    }

    #[test]
    fn rejects_non_trits_and_empty() {
        assert!(TernaryMatrix::new(1, 2, vec![2, 0]).is_err());
        assert!(TernaryMatrix::new(0, 2, vec![]).is_err());
        assert!(TernaryMatrix::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn tmx_round_trip() {
        let text = "tmx 2 3\n+0-\n0++\n";
        let m: TernaryMatrix = text.parse().unwrap();
        assert_eq!(m.row(0), &[1, 0, -1]);
        assert_eq!(m.to_tmx(), text);
    }

    #[test]
    fn tmx_is_strict() {
        for bad in
            ["tmx 1 3\n+ -\n", "tmx 2 2\n++\n", "tmx 1 2\n+++\n", "tmx 1 2\n++\n--\n", "tnx 1 1\n+\n", "tmx 1 1\n1\n"]
        {
            assert!(bad.parse::<TernaryMatrix>().is_err(), "{bad:?} should fail");
        }
        match "tmx 1 3\n+x-\n".parse::<TernaryMatrix>() {
            Err(Error::Parse { line: 2, col: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fmx_parse() {
        let m: FloatMatrix = "fmx 2 2\n0.5 -0.25\n1e-3   2\n".parse().unwrap();
        assert_eq!(m.entries(), &[0.5, -0.25, 0.001, 2.0]);
        assert!("fmx 1 2\n0.5\n".parse::<FloatMatrix>().is_err());
        assert!("fmx 1 1\nNaN\n".parse::<FloatMatrix>().is_err());
        let back: FloatMatrix = m.to_fmx().parse().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn apply_matches_hand_sum() {
        let m = TernaryMatrix::new(2, 3, vec![1, -1, 0, 0, 1, 1]).unwrap();
        assert_eq!(m.apply(&[5, 2, 7]), vec![3, 9]);
    }
}
