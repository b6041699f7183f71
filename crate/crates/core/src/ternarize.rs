//! Threshold ternarization of real weights.
//!
//! The threshold is `Δ = ε · mean(|w|)` over the whole matrix (per layer, not
//! per filter). Weights with `|w| < Δ` become 0, the rest keep their sign.

use crate::error::{Error, Result};
use crate::model::{FloatMatrix, ScaleRule, TernaryMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Ternarized {
    pub matrix: TernaryMatrix,
    /// Scaling factor applied to the ternary weights.
    pub scale: f64,
    /// Threshold Δ that was applied.
    pub delta: f64,
}

pub fn ternarize(w: &FloatMatrix, epsilon: f64) -> Result<Ternarized> {
    ternarize_with(w, epsilon, ScaleRule::MeanSurviving)
}

pub fn ternarize_with(w: &FloatMatrix, epsilon: f64, rule: ScaleRule) -> Result<Ternarized> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Config(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    let entries = w.entries();
    if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: pos / w.cols(), col: pos % w.cols() });
    }
    let mean_abs = entries.iter().map(|v| v.abs()).sum::<f64>() / entries.len() as f64;
    let delta = epsilon * mean_abs;

    let trits: Vec<i8> = entries
        .iter()
        .map(|&v| {
            if v.abs() < delta {
                0
            } else if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect();

    let (sum, count) =
        entries.iter().zip(&trits).filter(|(_, &t)| t != 0).fold((0.0, 0usize), |(s, n), (v, _)| (s + v.abs(), n + 1));
    let scale = match (rule, count) {
        (_, 0) => 0.0,
        (ScaleRule::MeanSurviving, n) => sum / n as f64,
        (ScaleRule::MeanAll, _) => mean_abs,
    };
    let matrix = TernaryMatrix::new(w.rows(), w.cols(), trits)?;
    Ok(Ternarized { matrix, scale, delta })
}

/// Sparsity after ternarizing at each ε, which must be given in ascending order.
pub fn sparsity_sweep(w: &FloatMatrix, eps_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    if eps_list.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::Config("epsilon list must be sorted ascending".into()));
    }
    eps_list.iter().map(|&eps| Ok((eps, ternarize(w, eps)?.matrix.sparsity()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(v: &[f64]) -> FloatMatrix {
        FloatMatrix::new(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn worked_example() {
        let t = ternarize(&row(&[0.5, -0.2, 0.9, 0.05]), 0.7).unwrap();
        assert!((t.delta - 0.28875).abs() < 1e-12);
        assert_eq!(t.matrix.entries(), &[1, 0, 1, 0]);
        assert!((t.scale - 0.7).abs() < 1e-12);
    }

    #[test]
    fn zero_threshold_keeps_signs() {
        let w = [0.3, -0.1, 2.0, -0.7];
        let t = ternarize(&row(&w), 0.0).unwrap();
        assert_eq!(t.matrix.entries(), &[1, -1, 1, -1]);
        assert!((t.scale - 0.775).abs() < 1e-12);
    }

    #[test]
    fn all_zero_weights() {
        let t = ternarize(&row(&[0.0; 5]), 1.4).unwrap();
        assert_eq!(t.matrix.nonzeros(), 0);
        assert_eq!(t.scale, 0.0);
    }

    #[test]
    fn boundary_weight_survives() {
        // mean |w| = 1, ε = 1 puts Δ exactly on the entries equal to 1.
        let t = ternarize(&row(&[1.0, -1.0, 0.5, 1.5]), 1.0).unwrap();
        assert_eq!(t.delta, 1.0);
        assert_eq!(t.matrix.entries(), &[1, -1, 0, 1]);
    }

    #[test]
    fn mean_all_rule() {
        let t = ternarize_with(&row(&[0.5, -0.2, 0.9, 0.05]), 0.7, ScaleRule::MeanAll).unwrap();
        assert!((t.scale - 0.4125).abs() < 1e-12);
    }

    #[test]
    fn sweep_examples() {
        let w = row(&[0.0, 0.0, 0.3, -0.4, 1.0]);
        let s = sparsity_sweep(&w, &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(s[0].1, 0.4);
        assert_eq!(s[1], s[2]);
        assert!(sparsity_sweep(&w, &[1.0, 0.5]).is_err());
    }

    proptest! {
        #[test]
        fn threshold_properties(
            w in proptest::collection::vec(-3.0f64..3.0, 1..60),
            e1 in 0.0f64..2.5,
            e2 in 0.0f64..2.5,
        ) {
            let m = row(&w);
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let a = ternarize(&m, lo).unwrap();
            let b = ternarize(&m, hi).unwrap();
            prop_assert!(a.matrix.sparsity() <= b.matrix.sparsity());
            for (&v, &t) in w.iter().zip(b.matrix.entries()) {
                if v != 0.0 {
                    prop_assert_eq!(t == 0, v.abs() < b.delta);
                }
                if t != 0 {
                    prop_assert_eq!(t as f64, v.signum());
                }
            }
            if b.matrix.nonzeros() > 0 {
                prop_assert!(b.scale >= b.delta);
            }
        }
    }
}
