use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::model::{FloatMatrix, LayerKind, NetworkSpec, ScaleShiftParams, TernaryMatrix};
use crate::ternarize::ternarize_with;

/// Epsilon used when a weighted layer does not set one.
pub const DEFAULT_EPSILON: f64 = 0.7;

/// Per-layer parameters, keyed by layer index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkWeights {
    pub matrices: BTreeMap<usize, TernaryMatrix>,
    pub scale_shift: BTreeMap<usize, ScaleShiftParams>,
}

impl NetworkWeights {
    /// Checks that every weighted layer has a matrix of the right shape and
    /// that scale parameters match their channel counts.
    pub fn check(&self, net: &NetworkSpec) -> Result<()> {
        for (i, layer) in net.layers.iter().enumerate() {
            if let Some((rows, cols)) = layer.weight_shape() {
                let m =
                    self.matrices.get(&i).ok_or_else(|| Error::Shape(format!("{} has no weights", layer.label(i))))?;
                if (m.rows(), m.cols()) != (rows, cols) {
                    return Err(Error::Shape(format!(
                        "{} expects a {rows}x{cols} matrix, got {}x{}",
                        layer.label(i),
                        m.rows(),
                        m.cols()
                    )));
                }
            }
            if let Some(p) = self.scale_shift.get(&i) {
                if layer.kind != LayerKind::ScaleShift || p.channels() != layer.in_channels {
                    return Err(Error::Shape(format!("scale parameters do not fit {}", layer.label(i))));
                }
            }
        }
        Ok(())
    }

    /// Reads `<label>.tmx` for each weighted layer and `<label>.ssp` for each
    /// scale-and-shift layer that has one.
    pub fn load(dir: &Path, net: &NetworkSpec) -> Result<NetworkWeights> {
        let mut w = NetworkWeights::default();
        for (i, layer) in net.layers.iter().enumerate() {
            let label = layer.label(i);
            if layer.has_weights() {
                let path = dir.join(format!("{label}.tmx"));
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
                let m: TernaryMatrix = text.parse().map_err(|e| Error::Shape(format!("{}: {e}", path.display())))?;
                w.matrices.insert(i, m);
            }
            if layer.kind == LayerKind::ScaleShift {
                let path = dir.join(format!("{label}.ssp"));
                if path.exists() {
                    let p: ScaleShiftParams = std::fs::read_to_string(&path)?
                        .parse()
                        .map_err(|e| Error::Shape(format!("{}: {e}", path.display())))?;
                    w.scale_shift.insert(i, p);
                }
            }
        }
        w.check(net)?;
        Ok(w)
    }

    /// Files to write for [`NetworkWeights::load`], in layer order.
    pub fn files(&self, net: &NetworkSpec) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, layer) in net.layers.iter().enumerate() {
            if let Some(m) = self.matrices.get(&i) {
                out.push((format!("{}.tmx", layer.label(i)), m.to_tmx()));
            }
            if let Some(p) = self.scale_shift.get(&i) {
                out.push((format!("{}.ssp", layer.label(i)), p.to_text()));
            }
        }
        out
    }

    /// Gaussian weights ternarized at each layer's epsilon, with scale
    /// constants that keep activations near unit size.
    pub fn random(net: &NetworkSpec, seed: u64) -> Result<NetworkWeights> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let shift = Uniform::new(-0.5, 0.5).expect("shift range");
        let mut w = NetworkWeights::default();
        let mut last_fan_in: Vec<f64> = Vec::new();
        for (i, layer) in net.layers.iter().enumerate() {
            if let Some((rows, cols)) = layer.weight_shape() {
                let real = FloatMatrix::new(rows, cols, (0..rows * cols).map(|_| normal.sample(&mut rng)).collect())?;
                let eps = layer.epsilon.unwrap_or(DEFAULT_EPSILON);
                let t = ternarize_with(&real, eps, layer.scale_rule.unwrap_or_default())?;
                last_fan_in =
                    (0..rows).map(|r| t.matrix.row(r).iter().filter(|&&v| v != 0).count().max(1) as f64).collect();
                w.matrices.insert(i, t.matrix);
            }
            if layer.kind == LayerKind::ScaleShift {
                let d = layer.in_channels;
                let a: Vec<f64> = (0..d).map(|ch| 1.0 / last_fan_in.get(ch).copied().unwrap_or(1.0).sqrt()).collect();
                let b: Vec<f64> = (0..d).map(|_| shift.sample(&mut rng)).collect();
                w.scale_shift.insert(i, ScaleShiftParams::fuse(1.0, &a, &b)?);
            }
        }
        Ok(w)
    }
}
