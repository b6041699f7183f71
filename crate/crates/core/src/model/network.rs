//! Network topology description and its JSON file format.
//!
//! A network file is a JSON object:
//!
//! ```json
//! {
//!   "name": "tiny",
//!   "clock_hz": 125e6,
//!   "act_format": { "total_bits": 16, "frac_bits": 4 },
//!   "scale_format": { "total_bits": 16, "frac_bits": 6 },
//!   "cse_method": "bu",
//!   "layers": [
//!     { "kind": "buffer", "in_width": 8, "in_channels": 1, "kernel": 3 },
//!     { "kind": "conv", "name": "conv1", "in_width": 8, "in_channels": 1, "kernel": 3, "filters": 4, "epsilon": 0.7 },
//!     { "kind": "scale_shift", "name": "ss1", "in_width": 8, "in_channels": 4, "activation": "relu" }
//!   ]
//! }
//! ```
//!
//! Every layer names its input geometry so that adjacent layers can be
//! checked. Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::fixed::FixedPointFormat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Buffer,
    Conv,
    MaxPool,
    ScaleShift,
    Mux,
    Dense,
    Fifo,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    None,
    Relu,
}

/// How the ternary scaling factor is derived from the surviving weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    /// Mean magnitude of the weights at or above the threshold.
    #[default]
    MeanSurviving,
    /// Mean magnitude over every weight.
    MeanAll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CseMethod {
    None,
    Td,
    Bu,
}

impl std::str::FromStr for CseMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CseMethod::None),
            "td" => Ok(CseMethod::Td),
            "bu" => Ok(CseMethod::Bu),
            other => Err(Error::Config(format!("unknown CSE method {other:?} (expected none, td or bu)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub in_width: usize,
    pub in_channels: usize,
    #[serde(default = "one")]
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Cycles between valid input pixels. Derived from the upstream pooling
    /// when omitted; checked against the derived value when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_interval: Option<u64>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_rule: Option<ScaleRule>,
    /// Parallel multiply-accumulate lanes of a dense layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lanes: Option<usize>,
}

fn one() -> usize {
    1
}

impl LayerSpec {
    pub fn new(kind: LayerKind, in_width: usize, in_channels: usize) -> LayerSpec {
        LayerSpec {
            kind,
            name: None,
            in_width,
            in_channels,
            kernel: 1,
            stride: 1,
            filters: None,
            epsilon: None,
            pixel_interval: None,
            activation: Activation::None,
            arity: None,
            scale_rule: None,
            lanes: None,
        }
    }

    pub fn out_width(&self) -> usize {
        match self.kind {
            LayerKind::Conv | LayerKind::MaxPool => self.in_width / self.stride,
            LayerKind::Mux | LayerKind::Dense => 1,
            _ => self.in_width,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self.kind {
            LayerKind::Conv | LayerKind::Dense => self.filters.unwrap_or(0),
            LayerKind::Mux => self.in_width * self.in_width * self.in_channels,
            _ => self.in_channels,
        }
    }

    /// Rows and columns of the ternary weight matrix, for layers that have one.
    pub fn weight_shape(&self) -> Option<(usize, usize)> {
        match self.kind {
            LayerKind::Conv => Some((self.filters?, self.kernel * self.kernel * self.in_channels)),
            LayerKind::Dense => Some((self.filters?, self.in_channels)),
            _ => None,
        }
    }

    pub fn has_weights(&self) -> bool {
        matches!(self.kind, LayerKind::Conv | LayerKind::Dense)
    }

    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("layer{index}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_clock")]
    pub clock_hz: f64,
    #[serde(default = "activation_format")]
    pub act_format: FixedPointFormat,
    #[serde(default = "scale_format")]
    pub scale_format: FixedPointFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cse_method: Option<CseMethod>,
    pub layers: Vec<LayerSpec>,
}

fn default_clock() -> f64 {
    125e6
}

fn activation_format() -> FixedPointFormat {
    FixedPointFormat::ACTIVATION
}

fn scale_format() -> FixedPointFormat {
    FixedPointFormat::SCALE
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<NetworkSpec> {
        let mut net: NetworkSpec = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<NetworkSpec> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network spec serializes")
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_width
    }

    pub fn input_channels(&self) -> usize {
        self.layers[0].in_channels
    }

    /// Checks geometry and fills in derived pixel intervals.
    pub fn validate(&mut self) -> Result<()> {
        let err = |i: usize, layer: &LayerSpec, msg: String| Error::Config(format!("{}: {msg}", layer.label(i)));
        if self.layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(Error::Config("clock_hz must be positive".into()));
        }
        self.act_format.validate()?;
        self.scale_format.validate()?;
        let mut interval = Some(1u64);
        let mut prev: Option<(usize, usize)> = None;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if layer.in_width == 0 || layer.in_channels == 0 {
                return Err(err(i, layer, "input geometry must be positive".into()));
            }
            if layer.kernel == 0 || layer.stride == 0 {
                return Err(err(i, layer, "kernel and stride must be at least 1".into()));
            }
            if let Some((w, d)) = prev {
                if (w, d) != (layer.in_width, layer.in_channels) {
                    return Err(err(
                        i,
                        layer,
                        format!(
                            "input {}x{}x{} does not match previous output {w}x{w}x{d}",
                            layer.in_width, layer.in_width, layer.in_channels
                        ),
                    ));
                }
            }
            match layer.kind {
                LayerKind::Conv => {
                    if layer.filters.unwrap_or(0) == 0 {
                        return Err(err(i, layer, "conv needs filters >= 1".into()));
                    }
                    if layer.kernel % 2 == 0 || layer.kernel > layer.in_width {
                        return Err(err(i, layer, "conv kernel must be odd and no wider than the image".into()));
                    }
                }
                LayerKind::Buffer => {
                    if layer.kernel > layer.in_width {
                        return Err(err(i, layer, "buffer window wider than the image".into()));
                    }
                }
                LayerKind::Dense => {
                    if layer.filters.unwrap_or(0) == 0 {
                        return Err(err(i, layer, "dense needs filters >= 1".into()));
                    }
                    if layer.in_width != 1 {
                        return Err(err(i, layer, "dense input must be a flat vector (in_width 1)".into()));
                    }
                    if layer.lanes == Some(0) {
                        return Err(err(i, layer, "dense lanes must be at least 1".into()));
                    }
                }
                LayerKind::MaxPool | LayerKind::ScaleShift | LayerKind::Mux | LayerKind::Fifo => {
                    if let Some(f) = layer.filters {
                        if f != layer.in_channels {
                            return Err(err(i, layer, "filters must equal in_channels for this block".into()));
                        }
                    }
                }
            }
            if matches!(layer.kind, LayerKind::Conv | LayerKind::MaxPool) && layer.in_width % layer.stride != 0 {
                return Err(err(i, layer, "image width must be divisible by the stride".into()));
            }
            if layer.activation != Activation::None && layer.kind != LayerKind::ScaleShift {
                return Err(err(i, layer, "activation is applied by scale_shift blocks only".into()));
            }
            if let Some(eps) = layer.epsilon {
                if !(eps.is_finite() && eps >= 0.0) {
                    return Err(err(i, layer, "epsilon must be finite and non-negative".into()));
                }
            }
            if let Some(a) = layer.arity {
                if a != 2 && a != 3 {
                    return Err(err(i, layer, "arity must be 2 or 3".into()));
                }
            }
            match (layer.pixel_interval, interval) {
                (Some(given), Some(derived)) if given != derived => {
                    return Err(err(
                        i,
                        layer,
                        format!("pixel_interval {given} disagrees with the derived interval {derived}"),
                    ));
                }
                (Some(0), _) => return Err(err(i, layer, "pixel_interval must be at least 1".into())),
                (None, Some(derived)) => layer.pixel_interval = Some(derived),
                _ => {}
            }
            interval = match layer.kind {
                LayerKind::MaxPool | LayerKind::Conv => interval.map(|m| m * (layer.stride * layer.stride) as u64),
                LayerKind::Mux | LayerKind::Dense => None,
                _ => interval,
            };
            prev = Some((layer.out_width(), layer.out_channels()));
        }
        Ok(())
    }

    /// Indices of the layers carrying ternary weights.
    pub fn weighted_layers(&self) -> impl Iterator<Item = (usize, &LayerSpec)> {
        self.layers.iter().enumerate().filter(|(_, l)| l.has_weights())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "layers": [
            { "kind": "buffer", "in_width": 8, "in_channels": 1, "kernel": 3 },
            { "kind": "conv", "in_width": 8, "in_channels": 1, "kernel": 3, "filters": 4 },
            { "kind": "max_pool", "in_width": 8, "in_channels": 4, "kernel": 2, "stride": 2 },
            { "kind": "scale_shift", "in_width": 4, "in_channels": 4, "activation": "relu" },
            { "kind": "mux", "in_width": 4, "in_channels": 4 },
            { "kind": "dense", "in_width": 1, "in_channels": 64, "filters": 10 }
        ]
    }"#;

    #[test]
    fn parses_and_derives_intervals() {
        let net = NetworkSpec::from_json(TINY).unwrap();
        assert_eq!(net.act_format, FixedPointFormat::ACTIVATION);
        assert_eq!(net.scale_format, FixedPointFormat::SCALE);
        assert_eq!(net.layers[1].pixel_interval, Some(1));
        assert_eq!(net.layers[3].pixel_interval, Some(4));
        assert_eq!(net.layers[1].weight_shape(), Some((4, 9)));
        assert_eq!(net.layers[5].weight_shape(), Some((10, 64)));
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = TINY.replace("\"kernel\": 3 }", "\"kernel\": 3, \"padding\": 1 }");
        assert!(matches!(NetworkSpec::from_json(&bad), Err(Error::Json(_))));
        let bad = TINY.replace("\"layers\"", "\"colour\": 1, \"layers\"");
        assert!(NetworkSpec::from_json(&bad).is_err());
    }

    #[test]
    fn rejects_geometry_mismatch() {
        let bad = TINY.replace("\"in_channels\": 64", "\"in_channels\": 65");
        assert!(matches!(NetworkSpec::from_json(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn first_layer_runs_at_one_pixel_per_cycle() {
        let bad = TINY.replacen("\"kernel\": 3 }", "\"kernel\": 3, \"pixel_interval\": 2 }", 1);
        assert!(NetworkSpec::from_json(&bad).is_err());
    }

    #[test]
    fn json_round_trip() {
        let net = NetworkSpec::from_json(TINY).unwrap();
        assert_eq!(NetworkSpec::from_json(&net.to_json()).unwrap(), net);
    }
}
