use std::fmt::Display;
use std::path::Path;

use ternroll::model::{CseMethod, NetworkSpec};
use ternroll::pipeline::{DEFAULT_ARITY, DEFAULT_EPSILON};

pub const DEFAULT_METHOD: CseMethod = CseMethod::Bu;
pub const DEFAULT_CLOCK_HZ: f64 = 125e6;

/// Resolved settings and where each came from, for `--explain-config`.
#[derive(Default)]
pub struct Explain {
    lines: Vec<String>,
}

impl Explain {
    pub fn record(&mut self, key: &str, value: impl Display, source: &str) {
        self.lines.push(format!("{key} = {value} ({source})"));
    }

    pub fn print(&self) {
        for line in &self.lines {
            eprintln!("{line}");
        }
    }
}

/// Flag, then network file, then default.
fn resolve<T: Copy + Display>(explain: &mut Explain, key: &str, flag: Option<T>, file: Option<T>, default: T) -> T {
    let (value, source) = match (flag, file) {
        (Some(v), _) => (v, "flag"),
        (None, Some(v)) => (v, "network file"),
        (None, None) => (default, "default"),
    };
    explain.record(key, value, source);
    value
}

pub fn method_name(m: CseMethod) -> &'static str {
    match m {
        CseMethod::None => "none",
        CseMethod::Td => "td",
        CseMethod::Bu => "bu",
    }
}

#[derive(Clone, Copy)]
struct MethodName(CseMethod);

impl Display for MethodName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(method_name(self.0))
    }
}

pub fn method(explain: &mut Explain, flag: Option<CseMethod>, net: Option<&NetworkSpec>) -> CseMethod {
    let file = net.and_then(|n| n.cse_method).map(MethodName);
    resolve(explain, "cse_method", flag.map(MethodName), file, MethodName(DEFAULT_METHOD)).0
}

/// Applies the arity flag to every convolution, recording per-layer sources.
pub fn arity(explain: &mut Explain, flag: Option<usize>, net: &mut NetworkSpec) {
    for (i, layer) in net.layers.iter_mut().enumerate() {
        if layer.kind == ternroll::model::LayerKind::Conv {
            let key = format!("{}.arity", layer.label(i));
            layer.arity = Some(resolve(explain, &key, flag, layer.arity, DEFAULT_ARITY));
        }
    }
}

/// Applies the epsilon flag to every weighted layer.
pub fn epsilon(explain: &mut Explain, flag: Option<f64>, net: &mut NetworkSpec) {
    for (i, layer) in net.layers.iter_mut().enumerate() {
        if layer.has_weights() {
            let key = format!("{}.epsilon", layer.label(i));
            layer.epsilon = Some(resolve(explain, &key, flag, layer.epsilon, DEFAULT_EPSILON));
        }
    }
}

/// The clock rate, noting whether the network file set it explicitly.
pub fn clock(explain: &mut Explain, flag: Option<f64>, net: &mut NetworkSpec, path: &Path) -> ternroll::Result<()> {
    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let file = raw.get("clock_hz").map(|_| net.clock_hz);
    net.clock_hz = resolve(explain, "clock_hz", flag, file, DEFAULT_CLOCK_HZ);
    if !(net.clock_hz.is_finite() && net.clock_hz > 0.0) {
        return Err(ternroll::Error::Config("clock must be positive".into()));
    }
    Ok(())
}

pub fn plain<T: Display>(explain: &mut Explain, key: &str, flag: Option<T>, default: T) -> T {
    match flag {
        Some(v) => {
            explain.record(key, &v, "flag");
            v
        }
        None => {
            explain.record(key, &default, "default");
            default
        }
    }
}
