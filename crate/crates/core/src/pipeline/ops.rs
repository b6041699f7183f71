use std::collections::BTreeMap;
use std::fmt::Write;

use crate::model::{LayerKind, NetworkSpec};
use crate::treegen::CostReport;

use super::weights::NetworkWeights;

/// Operation counts of one weighted layer for a single image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpRow {
    pub layer: usize,
    pub label: String,
    /// Product of the factors of `dense_macs`, e.g. `32*32*3*3*3*64`.
    pub formula: String,
    /// Multiply-accumulates with every weight present.
    pub dense_macs: u64,
    /// Multiply-accumulates on nonzero weights only.
    pub sparse_macs: Option<u64>,
    /// Operations with the adder graph: Adds+Regs per output pixel for a
    /// convolution, two per multiply-accumulate for a dense layer.
    pub cse_ops: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpTable {
    pub rows: Vec<OpRow>,
}

fn sum(values: impl Iterator<Item = Option<u64>>) -> Option<u64> {
    values.sum()
}

impl OpTable {
    pub fn total_dense(&self) -> u64 {
        self.rows.iter().map(|r| r.dense_macs).sum()
    }

    pub fn total_sparse(&self) -> Option<u64> {
        sum(self.rows.iter().map(|r| r.sparse_macs))
    }

    pub fn total_cse(&self) -> Option<u64> {
        sum(self.rows.iter().map(|r| r.cse_ops))
    }

    /// Fixed-column text table; unknown counts print as `-`.
    pub fn to_text(&self) -> String {
        let cell = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        let mut out = String::new();
        writeln!(
            out,
            "{:<8} {:<20} {:>12} {:>14} {:>12}",
            "Layer", "Num Mults", "Num Mults", "With Sparsity", "With CSE"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{:<8} {:<20} {:>12} {:>14} {:>12}",
                r.label,
                r.formula,
                r.dense_macs,
                cell(r.sparse_macs),
                cell(r.cse_ops)
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<8} {:<20} {:>12} {:>14} {:>12}",
            "Total",
            "",
            self.total_dense(),
            cell(self.total_sparse()),
            cell(self.total_cse())
        )
        .unwrap();
        out
    }
}

/// Per-image operation counts. Weights fill the sparsity column; adder-graph
/// costs by layer index fill the CSE column.
pub fn op_count(net: &NetworkSpec, weights: Option<&NetworkWeights>, costs: &BTreeMap<usize, CostReport>) -> OpTable {
    let mut rows = Vec::new();
    for (i, layer) in net.layers.iter().enumerate() {
        let filters = layer.filters.unwrap_or(0) as u64;
        let nonzeros = weights.and_then(|w| w.matrices.get(&i)).map(|m| m.nonzeros() as u64);
        let row = match layer.kind {
            LayerKind::Conv => {
                let ow = layer.out_width() as u64;
                let (n, d) = (layer.kernel as u64, layer.in_channels as u64);
                let pixels = ow * ow;
                OpRow {
                    layer: i,
                    label: layer.label(i),
                    formula: format!("{ow}*{ow}*{n}*{n}*{d}*{filters}"),
                    dense_macs: pixels * n * n * d * filters,
                    sparse_macs: nonzeros.map(|nz| pixels * nz),
                    cse_ops: costs.get(&i).map(|c| pixels * c.adds_plus_regs as u64),
                }
            }
            LayerKind::Dense => {
                let d = layer.in_channels as u64;
                OpRow {
                    layer: i,
                    label: layer.label(i),
                    formula: format!("{d}*{filters}"),
                    dense_macs: d * filters,
                    sparse_macs: nonzeros,
                    cse_ops: Some(2 * d * filters),
                }
            }
            _ => continue,
        };
        rows.push(row);
    }
    OpTable { rows }
}
