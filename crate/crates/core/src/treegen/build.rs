//! Packing CSE output into a stage-aligned adder graph.
//!
//! Each sum is reduced stage by stage: operands that sit at the earliest
//! available stage are grouped `arity` at a time in term order, and an
//! operand left alone is registered into the next stage. Registers are
//! shared: a value is delayed to a given stage at most once, whatever the
//! number of consumers.

use std::collections::HashMap;

use super::graph::{AdderGraph, NodeId, NodeKind, Operand};
use crate::cse::CseResult;
use crate::error::{Error, Result};
use crate::model::Expression;

struct Builder {
    graph: AdderGraph,
    delayed: HashMap<(NodeId, u32), NodeId>,
    arity: usize,
}

impl Builder {
    fn stage(&self, node: NodeId) -> u32 {
        self.graph.nodes[node].stage
    }

    /// `node` registered forward to `stage`.
    fn at_stage(&mut self, node: NodeId, stage: u32) -> NodeId {
        let own = self.stage(node);
        assert!(stage >= own, "cannot move a value to an earlier stage");
        if stage == own {
            return node;
        }
        if let Some(&d) = self.delayed.get(&(node, stage)) {
            return d;
        }
        let prev = self.at_stage(node, stage - 1);
        let d = self.graph.push(NodeKind::Delay, vec![Operand::pos(prev)], stage);
        self.delayed.insert((node, stage), d);
        d
    }

    /// Reduces a signed sum; `None` for the empty sum.
    fn sum(&mut self, operands: Vec<Operand>) -> Option<Operand> {
        // (stage, position of the leftmost leaf, value)
        let mut items: Vec<(u32, usize, Operand)> =
            operands.into_iter().enumerate().map(|(pos, op)| (self.stage(op.node), pos, op)).collect();
        loop {
            if items.len() <= 1 {
                return items.pop().map(|(_, _, op)| op);
            }
            let stage = items.iter().map(|it| it.0).min().expect("non-empty");
            let (mut ready, rest): (Vec<_>, Vec<_>) = items.into_iter().partition(|it| it.0 == stage);
            items = rest;
            ready.sort_by_key(|it| it.1);
            // Even stages group from the left, odd ones from the right, so a
            // value left over at one end is consumed at the next stage.
            let chunks: Vec<Vec<(u32, usize, Operand)>> = if stage % 2 == 0 {
                ready.chunks(self.arity).map(<[_]>::to_vec).collect()
            } else {
                ready.rchunks(self.arity).map(<[_]>::to_vec).collect()
            };
            for chunk in chunks {
                let pos = chunk[0].1;
                if chunk.len() == 1 {
                    let op = chunk[0].2;
                    let d = self.at_stage(op.node, stage + 1);
                    items.push((stage + 1, pos, Operand { node: d, sign: op.sign }));
                } else {
                    let node = self.graph.push(NodeKind::Add, chunk.iter().map(|it| it.2).collect(), stage + 1);
                    items.push((stage + 1, pos, Operand::pos(node)));
                }
            }
        }
    }
}

/// Builds the pipelined adder graph for a CSE result with 2- or 3-input
/// adders. Shared definitions are computed once; every output is registered
/// to the common output stage.
pub fn build_tree(r: &CseResult, arity: usize) -> Result<AdderGraph> {
    if arity != 2 && arity != 3 {
        return Err(Error::Config(format!("adder arity must be 2 or 3, got {arity}")));
    }
    r.validate()?;
    let mut b = Builder { graph: AdderGraph::with_inputs(r.inputs), delayed: HashMap::new(), arity };
    let mut value: Vec<Option<Operand>> = vec![None; r.var_count()];
    for (i, v) in value.iter_mut().enumerate().take(r.inputs) {
        *v = Some(Operand::pos(i));
    }
    let resolve = |value: &[Option<Operand>], e: &Expression| -> Vec<Operand> {
        e.terms()
            .iter()
            .filter_map(|t| value[t.var.0].map(|op| Operand { node: op.node, sign: op.sign * t.sign }))
            .collect()
    };
    for d in &r.definitions {
        let ops = resolve(&value, &d.expr);
        value[d.var.0] = b.sum(ops);
    }
    let roots: Vec<Option<Operand>> = r.outputs.iter().map(|o| b.sum(resolve(&value, o))).collect();
    let depth = roots.iter().flatten().map(|op| b.stage(op.node)).max().unwrap_or(0);
    for (i, root) in roots.into_iter().enumerate() {
        let operands = match root {
            Some(op) => vec![Operand { node: b.at_stage(op.node, depth), sign: op.sign }],
            None => Vec::new(),
        };
        b.graph.push(NodeKind::Output(i), operands, depth);
    }
    debug_assert!(b.graph.validate().is_ok());
    Ok(b.graph)
}

/// Fewest adders that can sum `terms` operands at the given arity.
pub fn flat_adders(terms: usize, arity: usize) -> usize {
    if terms <= 1 {
        0
    } else {
        (terms - 1).div_ceil(arity - 1)
    }
}
