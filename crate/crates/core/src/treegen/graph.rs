use std::fmt;

use crate::error::{Error, Result};
use crate::model::Sign;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Matrix input `index`.
    Input(usize),
    /// Registered adder; each operand carries its own sign.
    Add,
    /// Pure pipeline register.
    Delay,
    /// Layer output `index`. No operands means a constant zero.
    Output(usize),
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Input(_) => "input",
            NodeKind::Add => "add",
            NodeKind::Delay => "delay",
            NodeKind::Output(_) => "output",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Operand {
    pub node: NodeId,
    pub sign: Sign,
}

impl Operand {
    pub fn pos(node: NodeId) -> Operand {
        Operand { node, sign: Sign::Pos }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sign.symbol(), self.node)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub kind: NodeKind,
    pub operands: Vec<Operand>,
    pub stage: u32,
}

/// Pipelined DAG of adders and registers computing one constant
/// matrix-vector product.
///
/// Node ids are indices into `nodes`; operands always point at lower ids, so
/// the node order is topological. Inputs come first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AdderGraph {
    pub nodes: Vec<Node>,
    pub inputs: usize,
    pub outputs: Vec<NodeId>,
    /// Digits per sample: 1 for word-parallel adders.
    pub digits: u32,
    /// Word width of every value on the datapath.
    pub word_bits: u32,
}

impl AdderGraph {
    pub fn with_inputs(inputs: usize) -> AdderGraph {
        let nodes = (0..inputs).map(|i| Node { kind: NodeKind::Input(i), operands: Vec::new(), stage: 0 }).collect();
        AdderGraph { nodes, inputs, outputs: Vec::new(), digits: 1, word_bits: 16 }
    }

    pub fn push(&mut self, kind: NodeKind, operands: Vec<Operand>, stage: u32) -> NodeId {
        let id = self.nodes.len();
        if let NodeKind::Output(_) = kind {
            self.outputs.push(id);
        }
        self.nodes.push(Node { kind, operands, stage });
        id
    }

    pub fn digit_width(&self) -> u32 {
        self.word_bits / self.digits
    }

    /// Pipeline depth: the common stage of the outputs.
    pub fn depth(&self) -> u32 {
        self.outputs.iter().map(|&o| self.nodes[o].stage).max().unwrap_or(0)
    }

    /// Checks structure and stage alignment.
    pub fn validate(&self) -> Result<()> {
        let bad = |id: usize, msg: String| Err(Error::Invariant(format!("node {id}: {msg}")));
        if self.digits == 0 || self.word_bits == 0 || self.word_bits > 64 || !self.word_bits.is_multiple_of(self.digits)
        {
            return Err(Error::Invariant(format!("{} digits cannot split a {}-bit word", self.digits, self.word_bits)));
        }
        let mut outputs_seen = 0;
        for (id, node) in self.nodes.iter().enumerate() {
            for op in &node.operands {
                if op.node >= id {
                    return bad(id, format!("operand {} is not an earlier node", op.node));
                }
                if matches!(self.nodes[op.node].kind, NodeKind::Output(_)) {
                    return bad(id, "outputs cannot feed other nodes".into());
                }
            }
            let stages_ok = |want: u32| node.operands.iter().all(|op| self.nodes[op.node].stage + 1 == want);
            match node.kind {
                NodeKind::Input(i) => {
                    if i != id || id >= self.inputs || !node.operands.is_empty() || node.stage != 0 {
                        return bad(id, "inputs must be the first nodes, in order, at stage 0".into());
                    }
                }
                NodeKind::Add => {
                    if !(2..=3).contains(&node.operands.len()) {
                        return bad(id, format!("adder with {} operands", node.operands.len()));
                    }
                    if !stages_ok(node.stage) {
                        return bad(id, "adder operands are not all one stage earlier".into());
                    }
                }
                NodeKind::Delay => {
                    if node.operands.len() != 1 || node.operands[0].sign.is_neg() {
                        return bad(id, "delay needs exactly one positive operand".into());
                    }
                    if !stages_ok(node.stage) {
                        return bad(id, "delay operand is not one stage earlier".into());
                    }
                }
                NodeKind::Output(i) => {
                    if i != outputs_seen || self.outputs.get(i) != Some(&id) {
                        return bad(id, "outputs must be numbered in order".into());
                    }
                    outputs_seen += 1;
                    if node.operands.len() > 1 {
                        return bad(id, "output takes at most one operand".into());
                    }
                    if node.operands.iter().any(|op| self.nodes[op.node].stage != node.stage) {
                        return bad(id, "output stage differs from its operand".into());
                    }
                }
            }
            if id < self.inputs && !matches!(node.kind, NodeKind::Input(_)) {
                return bad(id, "expected an input node".into());
            }
        }
        if outputs_seen != self.outputs.len() {
            return Err(Error::Invariant("output list does not match output nodes".into()));
        }
        let depth = self.depth();
        if let Some(&o) = self.outputs.iter().find(|&&o| self.nodes[o].stage != depth) {
            return bad(o, "outputs are not aligned to one stage".into());
        }
        Ok(())
    }

    /// Exact integer evaluation of every output.
    pub fn evaluate(&self, x: &[i64]) -> Vec<i64> {
        let mut scratch = Vec::new();
        self.evaluate_with(x, &mut scratch)
    }

    /// [`evaluate`](Self::evaluate) reusing a caller-provided buffer.
    pub fn evaluate_with(&self, x: &[i64], values: &mut Vec<i64>) -> Vec<i64> {
        assert_eq!(x.len(), self.inputs, "input length must equal the graph input count");
        values.clear();
        values.resize(self.nodes.len(), 0);
        values[..self.inputs].copy_from_slice(x);
        for (id, node) in self.nodes.iter().enumerate().skip(self.inputs) {
            values[id] = node.operands.iter().map(|op| op.sign.apply(values[op.node])).sum();
        }
        self.outputs.iter().map(|&o| values[o]).collect()
    }

    /// Evaluation through digit-serial adders of the scheduled digit width.
    /// Values wrap modulo `2^word_bits` and are returned sign-extended.
    pub fn evaluate_serial(&self, x: &[i64]) -> Vec<i64> {
        assert_eq!(x.len(), self.inputs, "input length must equal the graph input count");
        let mask = word_mask(self.word_bits);
        let mut values = vec![0u64; self.nodes.len()];
        for (v, &xi) in values.iter_mut().zip(x) {
            *v = xi as u64 & mask;
        }
        let mut ops: Vec<(u64, Sign)> = Vec::with_capacity(3);
        for (id, node) in self.nodes.iter().enumerate().skip(self.inputs) {
            values[id] = match node.kind {
                NodeKind::Delay => values[node.operands[0].node],
                NodeKind::Output(_) if node.operands.is_empty() => 0,
                NodeKind::Output(_) if node.operands[0].sign == Sign::Pos => values[node.operands[0].node],
                _ => {
                    ops.clear();
                    ops.extend(node.operands.iter().map(|op| (values[op.node], op.sign)));
                    super::serial::serial_sum(&ops, self.digits, self.digit_width())
                }
            };
        }
        self.outputs.iter().map(|&o| sign_extend(values[o], self.word_bits)).collect()
    }

    /// [`evaluate_serial`](Self::evaluate_serial) over many input vectors,
    /// processed a block of lanes at a time. Delays share their source's storage.
    pub fn evaluate_serial_batch(&self, xs: &[Vec<i64>]) -> Vec<Vec<i64>> {
        const LANES: usize = 64;
        let mask = word_mask(self.word_bits);
        let width = self.digit_width();
        let digit_mask = word_mask(width);
        let mut slot = vec![usize::MAX; self.nodes.len()];
        let mut slots = 0;
        for (id, node) in self.nodes.iter().enumerate() {
            let alias = match node.kind {
                NodeKind::Delay => Some(node.operands[0].node),
                NodeKind::Output(_) if node.operands.len() == 1 && node.operands[0].sign == Sign::Pos => {
                    Some(node.operands[0].node)
                }
                _ => None,
            };
            slot[id] = match alias {
                Some(src) => slot[src],
                None => {
                    slots += 1;
                    slots - 1
                }
            };
        }
        let mut values = vec![[0u64; LANES]; slots];
        let mut results = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(LANES) {
            for (lane, x) in chunk.iter().enumerate() {
                assert_eq!(x.len(), self.inputs, "input length must equal the graph input count");
                for (i, &xi) in x.iter().enumerate() {
                    values[slot[i]][lane] = xi as u64 & mask;
                }
            }
            for (id, node) in self.nodes.iter().enumerate().skip(self.inputs) {
                let s = slot[id];
                let aliased = node.operands.first().is_some_and(|op| slot[op.node] == s);
                if aliased {
                    continue;
                }
                let negs = node.operands.iter().filter(|op| op.sign.is_neg()).count() as u64;
                let mut carry = [negs; LANES];
                let mut out = [0u64; LANES];
                for d in 0..self.digits {
                    let shift = d * width;
                    let mut acc = carry;
                    for op in &node.operands {
                        let flip = if op.sign.is_neg() { digit_mask } else { 0 };
                        let v = &values[slot[op.node]];
                        for (a, &w) in acc.iter_mut().zip(v) {
                            *a += ((w >> shift) & digit_mask) ^ flip;
                        }
                    }
                    for ((o, c), &a) in out.iter_mut().zip(carry.iter_mut()).zip(&acc) {
                        *o |= (a & digit_mask) << shift;
                        *c = a >> width;
                    }
                }
                for o in &mut out {
                    *o &= mask;
                }
                values[s] = out;
            }
            results.extend((0..chunk.len()).map(|lane| {
                self.outputs.iter().map(|&o| sign_extend(values[slot[o]][lane], self.word_bits)).collect::<Vec<_>>()
            }));
        }
        results
    }
}

pub(crate) fn word_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

pub fn sign_extend(v: u64, bits: u32) -> i64 {
    if bits >= 64 {
        v as i64
    } else {
        let shift = 64 - bits;
        ((v << shift) as i64) >> shift
    }
}

/// Wraps an exact value to a `bits`-wide two's-complement word.
pub fn wrap(v: i64, bits: u32) -> i64 {
    sign_extend(v as u64 & word_mask(bits), bits)
}
