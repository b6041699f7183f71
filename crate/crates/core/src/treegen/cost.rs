use std::fmt;

use super::graph::{AdderGraph, NodeKind};
use super::serial::SerialSchedule;

/// Abstract node counts of an adder graph. A registered adder and a pure
/// register are costed the same.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CostReport {
    pub adders: usize,
    /// Pure delay registers.
    pub registers: usize,
    pub adds_plus_regs: usize,
    pub depth: u32,
    /// The subset of `registers` that only pads values to the output stage.
    pub output_registers: usize,
}

pub fn cost(g: &AdderGraph) -> CostReport {
    let mut adders = 0;
    let mut registers = 0;
    // A delay feeds an adder, directly or through further delays.
    let mut feeds_adder = vec![false; g.nodes.len()];
    for (id, node) in g.nodes.iter().enumerate().rev() {
        match node.kind {
            NodeKind::Add => {
                adders += 1;
                for op in &node.operands {
                    feeds_adder[op.node] = true;
                }
            }
            NodeKind::Delay => {
                registers += 1;
                if feeds_adder[id] {
                    feeds_adder[node.operands[0].node] = true;
                }
            }
            _ => {}
        }
    }
    let output_registers =
        g.nodes.iter().enumerate().filter(|(id, n)| n.kind == NodeKind::Delay && !feeds_adder[*id]).count();
    CostReport { adders, registers, adds_plus_regs: adders + registers, depth: g.depth(), output_registers }
}

impl CostReport {
    pub const HEADER: &'static str = "Adders  Reg  Add/Reg  Depth";

    /// Sum of several layers' reports; depth is the deepest.
    pub fn combine(reports: &[CostReport]) -> CostReport {
        reports.iter().fold(CostReport::default(), |acc, r| CostReport {
            adders: acc.adders + r.adders,
            registers: acc.registers + r.registers,
            adds_plus_regs: acc.adds_plus_regs + r.adds_plus_regs,
            depth: acc.depth.max(r.depth),
            output_registers: acc.output_registers + r.output_registers,
        })
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>6}  {:>3}  {:>7}  {:>5}", self.adders, self.registers, self.adds_plus_regs, self.depth)
    }
}

/// Slice and flip-flop estimate for a scheduled graph. A 16-bit parallel
/// adder takes 2 slices; serial adders shrink in proportion to the digit
/// count. Registers hold one digit each.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaEstimate {
    pub adder_slices: f64,
    pub register_bits: u64,
    pub schedule: SerialSchedule,
}

pub fn area(g: &AdderGraph) -> AreaEstimate {
    let c = cost(g);
    let schedule = SerialSchedule { digits: g.digits, digit_width: g.digit_width() };
    let per_adder = 2.0 * g.word_bits as f64 / 16.0 / g.digits as f64;
    AreaEstimate {
        adder_slices: c.adders as f64 * per_adder,
        register_bits: (c.adders + c.registers) as u64 * g.digit_width() as u64,
        schedule,
    }
}
