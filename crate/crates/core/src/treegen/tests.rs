use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cse::{self, bu_cse, td_cse, CseResult};
use crate::model::{Sign, TernaryMatrix};

fn table1() -> TernaryMatrix {
    TernaryMatrix::from_rows(&[vec![-1, 0, 1, 0, 1, 1, 0, -1, 0]]).unwrap()
}

fn fig3() -> TernaryMatrix {
    TernaryMatrix::from_rows(&[vec![-1, 0, 1, 0, 1, 1, 0, -1, 0], vec![0, 0, 1, 1, -1, -1, 0, 0, 0]]).unwrap()
}

fn random_matrix(rows: usize, cols: usize, sparsity: f64, seed: u64) -> TernaryMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<Vec<i8>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random_bool(sparsity) {
                        0
                    } else if rng.random_bool(0.5) {
                        1
                    } else {
                        -1
                    }
                })
                .collect()
        })
        .collect();
    TernaryMatrix::from_rows(&entries).unwrap()
}

/// Operand nodes of an adder, described by the leaf terms they sum.
fn leaves(g: &AdderGraph, op: Operand) -> Vec<(usize, Sign)> {
    let node = &g.nodes[op.node];
    let mut out = match node.kind {
        NodeKind::Input(i) => vec![(i, Sign::Pos)],
        _ => node.operands.iter().flat_map(|&o| leaves(g, o)).collect(),
    };
    for l in &mut out {
        l.1 = l.1 * op.sign;
    }
    out.sort();
    out
}

fn delays_of(g: &AdderGraph) -> Vec<(u32, Vec<(usize, Sign)>)> {
    g.nodes.iter().filter(|n| n.kind == NodeKind::Delay).map(|n| (n.stage, leaves(g, n.operands[0]))).collect()
}

const A: usize = 0;
const C: usize = 2;
const E: usize = 4;
const F: usize = 5;
const H: usize = 7;

#[test]
fn table1_filter_tree() {
    let g = build_tree(&CseResult::identity(&table1()), 2).unwrap();
    g.validate().unwrap();
    let c = cost(&g);
    assert_eq!((c.adders, c.depth), (4, 3));
    assert_eq!(c.registers, 2);
    assert_eq!(g.evaluate(&[1, 2, 3, 4, 5, 6, 7, 8, 9]), vec![5]);
    // h waits one stage, c - a waits for e + f - h.
    let neg = Sign::Neg;
    let pos = Sign::Pos;
    assert_eq!(delays_of(&g), vec![(1, vec![(H, pos)]), (2, vec![(A, neg), (C, pos)])]);
    let root = &g.nodes[g.nodes[g.outputs[0]].operands[0].node];
    let parts: Vec<_> = root.operands.iter().map(|&o| leaves(&g, o)).collect();
    assert!(parts.contains(&vec![(E, pos), (F, pos), (H, neg)]));
}

#[test]
fn fig3_shares_e_plus_f() {
    let m = fig3();
    let r = td_cse(&m);
    assert_eq!(r.definitions.len(), 1);
    let g = build_tree(&r, 2).unwrap();
    g.validate().unwrap();
    let c = cost(&g);
    assert_eq!(c.adders, 6);
    assert_eq!(c.depth, 3);
    // Reg(h) and Reg(c - a) inside the z0 tree, plus z1 padded to the output stage.
    assert_eq!(c.registers, 3);
    assert_eq!(c.output_registers, 1);
    assert_eq!(c.registers - c.output_registers, 2);
    let d = delays_of(&g);
    assert!(d.contains(&(1, vec![(H, Sign::Pos)])));
    assert!(d.contains(&(2, vec![(A, Sign::Neg), (C, Sign::Pos)])));
    let x = [1, 2, 3, 4, 5, 6, 7, 8, 9];
    assert_eq!(g.evaluate(&x), m.apply(&x));
}

#[test]
fn single_term_rows_need_no_adders() {
    let m = TernaryMatrix::from_rows(&[vec![0, -1, 0], vec![1, 0, 0]]).unwrap();
    let g = build_tree(&CseResult::identity(&m), 2).unwrap();
    let c = cost(&g);
    assert_eq!((c.adders, c.registers, c.depth), (0, 0, 0));
    assert_eq!(g.evaluate(&[3, 4, 5]), vec![-4, 3]);
}

#[test]
fn pass_through_is_padded_to_the_deepest_output() {
    let m = TernaryMatrix::from_rows(&[vec![1, 0, 0, 0], vec![1, 1, 1, 1], vec![0, 0, 0, 0]]).unwrap();
    let g = build_tree(&CseResult::identity(&m), 2).unwrap();
    g.validate().unwrap();
    let c = cost(&g);
    assert_eq!((c.adders, c.registers, c.depth), (3, 2, 2));
    assert_eq!(c.output_registers, 2);
    assert_eq!(g.evaluate(&[1, 2, 3, 4]), vec![1, 10, 0]);
}

#[test]
fn empty_graph_costs_nothing() {
    assert_eq!(cost(&AdderGraph::with_inputs(0)), CostReport::default());
    let m = TernaryMatrix::zeros(3, 4).unwrap();
    let g = build_tree(&CseResult::identity(&m), 2).unwrap();
    assert_eq!(cost(&g), CostReport::default());
    assert_eq!(g.evaluate(&[0; 4]), vec![0; 3]);
}

#[test]
fn arity_three_uses_fewer_adders() {
    let m = random_matrix(27, 64, 0.5, 11);
    let r = CseResult::identity(&m);
    let g2 = build_tree(&r, 2).unwrap();
    let g3 = build_tree(&r, 3).unwrap();
    assert!(cost(&g3).adders < cost(&g2).adders);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let x: Vec<i64> = (0..64).map(|_| rng.random_range(-32768..32768)).collect();
        assert_eq!(g2.evaluate(&x), m.apply(&x));
        assert_eq!(g3.evaluate(&x), m.apply(&x));
    }
}

#[test]
fn rejects_other_arities() {
    let r = CseResult::identity(&table1());
    assert!(build_tree(&r, 1).is_err());
    assert!(build_tree(&r, 4).is_err());
}

#[test]
fn eq10_all_ones() {
    let m = cse::tests::eq10();
    for r in [CseResult::identity(&m), td_cse(&m), bu_cse(&m)] {
        let g = build_tree(&r, 2).unwrap();
        g.validate().unwrap();
        assert_eq!(g.evaluate(&[1; 6]), vec![2, 4, 3, 2, 3, 2, 3]);
    }
}

#[test]
fn cse_reduces_cost_on_a_conv_sized_layer() {
    let m = random_matrix(64, 288, 0.75, 5);
    let base = cost(&build_tree(&CseResult::identity(&m), 2).unwrap());
    let bu = cost(&build_tree(&bu_cse(&m), 2).unwrap());
    let td = cost(&build_tree(&td_cse(&m), 2).unwrap());
    assert!(bu.adds_plus_regs < base.adds_plus_regs);
    assert!(td.adds_plus_regs < base.adds_plus_regs);
}

#[test]
fn serial_graph_matches_parallel() {
    let m = random_matrix(16, 27, 0.6, 9);
    let g = build_tree(&bu_cse(&m), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for interval in [1, 4, 16] {
        let s = schedule_serial(&g, interval, 16).unwrap();
        assert_eq!(cost(&s), cost(&g));
        for _ in 0..20 {
            let x: Vec<i64> = (0..27).map(|_| rng.random_range(-512..512)).collect();
            let want: Vec<i64> = m.apply(&x).into_iter().map(|v| wrap(v, 16)).collect();
            assert_eq!(s.evaluate_serial(&x), want);
        }
    }
}

#[test]
fn batch_serial_evaluation_matches_single() {
    let m = random_matrix(12, 40, 0.7, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xs: Vec<Vec<i64>> = (0..150).map(|_| (0..40).map(|_| rng.random_range(-32768..32768)).collect()).collect();
    for arity in [2, 3] {
        let g = build_tree(&td_cse(&m), arity).unwrap();
        for interval in [1, 2, 16] {
            let s = schedule_serial(&g, interval, 16).unwrap();
            let single: Vec<Vec<i64>> = xs.iter().map(|x| s.evaluate_serial(x)).collect();
            assert_eq!(s.evaluate_serial_batch(&xs), single);
        }
    }
    let empty = build_tree(&CseResult::identity(&TernaryMatrix::zeros(2, 3).unwrap()), 2).unwrap();
    assert_eq!(empty.evaluate_serial_batch(&[vec![1, 2, 3]]), vec![vec![0, 0]]);
    assert!(empty.evaluate_serial_batch(&[]).is_empty());
}

#[test]
fn area_scales_with_digits() {
    let g = build_tree(&CseResult::identity(&table1()), 2).unwrap();
    let parallel = area(&g);
    let serial = area(&schedule_serial(&g, 4, 16).unwrap());
    assert_eq!(parallel.adder_slices, 8.0);
    assert_eq!(serial.adder_slices, 2.0);
    assert_eq!(serial.register_bits * 4, parallel.register_bits);
}

fn matrix_strategy() -> impl Strategy<Value = TernaryMatrix> {
    (1usize..10, 1usize..20).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-1i8..=1, r * c).prop_map(move |e| TernaryMatrix::new(r, c, e).unwrap())
    })
}

proptest! {
    #[test]
    fn trees_compute_the_product(m in matrix_strategy(), arity in 2usize..=3, method in 0usize..3, seed in any::<u64>()) {
        let r = match method {
            0 => CseResult::identity(&m),
            1 => td_cse(&m),
            _ => bu_cse(&m),
        };
        let g = build_tree(&r, arity).unwrap();
        prop_assert!(g.validate().is_ok());
        let c = cost(&g);
        prop_assert_eq!(c.adds_plus_regs, c.adders + c.registers);
        let widest = (0..m.rows()).map(|i| m.row(i).iter().filter(|&&t| t != 0).count()).max().unwrap_or(0);
        let mut bound = 0u32;
        while (arity as u64).pow(bound) < widest as u64 {
            bound += 1;
        }
        prop_assert!(c.depth >= bound);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<i64> = (0..m.cols()).map(|_| rng.random_range(-32768..32768)).collect();
        prop_assert_eq!(g.evaluate(&x), m.apply(&x));
    }

    #[test]
    fn without_cse_adders_meet_the_flat_bound(m in matrix_strategy(), arity in 2usize..=3) {
        let g = build_tree(&CseResult::identity(&m), arity).unwrap();
        let bound: usize = (0..m.rows()).map(|i| flat_adders(m.row(i).iter().filter(|&&t| t != 0).count(), arity)).sum();
        if arity == 2 {
            prop_assert_eq!(cost(&g).adders, bound);
        } else {
            prop_assert!(cost(&g).adders >= bound);
        }
    }
}
