//! Common subexpression elimination over the rows of a ternary matrix.
//!
//! Each matrix row is a signed sum of inputs. Both passes rewrite the set of
//! sums so shared partial sums are computed once:
//!
//! * [`td_cse`] repeatedly extracts the most frequent two-term subexpression.
//! * [`bu_cse`] repeatedly extracts the largest subexpression common to a pair
//!   of sums, tracked in a pattern matrix.
//!
//! A shared subexpression may be consumed negated, so `a + b` and `-a - b`
//! share one adder.

mod bu;
mod td;
mod text;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use bu::{bu_cse, BuCse, PatternEntry, PatternMatrix};
pub use td::{td_cse, td_cse_reference, PairKey, PairTable, TdCse};

use crate::error::{Error, Result};
use crate::model::{CseMethod, Expression, Sign, Term, TernaryMatrix, Var};

/// A new variable and the expression that defines it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub var: Var,
    pub expr: Expression,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CseStats {
    pub extractions: usize,
    /// Terms over all definitions and outputs.
    pub final_terms: usize,
    /// Two-input adders needed for flat chains: sum of `len - 1`.
    pub adders: usize,
}

/// Rewritten system: definitions in dependency order, then one output
/// expression per matrix row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CseResult {
    pub inputs: usize,
    pub definitions: Vec<Definition>,
    pub outputs: Vec<Expression>,
    pub stats: CseStats,
}

impl CseResult {
    /// The unshared system: every row computed on its own.
    pub fn identity(m: &TernaryMatrix) -> CseResult {
        let outputs = (0..m.rows()).map(|r| Expression::from_row(m.row(r))).collect();
        CseResult::assemble(m.cols(), Vec::new(), outputs, 0)
    }

    pub(crate) fn assemble(
        inputs: usize,
        definitions: Vec<Definition>,
        outputs: Vec<Expression>,
        extractions: usize,
    ) -> CseResult {
        let definitions = topological(definitions);
        let exprs = definitions.iter().map(|d| &d.expr).chain(&outputs);
        let (final_terms, adders) = exprs.fold((0, 0), |(t, a), e| (t + e.len(), a + e.adder_count()));
        CseResult { inputs, definitions, outputs, stats: CseStats { extractions, final_terms, adders } }
    }

    /// One past the largest variable index in use.
    pub fn var_count(&self) -> usize {
        self.definitions.iter().map(|d| d.var.0 + 1).max().unwrap_or(0).max(self.inputs)
    }

    /// Checks variable numbering and dependency order.
    pub fn validate(&self) -> Result<()> {
        let mut defined = vec![false; self.var_count()];
        defined[..self.inputs].iter_mut().for_each(|d| *d = true);
        let check = |e: &Expression, defined: &[bool], what: &str| -> Result<()> {
            for t in e.terms() {
                if !defined.get(t.var.0).copied().unwrap_or(false) {
                    return Err(Error::Invariant(format!("{what} references {} before its definition", t.var)));
                }
            }
            Ok(())
        };
        for d in &self.definitions {
            if d.var.0 < self.inputs || defined[d.var.0] {
                return Err(Error::Invariant(format!("{} defined twice or shadows an input", d.var)));
            }
            check(&d.expr, &defined, &format!("definition of {}", d.var))?;
            defined[d.var.0] = true;
        }
        for (r, o) in self.outputs.iter().enumerate() {
            check(o, &defined, &format!("output {r}"))?;
        }
        Ok(())
    }

    /// Evaluates every definition and output on one input vector.
    pub fn evaluate(&self, x: &[i64]) -> Vec<i64> {
        assert_eq!(x.len(), self.inputs, "input length must equal the input count");
        let mut values = vec![0i64; self.var_count()];
        values[..self.inputs].copy_from_slice(x);
        for d in &self.definitions {
            values[d.var.0] = d.expr.evaluate(|v| values[v.0]);
        }
        self.outputs.iter().map(|o| o.evaluate(|v| values[v.0])).collect()
    }

    /// Substitutes all definitions, giving each output as integer
    /// coefficients over the inputs.
    pub fn expand(&self) -> Vec<Vec<i64>> {
        let mut expanded: HashMap<usize, Vec<i64>> = HashMap::new();
        let lookup = |expanded: &HashMap<usize, Vec<i64>>, e: &Expression| {
            let mut acc = vec![0i64; self.inputs];
            for t in e.terms() {
                let s = t.sign.as_i64();
                if t.var.0 < self.inputs {
                    acc[t.var.0] += s;
                } else {
                    for (a, c) in acc.iter_mut().zip(&expanded[&t.var.0]) {
                        *a += s * c;
                    }
                }
            }
            acc
        };
        for d in &self.definitions {
            let coeffs = lookup(&expanded, &d.expr);
            expanded.insert(d.var.0, coeffs);
        }
        self.outputs.iter().map(|o| lookup(&expanded, o)).collect()
    }

    /// Symbolic check: substitution reproduces the matrix rows exactly.
    pub fn reproduces(&self, m: &TernaryMatrix) -> bool {
        self.inputs == m.cols()
            && self.outputs.len() == m.rows()
            && self.validate().is_ok()
            && self
                .expand()
                .iter()
                .enumerate()
                .all(|(r, coeffs)| coeffs.iter().zip(m.row(r)).all(|(&c, &t)| c == t as i64))
    }
}

pub fn run(m: &TernaryMatrix, method: CseMethod) -> CseResult {
    match method {
        CseMethod::None => CseResult::identity(m),
        CseMethod::Td => td_cse(m),
        CseMethod::Bu => bu_cse(m),
    }
}

/// Orders definitions so each one only references earlier ones, keeping the
/// extraction order wherever dependencies allow.
fn topological(mut defs: Vec<Definition>) -> Vec<Definition> {
    defs.sort_by_key(|d| d.var);
    let index: HashMap<usize, usize> = defs.iter().enumerate().map(|(i, d)| (d.var.0, i)).collect();
    let mut state = vec![0u8; defs.len()];
    let mut order = Vec::with_capacity(defs.len());
    for root in 0..defs.len() {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some((node, next)) = stack.pop() {
            let terms = defs[node].expr.terms();
            if let Some(t) = terms.get(next) {
                stack.push((node, next + 1));
                if let Some(&dep) = index.get(&t.var.0) {
                    if state[dep] == 0 {
                        state[dep] = 1;
                        stack.push((dep, 0));
                    }
                }
            } else {
                state[node] = 2;
                order.push(node);
            }
        }
    }
    let mut slots: Vec<Option<Definition>> = defs.into_iter().map(Some).collect();
    order.into_iter().map(|i| slots[i].take().expect("each definition placed once")).collect()
}

/// An input vector on which the rewritten system disagrees with the matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub input: Vec<i64>,
    pub row: usize,
    pub expected: i64,
    pub got: i64,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "row {} gives {} instead of {} for input {:?}", self.row, self.got, self.expected, self.input)
    }
}

/// Calls `check` on every vector in {-1, 0, 1}^n, stopping at the first error.
pub fn for_each_trit_vector<E>(n: usize, mut check: impl FnMut(&[i64]) -> Result<(), E>) -> Result<(), E> {
    let mut x = vec![-1i64; n];
    loop {
        check(&x)?;
        let mut i = 0;
        loop {
            if i == n {
                return Ok(());
            }
            if x[i] < 1 {
                x[i] += 1;
                break;
            }
            x[i] = -1;
            i += 1;
        }
    }
}

/// Numerical equivalence check: `trials` random 16-bit input vectors, plus
/// every vector in {-1, 0, 1}^cols when `cols <= 12`.
pub fn verify_equivalence(m: &TernaryMatrix, r: &CseResult, trials: usize, seed: u64) -> Result<(), Mismatch> {
    let compare = |x: &[i64]| -> Result<(), Mismatch> {
        let want = m.apply(x);
        let got = r.evaluate(x);
        match want.iter().zip(&got).position(|(a, b)| a != b) {
            None if want.len() == got.len() => Ok(()),
            pos => {
                let row = pos.unwrap_or(want.len().min(got.len()));
                Err(Mismatch {
                    input: x.to_vec(),
                    row,
                    expected: want.get(row).copied().unwrap_or(0),
                    got: got.get(row).copied().unwrap_or(0),
                })
            }
        }
    };
    if r.inputs != m.cols() {
        return Err(Mismatch { input: vec![], row: 0, expected: m.cols() as i64, got: r.inputs as i64 });
    }
    if m.cols() <= 12 {
        for_each_trit_vector(m.cols(), compare)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let x: Vec<i64> = (0..m.cols()).map(|_| rng.random_range(-32768..=32767)).collect();
        compare(&x)?;
    }
    Ok(())
}

/// Sorted term list helpers shared by both passes.
pub(crate) fn remove_var(terms: &mut Vec<Term>, var: Var) -> Option<Sign> {
    let i = terms.binary_search_by_key(&var, |t| t.var).ok()?;
    Some(terms.remove(i).sign)
}

pub(crate) fn insert_term(terms: &mut Vec<Term>, term: Term) {
    let i = terms.binary_search_by_key(&term.var, |t| t.var).unwrap_err();
    terms.insert(i, term);
}

pub(crate) fn expression(terms: Vec<Term>) -> Expression {
    Expression::canonical(terms).expect("working rows hold distinct variables")
}
