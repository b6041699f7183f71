//! Top-down CSE: extract the most frequent two-term subexpression until no
//! pair occurs twice.
//!
//! Pairs are keyed by `(i, j, rel)` with `i < j` and `rel` the product of the
//! two term signs, so `x_i + x_j` and `-x_i - x_j` count as the same pair.
//! Ties on frequency go to the pair that occurs earliest in row order, then
//! to the smallest `(i, j)`, then `+` before `-`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

use super::{expression, insert_term, remove_var, CseResult, Definition};
use crate::model::{Expression, Sign, Term, TernaryMatrix, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub i: Var,
    pub j: Var,
    pub rel: Sign,
}

impl PairKey {
    fn of(a: Term, b: Term) -> PairKey {
        let (a, b) = if a.var < b.var { (a, b) } else { (b, a) };
        PairKey { i: a.var, j: b.var, rel: a.sign * b.sign }
    }
}

type Rank = (Reverse<usize>, u32, PairKey);

/// Occurrence lists for every signed pair, with a frequency-ordered index of
/// the pairs seen at least twice.
#[derive(Clone, Debug, Default)]
pub struct PairTable {
    occurrences: HashMap<PairKey, Vec<u32>>,
    ranked: BTreeSet<Rank>,
}

impl PartialEq for PairTable {
    fn eq(&self, other: &Self) -> bool {
        let live = |t: &PairTable| t.occurrences.iter().filter(|(_, v)| !v.is_empty()).count();
        live(self) == live(other)
            && self.occurrences.iter().filter(|(_, v)| !v.is_empty()).all(|(k, v)| other.occurrences.get(k) == Some(v))
            && self.ranked == other.ranked
    }
}

impl PairTable {
    /// Counts every pair from scratch.
    pub fn from_rows(rows: &[Vec<Term>]) -> PairTable {
        let mut table = PairTable::default();
        for (r, terms) in rows.iter().enumerate() {
            for (a, &ta) in terms.iter().enumerate() {
                for &tb in &terms[a + 1..] {
                    table.occurrences.entry(PairKey::of(ta, tb)).or_default().push(r as u32);
                }
            }
        }
        for (&key, rows) in &table.occurrences {
            if rows.len() >= 2 {
                table.ranked.insert((Reverse(rows.len()), rows[0], key));
            }
        }
        table
    }

    pub fn count(&self, key: &PairKey) -> usize {
        self.occurrences.get(key).map_or(0, Vec::len)
    }

    pub fn rows_with(&self, key: &PairKey) -> &[u32] {
        self.occurrences.get(key).map_or(&[], Vec::as_slice)
    }

    /// Most frequent pair occurring at least twice.
    pub fn best(&self) -> Option<(PairKey, usize)> {
        self.ranked.first().map(|&(Reverse(n), _, key)| (key, n))
    }

    fn unrank(&mut self, key: PairKey) -> &mut Vec<u32> {
        let rows = self.occurrences.entry(key).or_default();
        if rows.len() >= 2 {
            self.ranked.remove(&(Reverse(rows.len()), rows[0], key));
        }
        rows
    }

    fn rerank(&mut self, key: PairKey) {
        let rows = &self.occurrences[&key];
        if rows.len() >= 2 {
            self.ranked.insert((Reverse(rows.len()), rows[0], key));
        } else if rows.is_empty() {
            self.occurrences.remove(&key);
        }
    }

    fn add(&mut self, key: PairKey, row: u32) {
        let rows = self.unrank(key);
        let at = rows.binary_search(&row).unwrap_err();
        rows.insert(at, row);
        self.rerank(key);
    }

    fn remove(&mut self, key: PairKey, row: u32) {
        let rows = self.unrank(key);
        if let Ok(at) = rows.binary_search(&row) {
            rows.remove(at);
        }
        self.rerank(key);
    }
}

/// One extraction step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TdExtraction {
    pub var: Var,
    pub pair: PairKey,
    pub frequency: usize,
}

/// Stepwise top-down CSE.
#[derive(Clone, Debug)]
pub struct TdCse {
    inputs: usize,
    rows: Vec<Vec<Term>>,
    table: PairTable,
    definitions: Vec<Definition>,
    next_var: usize,
    recount_each_step: bool,
}

impl TdCse {
    pub fn new(m: &TernaryMatrix) -> TdCse {
        let rows: Vec<Vec<Term>> = (0..m.rows()).map(|r| Expression::from_row(m.row(r)).terms().to_vec()).collect();
        let table = PairTable::from_rows(&rows);
        TdCse { inputs: m.cols(), rows, table, definitions: Vec::new(), next_var: m.cols(), recount_each_step: false }
    }

    /// Rebuilds the pair table from scratch before every step instead of
    /// updating it incrementally. Slow; kept as a reference for testing.
    pub fn recounting(mut self) -> TdCse {
        self.recount_each_step = true;
        self
    }

    pub fn rows(&self) -> &[Vec<Term>] {
        &self.rows
    }

    pub fn table(&self) -> &PairTable {
        &self.table
    }

    pub fn step(&mut self) -> Option<TdExtraction> {
        if self.recount_each_step {
            self.table = PairTable::from_rows(&self.rows);
        }
        let (pair, frequency) = self.table.best()?;
        let var = Var(self.next_var);
        self.next_var += 1;
        let targets = self.table.rows_with(&pair).to_vec();
        for r in targets {
            self.rewrite(r, pair, var);
        }
        let second = Term { var: pair.j, sign: pair.rel };
        let expr = expression(vec![Term { var: pair.i, sign: Sign::Pos }, second]);
        self.definitions.push(Definition { var, expr });
        Some(TdExtraction { var, pair, frequency })
    }

    /// Replaces `s_i x_i + s_j x_j` in row `r` by `s_i x_new`.
    fn rewrite(&mut self, r: u32, pair: PairKey, var: Var) {
        let terms = &mut self.rows[r as usize];
        let si = remove_var(terms, pair.i).expect("row listed for pair holds x_i");
        let sj = remove_var(terms, pair.j).expect("row listed for pair holds x_j");
        debug_assert_eq!(si * sj, pair.rel);
        let table = &mut self.table;
        table.remove(pair, r);
        let new_term = Term { var, sign: si };
        for &other in terms.iter() {
            table.remove(PairKey::of(Term { var: pair.i, sign: si }, other), r);
            table.remove(PairKey::of(Term { var: pair.j, sign: sj }, other), r);
            table.add(PairKey::of(other, new_term), r);
        }
        insert_term(terms, new_term);
    }

    pub fn run(mut self) -> CseResult {
        while self.step().is_some() {}
        self.finish()
    }

    pub fn finish(self) -> CseResult {
        let extractions = self.definitions.len();
        let outputs = self.rows.into_iter().map(expression).collect();
        CseResult::assemble(self.inputs, self.definitions, outputs, extractions)
    }
}

pub fn td_cse(m: &TernaryMatrix) -> CseResult {
    TdCse::new(m).run()
}

/// Same extraction sequence as [`td_cse`], recounting all pairs every step.
pub fn td_cse_reference(m: &TernaryMatrix) -> CseResult {
    TdCse::new(m).recounting().run()
}
