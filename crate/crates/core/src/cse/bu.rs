//! Bottom-up CSE: extract the largest signed subexpression shared by a pair of
//! sums.
//!
//! The pattern matrix holds, for every pair of working sums, their largest
//! common signed sub-pattern (taking the better of the direct and the globally
//! negated orientation). Each extracted pattern is appended to the working set
//! as a new sum so its own shared parts can be extracted later; every sum that
//! contains the pattern in either orientation is rewritten to reference it.
//! Ties on size go to the lexicographically smallest variable tuple, then the
//! sign vector with `+` first, then the first row pair.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

use super::{expression, insert_term, remove_var, CseResult, Definition};
use crate::model::{Expression, Sign, Term, TernaryMatrix, Var};

/// Largest common sub-pattern of two sums, normalized so its first term is
/// positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PatternEntry {
    pub terms: Vec<Term>,
}

impl PatternEntry {
    pub fn size(&self) -> usize {
        self.terms.len()
    }
}

/// Common signed sub-pattern of two sorted term lists.
pub fn common_pattern(a: &[Term], b: &[Term]) -> PatternEntry {
    let (mut direct, mut negated) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].var.cmp(&b[j].var) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if a[i].sign == b[j].sign {
                    direct.push(a[i]);
                } else {
                    negated.push(a[i]);
                }
                i += 1;
                j += 1;
            }
        }
    }
    let vars = |v: &[Term]| v.iter().map(|t| t.var).collect::<Vec<_>>();
    let take_negated =
        negated.len() > direct.len() || (negated.len() == direct.len() && vars(&negated) < vars(&direct));
    let mut terms = if take_negated { negated } else { direct };
    if terms.first().is_some_and(|t| t.sign.is_neg()) {
        terms.iter_mut().for_each(|t| t.sign = -t.sign);
    }
    PatternEntry { terms }
}

type Rank = (Reverse<usize>, Vec<Var>, Vec<Sign>, u32, u32);

fn rank(entry: &PatternEntry, r: u32, s: u32) -> Rank {
    (
        Reverse(entry.size()),
        entry.terms.iter().map(|t| t.var).collect(),
        entry.terms.iter().map(|t| t.sign).collect(),
        r,
        s,
    )
}

/// Symmetric pattern matrix over working sums. Only entries of size two or
/// more are stored; everything else reads as absent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PatternMatrix {
    entries: HashMap<(u32, u32), PatternEntry>,
    partners: Vec<BTreeSet<u32>>,
    ranked: BTreeSet<Rank>,
}

impl PatternMatrix {
    /// Computes every entry from scratch.
    pub fn from_rows(rows: &[Vec<Term>]) -> PatternMatrix {
        let mut m = PatternMatrix { partners: vec![BTreeSet::new(); rows.len()], ..Default::default() };
        for r in 0..rows.len() {
            for s in r + 1..rows.len() {
                m.set(r as u32, s as u32, common_pattern(&rows[r], &rows[s]));
            }
        }
        m
    }

    fn key(r: u32, s: u32) -> (u32, u32) {
        (r.min(s), r.max(s))
    }

    pub fn get(&self, r: usize, s: usize) -> Option<&PatternEntry> {
        self.entries.get(&Self::key(r as u32, s as u32))
    }

    /// Size of the stored entry, 0 when none is stored.
    pub fn value(&self, r: usize, s: usize) -> usize {
        self.get(r, s).map_or(0, PatternEntry::size)
    }

    pub fn max_value(&self) -> usize {
        self.ranked.first().map_or(0, |k| k.0 .0)
    }

    pub fn best(&self) -> Option<(usize, usize, &PatternEntry)> {
        let (.., r, s) = self.ranked.first()?;
        Some((*r as usize, *s as usize, &self.entries[&(*r, *s)]))
    }

    pub fn stored(&self) -> usize {
        self.entries.len()
    }

    fn grow(&mut self, rows: usize) {
        if self.partners.len() < rows {
            self.partners.resize(rows, BTreeSet::new());
        }
    }

    fn clear(&mut self, r: u32, s: u32) {
        let key = Self::key(r, s);
        if let Some(old) = self.entries.remove(&key) {
            self.ranked.remove(&rank(&old, key.0, key.1));
            self.partners[r as usize].remove(&s);
            self.partners[s as usize].remove(&r);
        }
    }

    fn set(&mut self, r: u32, s: u32, entry: PatternEntry) {
        self.clear(r, s);
        if entry.size() < 2 {
            return;
        }
        let key = Self::key(r, s);
        self.ranked.insert(rank(&entry, key.0, key.1));
        self.entries.insert(key, entry);
        self.partners[r as usize].insert(s);
        self.partners[s as usize].insert(r);
    }

    fn clear_row(&mut self, r: u32) {
        let partners: Vec<u32> = self.partners[r as usize].iter().copied().collect();
        for s in partners {
            self.clear(r, s);
        }
    }
}

/// One extraction step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuExtraction {
    pub var: Var,
    pub pattern: Expression,
    /// Rows that were rewritten to reference `var`.
    pub rewritten: Vec<usize>,
    /// Index of the working row appended for the pattern, or `None` when an
    /// existing definition row already equalled the pattern and was reused.
    pub appended: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct BuCse {
    inputs: usize,
    outputs: usize,
    rows: Vec<Vec<Term>>,
    /// Variable defined by each appended row.
    row_var: Vec<Option<Var>>,
    var_rows: Vec<BTreeSet<u32>>,
    matrix: PatternMatrix,
    next_var: usize,
    extractions: usize,
    recount_each_step: bool,
}

impl BuCse {
    pub fn new(m: &TernaryMatrix) -> BuCse {
        let rows: Vec<Vec<Term>> = (0..m.rows()).map(|r| Expression::from_row(m.row(r)).terms().to_vec()).collect();
        let mut var_rows = vec![BTreeSet::new(); m.cols()];
        for (r, terms) in rows.iter().enumerate() {
            for t in terms {
                var_rows[t.var.0].insert(r as u32);
            }
        }
        let matrix = PatternMatrix::from_rows(&rows);
        BuCse {
            inputs: m.cols(),
            outputs: m.rows(),
            row_var: vec![None; rows.len()],
            rows,
            var_rows,
            matrix,
            next_var: m.cols(),
            extractions: 0,
            recount_each_step: false,
        }
    }

    /// Rebuilds the pattern matrix from scratch before every step. Slow;
    /// kept as a reference for testing.
    pub fn recounting(mut self) -> BuCse {
        self.recount_each_step = true;
        self
    }

    pub fn rows(&self) -> &[Vec<Term>] {
        &self.rows
    }

    pub fn matrix(&self) -> &PatternMatrix {
        &self.matrix
    }

    pub fn step(&mut self) -> Option<BuExtraction> {
        if self.recount_each_step {
            self.matrix = PatternMatrix::from_rows(&self.rows);
        }
        let pattern = self.matrix.best()?.2.terms.clone();
        let first = pattern[0].var;

        // Every working row holding the pattern, with the orientation it is held in.
        let mut holders: Vec<(u32, Sign)> = Vec::new();
        for &c in &self.var_rows[first.0] {
            let row = &self.rows[c as usize];
            let Some(o) = sign_in(row, first) else { continue };
            if pattern.iter().all(|t| sign_in(row, t.var) == Some(o * t.sign)) {
                holders.push((c, o));
            }
        }

        let reuse = holders
            .iter()
            .find(|&&(c, _)| self.row_var[c as usize].is_some() && self.rows[c as usize].len() == pattern.len())
            .copied();
        let (var, factor, appended) = match reuse {
            Some((c, o)) => (self.row_var[c as usize].expect("definition row"), o, None),
            None => {
                let var = Var(self.next_var);
                self.next_var += 1;
                self.var_rows.push(BTreeSet::new());
                (var, Sign::Pos, Some(self.rows.len()))
            }
        };

        let mut changed = Vec::new();
        for &(c, o) in &holders {
            if reuse.is_some_and(|(rc, _)| rc == c) {
                continue;
            }
            let row = &mut self.rows[c as usize];
            for t in &pattern {
                remove_var(row, t.var);
                self.var_rows[t.var.0].remove(&c);
            }
            insert_term(row, Term { var, sign: o * factor });
            self.var_rows[var.0].insert(c);
            changed.push(c);
        }
        let rewritten = changed.iter().map(|&c| c as usize).collect();
        if let Some(idx) = appended {
            for t in &pattern {
                self.var_rows[t.var.0].insert(idx as u32);
            }
            self.rows.push(pattern.clone());
            self.row_var.push(Some(var));
            changed.push(idx as u32);
        }
        self.extractions += 1;

        if !self.recount_each_step {
            self.refresh(&changed);
        }
        Some(BuExtraction { var, pattern: expression(pattern), rewritten, appended })
    }

    /// Recomputes the pattern-matrix entries of the changed rows.
    fn refresh(&mut self, changed: &[u32]) {
        let n = self.rows.len();
        self.matrix.grow(n);
        let mut direct = vec![0u32; n];
        let mut negated = vec![0u32; n];
        let mut touched: Vec<u32> = Vec::new();
        for &c in changed {
            self.matrix.clear_row(c);
            for t in &self.rows[c as usize] {
                for &o in &self.var_rows[t.var.0] {
                    if o == c {
                        continue;
                    }
                    let os = sign_in(&self.rows[o as usize], t.var).expect("index consistent with rows");
                    let slot = o as usize;
                    if direct[slot] == 0 && negated[slot] == 0 {
                        touched.push(o);
                    }
                    if os == t.sign {
                        direct[slot] += 1;
                    } else {
                        negated[slot] += 1;
                    }
                }
            }
            for o in touched.drain(..) {
                let slot = o as usize;
                if direct[slot].max(negated[slot]) >= 2 {
                    let (r, s) = (c.min(o), c.max(o));
                    let entry = common_pattern(&self.rows[r as usize], &self.rows[s as usize]);
                    self.matrix.set(r, s, entry);
                }
                direct[slot] = 0;
                negated[slot] = 0;
            }
        }
    }

    pub fn run(mut self) -> CseResult {
        while self.step().is_some() {}
        self.finish()
    }

    pub fn finish(self) -> CseResult {
        let mut outputs = Vec::with_capacity(self.outputs);
        let mut definitions = Vec::new();
        for (terms, var) in self.rows.into_iter().zip(self.row_var) {
            match var {
                None => outputs.push(expression(terms)),
                Some(var) => definitions.push(Definition { var, expr: expression(terms) }),
            }
        }
        CseResult::assemble(self.inputs, definitions, outputs, self.extractions)
    }
}

fn sign_in(row: &[Term], var: Var) -> Option<Sign> {
    row.binary_search_by_key(&var, |t| t.var).ok().map(|i| row[i].sign)
}

pub fn bu_cse(m: &TernaryMatrix) -> CseResult {
    BuCse::new(m).run()
}
