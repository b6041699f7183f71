//! Signed sparse sums over variables.

use std::fmt;
use std::ops::{Mul, Neg};

use crate::error::{Error, Result};

/// Variable index. Matrix inputs occupy `0..cols`; extracted subexpressions
/// are numbered from `cols` upwards in extraction order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub usize);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn from_trit(t: i8) -> Option<Sign> {
        match t {
            1 => Some(Sign::Pos),
            -1 => Some(Sign::Neg),
            _ => None,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }

    pub fn is_neg(self) -> bool {
        self == Sign::Neg
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Pos => '+',
            Sign::Neg => '-',
        }
    }

    pub fn apply(self, v: i64) -> i64 {
        match self {
            Sign::Pos => v,
            Sign::Neg => -v,
        }
    }
}

impl Neg for Sign {
    type Output = Sign;

    fn neg(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub var: Var,
    pub sign: Sign,
}

impl Term {
    pub fn new(var: usize, sign: Sign) -> Term {
        Term { var: Var(var), sign }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sign.symbol(), self.var)
    }
}

/// A signed sum of distinct variables, kept sorted by variable index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expression {
    terms: Vec<Term>,
}

impl Expression {
    /// Builds the canonical form of an arbitrary term list. Opposite-signed
    /// duplicates cancel; a variable repeated with the same sign would need a
    /// weight of ±2 and is rejected.
    pub fn canonical(mut terms: Vec<Term>) -> Result<Expression> {
        terms.sort();
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last() {
                Some(last) if last.var == t.var => {
                    if last.sign == t.sign {
                        return Err(Error::Invariant(format!("{} appears twice with the same sign", t.var)));
                    }
                    out.pop();
                }
                _ => out.push(t),
            }
        }
        Ok(Expression { terms: out })
    }

    pub fn from_row(row: &[i8]) -> Expression {
        let terms = row.iter().enumerate().filter_map(|(c, &t)| Sign::from_trit(t).map(|s| Term::new(c, s))).collect();
        Expression { terms }
    }

    pub fn single(var: Var, sign: Sign) -> Expression {
        Expression { terms: vec![Term { var, sign }] }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adders needed for a flat two-input chain: one fewer than the terms.
    pub fn adder_count(&self) -> usize {
        self.terms.len().saturating_sub(1)
    }

    pub fn sign_of(&self, var: Var) -> Option<Sign> {
        self.terms.binary_search_by_key(&var, |t| t.var).ok().map(|i| self.terms[i].sign)
    }

    pub fn negated(&self) -> Expression {
        Expression { terms: self.terms.iter().map(|t| Term { var: t.var, sign: -t.sign }).collect() }
    }

    pub fn evaluate(&self, mut value: impl FnMut(Var) -> i64) -> i64 {
        self.terms.iter().map(|t| t.sign.apply(value(t.var))).sum()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_sorts_and_cancels() {
        let e = Expression::canonical(vec![Term::new(3, Sign::Pos), Term::new(1, Sign::Neg), Term::new(3, Sign::Neg)])
            .unwrap();
        assert_eq!(e.to_string(), "-x1");
        assert!(Expression::canonical(vec![Term::new(2, Sign::Pos), Term::new(2, Sign::Pos)]).is_err());
        assert_eq!(Expression::default().to_string(), "0");
    }

    #[test]
    fn from_row_reads_trits() {
        let e = Expression::from_row(&[-1, 0, 1, 0, 1, 1, 0, -1, 0]);
        assert_eq!(e.to_string(), "-x0 +x2 +x4 +x5 -x7");
        assert_eq!(e.sign_of(Var(7)), Some(Sign::Neg));
        assert_eq!(e.sign_of(Var(1)), None);
    }

    proptest! {
        #[test]
        fn canonicalization_is_a_fixpoint(raw in proptest::collection::vec((0usize..12, any::<bool>()), 0..20)) {
            let mut seen = std::collections::HashSet::new();
            let terms: Vec<Term> = raw
                .into_iter()
                .filter(|(v, _)| seen.insert(*v))
                .map(|(v, neg)| Term::new(v, if neg { Sign::Neg } else { Sign::Pos }))
                .collect();
            let once = Expression::canonical(terms).unwrap();
            let twice = Expression::canonical(once.terms().to_vec()).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.terms().windows(2).all(|w| w[0].var < w[1].var));
        }
    }
}
