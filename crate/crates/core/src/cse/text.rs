//! `.cse` listing format.
//!
//! ```text
//! cse <rows> <inputs>
//! def x6 = +x2 +x3
//! out 0 = +x6
//! out 1 = +x0 +x4 +x6
//! ```
//!
//! Definitions come first in dependency order, then one `out` line per row in
//! row order. An all-zero row is written `out <row> = 0`. Lines starting with
//! `#` are comments.

use std::fmt::Write;
use std::str::FromStr;

use super::{CseResult, Definition};
use crate::error::{Error, Result};
use crate::model::{Expression, Sign, Term, Var};

impl CseResult {
    pub fn to_text(&self) -> String {
        let mut out = format!("cse {} {}\n", self.outputs.len(), self.inputs);
        for d in &self.definitions {
            writeln!(out, "def {} = {}", d.var, d.expr).unwrap();
        }
        for (r, o) in self.outputs.iter().enumerate() {
            writeln!(out, "out {r} = {o}").unwrap();
        }
        out
    }
}

fn parse_var(token: &str, line: usize, col: usize) -> Result<Var> {
    token
        .strip_prefix('x')
        .and_then(|n| n.parse().ok())
        .map(Var)
        .ok_or_else(|| Error::parse(line, col, format!("expected a variable like x3, found {token:?}")))
}

fn parse_sum(tokens: &[(usize, &str)], line: usize) -> Result<Expression> {
    if let [(_, "0")] = tokens {
        return Ok(Expression::default());
    }
    if tokens.is_empty() {
        return Err(Error::parse(line, 1, "empty sum (write 0 for an all-zero row)"));
    }
    let mut terms = Vec::with_capacity(tokens.len());
    for &(col, tok) in tokens {
        let (sign, rest) = match tok.as_bytes().first() {
            Some(b'+') => (Sign::Pos, &tok[1..]),
            Some(b'-') => (Sign::Neg, &tok[1..]),
            _ => return Err(Error::parse(line, col, format!("term {tok:?} needs a leading + or -"))),
        };
        terms.push(Term { var: parse_var(rest, line, col + 1)?, sign });
    }
    let before = terms.len();
    let expr = Expression::canonical(terms).map_err(|e| Error::parse(line, 1, e.to_string()))?;
    if expr.len() != before {
        return Err(Error::parse(line, 1, "a variable appears more than once"));
    }
    Ok(expr)
}

impl FromStr for CseResult {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut definitions = Vec::new();
        let mut outputs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let tokens: Vec<(usize, &str)> =
                raw.split_whitespace().map(|t| (t.as_ptr() as usize - raw.as_ptr() as usize + 1, t)).collect();
            match (header, tokens[0].1) {
                (None, "cse") => {
                    let dims: Vec<usize> = tokens[1..].iter().filter_map(|(_, t)| t.parse().ok()).collect();
                    match dims.as_slice() {
                        [rows, cols] if tokens.len() == 3 => header = Some((*rows, *cols)),
                        _ => return Err(Error::parse(line, 1, "expected `cse <rows> <inputs>`")),
                    }
                }
                (None, _) => return Err(Error::parse(line, 1, "missing `cse <rows> <inputs>` header")),
                (Some(_), "def") => {
                    if !outputs.is_empty() {
                        return Err(Error::parse(line, 1, "definitions must precede outputs"));
                    }
                    let (col, name) = *tokens.get(1).ok_or_else(|| Error::parse(line, 4, "missing variable"))?;
                    let var = parse_var(name, line, col)?;
                    if tokens.get(2).map(|t| t.1) != Some("=") {
                        return Err(Error::parse(line, col + name.len() + 1, "expected `=`"));
                    }
                    definitions.push(Definition { var, expr: parse_sum(&tokens[3..], line)? });
                }
                (Some(_), "out") => {
                    let (col, idx) = *tokens.get(1).ok_or_else(|| Error::parse(line, 4, "missing row index"))?;
                    if idx.parse::<usize>().ok() != Some(outputs.len()) {
                        return Err(Error::parse(line, col, format!("expected row {}", outputs.len())));
                    }
                    if tokens.get(2).map(|t| t.1) != Some("=") {
                        return Err(Error::parse(line, col + idx.len() + 1, "expected `=`"));
                    }
                    outputs.push(parse_sum(&tokens[3..], line)?);
                }
                (Some(_), other) => {
                    return Err(Error::parse(line, tokens[0].0, format!("unknown directive {other:?}")))
                }
            }
        }
        let (rows, inputs) = header.ok_or_else(|| Error::parse(1, 1, "missing `cse <rows> <inputs>` header"))?;
        if outputs.len() != rows {
            return Err(Error::Shape(format!("header declares {rows} outputs, found {}", outputs.len())));
        }
        let result = CseResult::assemble(inputs, definitions.clone(), outputs, definitions.len());
        if result.definitions != definitions {
            return Err(Error::parse(1, 1, "definitions are not in dependency order"));
        }
        result.validate().map_err(|e| Error::parse(1, 1, e.to_string()))?;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cse::tests::eq10;
    use crate::cse::{bu_cse, td_cse};

    #[test]
    fn listing_round_trips() {
        for r in [td_cse(&eq10()), bu_cse(&eq10())] {
            let text = r.to_text();
            let back: CseResult = text.parse().unwrap();
            assert_eq!(back.definitions, r.definitions);
            assert_eq!(back.outputs, r.outputs);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn td_listing_starts_with_shared_pair() {
        let text = td_cse(&eq10()).to_text();
        assert_eq!(text.lines().nth(1), Some("def x6 = +x2 +x3"));
    }

    #[test]
    fn rejects_malformed_listings() {
        let bad = [
            "def x2 = +x0 +x1\n",
            "cse 1 2\nout 0 = x0\n",
            "cse 1 2\nout 0 = +x0 +x0\n",
            "cse 1 2\nout 1 = +x0\n",
            "cse 2 2\nout 0 = +x0\n",
            "cse 1 2\nout 0 = +x5\n",
            "cse 1 2\ndef x3 = +x2 +x0\ndef x2 = +x0 +x1\nout 0 = +x3\n",
            "cse 1 2\nout 0 = +x0\ndef x2 = +x0 +x1\n",
        ];
        for text in bad {
            assert!(text.parse::<CseResult>().is_err(), "{text:?} should be rejected");
        }
    }

    #[test]
    fn zero_rows() {
        let r: CseResult = "cse 2 2\n# comment\nout 0 = 0\nout 1 = -x1\n".parse().unwrap();
        assert_eq!(r.evaluate(&[3, 4]), vec![0, -4]);
    }
}
