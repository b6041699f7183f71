//! Structural netlist text (`.ngl`).
//!
//! A netlist is a header followed by blocks, one per pipeline stage of the
//! network. Blocks that carry an adder graph list its nodes in id order.
//!
//! ```text
//! file     = header block*
//! header   = "ngl 1" NL "name " token NL "format " qformat NL
//! block    = "block " token " " kind (" " param)* NL [graph]
//! param    = key "=" token
//! graph    = "graph inputs " uint " outputs " uint " digits " uint " width " uint NL
//!            node* "end" NL
//! node     = "node " uint " " nodekind " " uint " " uint (" " operand)* NL
//! nodekind = "input" | "add" | "delay" | "output"
//! operand  = ("+" | "-") uint
//! qformat  = "Q" uint "." uint
//! ```
//!
//! Node ids count up from 0 without gaps and operands may only name earlier
//! nodes. Input nodes come first and are numbered in order; output nodes are
//! numbered by order of appearance. The fourth node field is the digit width,
//! which must equal `width / digits`. Blank lines and lines starting with `#`
//! are ignored.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::model::{FixedPointFormat, LayerKind, Sign};
use crate::treegen::{AdderGraph, NodeKind, Operand};

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub label: String,
    pub kind: LayerKind,
    /// `key=value` pairs in emission order.
    pub params: Vec<(String, String)>,
    pub graph: Option<AdderGraph>,
}

impl Block {
    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Netlist {
    pub name: String,
    pub format: FixedPointFormat,
    pub blocks: Vec<Block>,
}

impl Netlist {
    /// A netlist holding a single convolution graph.
    pub fn single(name: &str, format: FixedPointFormat, g: AdderGraph) -> Netlist {
        Netlist {
            name: name.to_string(),
            format,
            blocks: vec![Block { label: name.to_string(), kind: LayerKind::Conv, params: Vec::new(), graph: Some(g) }],
        }
    }
}

fn kind_name(kind: LayerKind) -> &'static str {
    match kind {
        LayerKind::Buffer => "buffer",
        LayerKind::Conv => "conv",
        LayerKind::MaxPool => "max_pool",
        LayerKind::ScaleShift => "scale_shift",
        LayerKind::Mux => "mux",
        LayerKind::Dense => "dense",
        LayerKind::Fifo => "fifo",
    }
}

fn kind_from_name(name: &str) -> Option<LayerKind> {
    [
        LayerKind::Buffer,
        LayerKind::Conv,
        LayerKind::MaxPool,
        LayerKind::ScaleShift,
        LayerKind::Mux,
        LayerKind::Dense,
        LayerKind::Fifo,
    ]
    .into_iter()
    .find(|&k| kind_name(k) == name)
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace) && !s.contains('=') && !s.starts_with('#')
}

fn emit_graph(out: &mut String, g: &AdderGraph) {
    writeln!(out, "graph inputs {} outputs {} digits {} width {}", g.inputs, g.outputs.len(), g.digits, g.word_bits)
        .unwrap();
    let dw = g.digit_width();
    for (id, node) in g.nodes.iter().enumerate() {
        write!(out, "node {id} {} {} {dw}", node.kind.name(), node.stage).unwrap();
        for op in &node.operands {
            write!(out, " {op}").unwrap();
        }
        out.push('\n');
    }
    out.push_str("end\n");
}

/// Writes a netlist. Every graph must pass validation and every label, key
/// and value must be a single token.
pub fn emit(n: &Netlist) -> Result<String> {
    if !is_token(&n.name) {
        return Err(Error::Config(format!("netlist name {:?} is not a single token", n.name)));
    }
    let mut out = format!("ngl 1\nname {}\nformat {}\n", n.name, n.format);
    for b in &n.blocks {
        if !is_token(&b.label) {
            return Err(Error::Config(format!("block label {:?} is not a single token", b.label)));
        }
        write!(out, "block {} {}", b.label, kind_name(b.kind)).unwrap();
        for (k, v) in &b.params {
            if !is_token(k) || !is_token(v) {
                return Err(Error::Config(format!("block parameter {k:?}={v:?} is not a pair of tokens")));
            }
            write!(out, " {k}={v}").unwrap();
        }
        out.push('\n');
        if let Some(g) = &b.graph {
            g.validate()?;
            emit_graph(&mut out, g);
        }
    }
    Ok(out)
}

/// Shorthand for a netlist holding one graph.
pub fn emit_graph_text(name: &str, format: FixedPointFormat, g: &AdderGraph) -> Result<String> {
    emit(&Netlist::single(name, format, g.clone()))
}

struct Line<'a> {
    number: usize,
    tokens: Vec<(usize, &'a str)>,
}

impl<'a> Line<'a> {
    fn new(number: usize, raw: &'a str) -> Line<'a> {
        let tokens = raw.split_whitespace().map(|t| (t.as_ptr() as usize - raw.as_ptr() as usize + 1, t)).collect();
        Line { number, tokens }
    }

    fn err(&self, field: usize, msg: impl Into<String>) -> Error {
        let col = self.tokens.get(field).map_or_else(|| self.tokens.last().map_or(1, |(c, t)| c + t.len()), |t| t.0);
        Error::parse(self.number, col, msg)
    }

    fn word(&self, field: usize, what: &str) -> Result<&'a str> {
        self.tokens.get(field).map(|t| t.1).ok_or_else(|| self.err(field, format!("missing {what}")))
    }

    fn keyword(&self, field: usize, expected: &str) -> Result<()> {
        match self.tokens.get(field) {
            Some((_, t)) if *t == expected => Ok(()),
            Some((_, t)) => Err(self.err(field, format!("expected `{expected}`, found {t:?}"))),
            None => Err(self.err(field, format!("expected `{expected}`"))),
        }
    }

    fn uint<T: std::str::FromStr>(&self, field: usize, what: &str) -> Result<T> {
        let t = self.word(field, what)?;
        if !t.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.err(field, format!("{what} must be an unsigned integer, found {t:?}")));
        }
        t.parse().map_err(|_| self.err(field, format!("{what} {t:?} is out of range")))
    }

    fn exact_len(&self, n: usize) -> Result<()> {
        if self.tokens.len() > n {
            return Err(self.err(n, "unexpected trailing field"));
        }
        Ok(())
    }
}

fn parse_format(line: &Line) -> Result<FixedPointFormat> {
    let t = line.word(1, "format")?;
    let bad = || line.err(1, format!("expected a format like Q12.4, found {t:?}"));
    let (int, frac) = t.strip_prefix('Q').and_then(|r| r.split_once('.')).ok_or_else(bad)?;
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || !digits(frac) {
        return Err(bad());
    }
    let (int, frac): (u32, u32) = (int.parse().map_err(|_| bad())?, frac.parse().map_err(|_| bad())?);
    let format = FixedPointFormat { total_bits: int.checked_add(frac).ok_or_else(bad)?, frac_bits: frac };
    format.validate().map_err(|e| line.err(1, e.to_string()))?;
    if format.to_string() != t {
        return Err(bad());
    }
    Ok(format)
}

fn parse_graph<'a>(lines: &mut impl Iterator<Item = Line<'a>>, header: &Line) -> Result<AdderGraph> {
    header.keyword(1, "inputs")?;
    let inputs: usize = header.uint(2, "input count")?;
    header.keyword(3, "outputs")?;
    let outputs: usize = header.uint(4, "output count")?;
    header.keyword(5, "digits")?;
    let digits: u32 = header.uint(6, "digit count")?;
    header.keyword(7, "width")?;
    let width: u32 = header.uint(8, "word width")?;
    header.exact_len(9)?;
    if digits == 0 || width == 0 || width > 64 || !width.is_multiple_of(digits) {
        return Err(header.err(6, format!("{digits} digits cannot split a {width}-bit word")));
    }
    let mut g = AdderGraph::with_inputs(0);
    g.digits = digits;
    g.word_bits = width;
    let mut end_line = header.number;
    loop {
        let Some(line) = lines.next() else {
            return Err(Error::parse(end_line + 1, 1, "graph is missing its `end` line"));
        };
        end_line = line.number;
        match line.tokens[0].1 {
            "end" => {
                line.exact_len(1)?;
                break;
            }
            "node" => {}
            other => return Err(line.err(0, format!("expected `node` or `end`, found {other:?}"))),
        }
        let id: usize = line.uint(1, "node id")?;
        if id != g.nodes.len() {
            return Err(line.err(1, format!("expected node id {}", g.nodes.len())));
        }
        let stage: u32 = line.uint(3, "stage")?;
        let dw: u32 = line.uint(4, "digit width")?;
        if dw != width / digits {
            return Err(line.err(4, format!("digit width must be {}", width / digits)));
        }
        let mut operands = Vec::with_capacity(line.tokens.len().saturating_sub(5));
        for field in 5..line.tokens.len() {
            let t = line.tokens[field].1;
            let (sign, rest) = match t.as_bytes()[0] {
                b'+' => (Sign::Pos, &t[1..]),
                b'-' => (Sign::Neg, &t[1..]),
                _ => return Err(line.err(field, format!("operand {t:?} needs a leading + or -"))),
            };
            if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                return Err(line.err(field, format!("operand {t:?} must be a signed node id")));
            }
            let node: usize = rest.parse().map_err(|_| line.err(field, format!("operand {t:?} is out of range")))?;
            if node >= id {
                return Err(Error::Dangling { line: line.number, id: node });
            }
            operands.push(Operand { node, sign });
        }
        let kind = match line.word(2, "node kind")? {
            "input" => {
                if g.nodes.len() != g.inputs {
                    return Err(line.err(2, "input nodes must come first"));
                }
                g.inputs += 1;
                NodeKind::Input(g.inputs - 1)
            }
            "add" => NodeKind::Add,
            "delay" => NodeKind::Delay,
            "output" => NodeKind::Output(g.outputs.len()),
            other => return Err(line.err(2, format!("unknown node kind {other:?}"))),
        };
        if let NodeKind::Input(_) = kind {
            if stage != 0 || !operands.is_empty() {
                return Err(line.err(3, "input nodes sit at stage 0 without operands"));
            }
        }
        g.push(kind, operands, stage);
    }
    let wrong = |what: &str, declared: usize, found: usize| {
        Error::parse(header.number, 1, format!("header declares {declared} {what}, found {found}"))
    };
    if g.inputs != inputs {
        return Err(wrong("inputs", inputs, g.inputs));
    }
    if g.outputs.len() != outputs {
        return Err(wrong("outputs", outputs, g.outputs.len()));
    }
    g.validate().map_err(|e| Error::parse(end_line, 1, e.to_string()))?;
    Ok(g)
}

/// Reads a netlist written by [`emit`].
pub fn parse(text: &str) -> Result<Netlist> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, raw)| !raw.trim().is_empty() && !raw.trim_start().starts_with('#'))
        .map(|(i, raw)| Line::new(i + 1, raw));
    let first = lines.next().ok_or_else(|| Error::parse(1, 1, "empty netlist"))?;
    first.keyword(0, "ngl")?;
    first.keyword(1, "1")?;
    first.exact_len(2)?;
    let name_line = lines.next().ok_or_else(|| Error::parse(first.number + 1, 1, "missing `name` line"))?;
    name_line.keyword(0, "name")?;
    let name = name_line.word(1, "name")?.to_string();
    name_line.exact_len(2)?;
    let format_line = lines.next().ok_or_else(|| Error::parse(name_line.number + 1, 1, "missing `format` line"))?;
    format_line.keyword(0, "format")?;
    let format = parse_format(&format_line)?;
    format_line.exact_len(2)?;

    let mut blocks: Vec<Block> = Vec::new();
    while let Some(line) = lines.next() {
        match line.tokens[0].1 {
            "block" => {
                let label = line.word(1, "block label")?.to_string();
                let kind_text = line.word(2, "block kind")?;
                let kind = kind_from_name(kind_text)
                    .ok_or_else(|| line.err(2, format!("unknown block kind {kind_text:?}")))?;
                let mut params = Vec::new();
                for field in 3..line.tokens.len() {
                    let t = line.tokens[field].1;
                    match t.split_once('=') {
                        Some((k, v)) if is_token(k) && is_token(v) => params.push((k.to_string(), v.to_string())),
                        _ => return Err(line.err(field, format!("expected key=value, found {t:?}"))),
                    }
                }
                blocks.push(Block { label, kind, params, graph: None });
            }
            "graph" => {
                let block = match blocks.last_mut() {
                    Some(b) if b.graph.is_none() => b,
                    _ => return Err(line.err(0, "a graph must follow its own `block` line")),
                };
                block.graph = Some(parse_graph(&mut lines, &line)?);
            }
            other => return Err(line.err(0, format!("expected `block` or `graph`, found {other:?}"))),
        }
    }
    Ok(Netlist { name, format, blocks })
}

/// Reads a netlist that must hold exactly one graph.
pub fn parse_single_graph(text: &str) -> Result<AdderGraph> {
    let n = parse(text)?;
    let mut graphs = n.blocks.into_iter().filter_map(|b| b.graph);
    match (graphs.next(), graphs.next()) {
        (Some(g), None) => Ok(g),
        _ => Err(Error::Shape("expected exactly one graph in the netlist".into())),
    }
}
