//! Line-oriented text format for models.
//!
//! ```text
//! MRF v1
//! vars <n>
//! card <k_1> ... <k_n>
//! unary <node> <k_node floats>     # optional, any number of lines
//! edges <m>
//! edge <u> <v>                     # 0-indexed
//! <k_u lines of k_v floats>        # row i = psi(x_u = i, x_v = .)
//! ```
//!
//! `#` starts a comment; blank lines are ignored. Unary lines are folded into
//! the model on load, so [`save_model`] only writes unaries of isolated nodes.
//! Floats are written with Rust's shortest round-trip formatting, which makes
//! `load(save(m)) == m` exact.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{Model, PotentialTable};

pub const HEADER: &str = "MRF v1";

type Tokens<'a> = Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a>;

struct Lines<'a> {
    inner: std::iter::Peekable<Tokens<'a>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, Vec<&'a str>)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>()))
                .filter(|(_, toks)| !toks.is_empty()),
        );
        Self { inner: it.peekable(), last_line: text.lines().count() }
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.inner
            .next()
            .ok_or_else(|| parse_err(self.last_line, format!("unexpected end of input, expected {what}")))
    }

    fn peek_keyword(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|(_, t)| t[0])
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_usize(line: usize, tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| parse_err(line, format!("expected a non-negative integer, found `{tok}`")))
}

fn parse_positive(line: usize, tok: &str, context: &str) -> Result<f64> {
    let x: f64 = tok.parse().map_err(|_| parse_err(line, format!("expected a number, found `{tok}`")))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(parse_err(line, format!("{context}: value {tok} is not strictly positive")))
    }
}

fn expect_keyword(line: usize, toks: &[&str], kw: &str) -> Result<()> {
    if toks[0] == kw {
        Ok(())
    } else {
        Err(parse_err(line, format!("expected `{kw}`, found `{}`", toks[0])))
    }
}

/// Parses a model from text.
pub fn load_model(text: &str) -> Result<Model> {
    let mut lines = Lines::new(text);

    let (ln, toks) = lines.next("header")?;
    if toks.join(" ") != HEADER {
        return Err(parse_err(ln, format!("expected header `{HEADER}`")));
    }

    let (ln, toks) = lines.next("`vars`")?;
    expect_keyword(ln, &toks, "vars")?;
    if toks.len() != 2 {
        return Err(parse_err(ln, "`vars` takes exactly one count"));
    }
    let n = parse_usize(ln, toks[1])?;

    let (ln, toks) = lines.next("`card`")?;
    expect_keyword(ln, &toks, "card")?;
    if toks.len() != n + 1 {
        return Err(parse_err(ln, format!("`card` lists {} values, expected {n}", toks.len() - 1)));
    }
    let cards = toks[1..].iter().map(|t| parse_usize(ln, t)).collect::<Result<Vec<_>>>()?;
    if let Some(i) = cards.iter().position(|&k| k == 0) {
        return Err(parse_err(ln, format!("node {i} has cardinality 0")));
    }

    let mut unaries = Vec::new();
    let mut with_unary = HashSet::new();
    while lines.peek_keyword() == Some("unary") {
        let (ln, toks) = lines.next("`unary`")?;
        let node = parse_usize(ln, toks.get(1).copied().unwrap_or(""))?;
        if node >= n {
            return Err(parse_err(ln, format!("unary on node {node}, but there are {n} nodes")));
        }
        if !with_unary.insert(node) {
            return Err(parse_err(ln, format!("duplicate unary for node {node}")));
        }
        if toks.len() != cards[node] + 2 {
            return Err(parse_err(
                ln,
                format!("unary on node {node} has {} values, expected {}", toks.len() - 2, cards[node]),
            ));
        }
        let ctx = format!("unary on node {node}");
        let f = toks[2..].iter().map(|t| parse_positive(ln, t, &ctx)).collect::<Result<Vec<_>>>()?;
        unaries.push((node, f));
    }

    let (ln, toks) = lines.next("`edges`")?;
    expect_keyword(ln, &toks, "edges")?;
    if toks.len() != 2 {
        return Err(parse_err(ln, "`edges` takes exactly one count"));
    }
    let m = parse_usize(ln, toks[1])?;

    let mut edges = Vec::with_capacity(m);
    let mut tables = Vec::with_capacity(m);
    let mut seen = HashSet::new();
    for e in 0..m {
        let (ln, toks) = lines.next("`edge`")?;
        expect_keyword(ln, &toks, "edge")?;
        if toks.len() != 3 {
            return Err(parse_err(ln, "`edge` takes two node indices"));
        }
        let (u, v) = (parse_usize(ln, toks[1])?, parse_usize(ln, toks[2])?);
        if u >= n || v >= n {
            return Err(parse_err(ln, format!("edge {e} ({u}, {v}) references a missing node")));
        }
        if u == v {
            return Err(parse_err(ln, format!("edge {e} is a self-loop on node {u}")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(parse_err(ln, format!("edge {e} ({u}, {v}) duplicates an earlier edge")));
        }
        let ctx = format!("edge {e} ({u}, {v})");
        let mut data = Vec::with_capacity(cards[u] * cards[v]);
        for i in 0..cards[u] {
            let (ln, toks) = lines.next(&format!("row {i} of edge {e}"))?;
            if toks.len() != cards[v] {
                return Err(parse_err(
                    ln,
                    format!("{ctx} row {i} has {} values, expected {}", toks.len(), cards[v]),
                ));
            }
            for t in toks {
                data.push(parse_positive(ln, t, &ctx)?);
            }
        }
        edges.push((u, v));
        tables.push(PotentialTable::new(cards[u], cards[v], data)?);
    }

    if let Ok((ln, toks)) = lines.next("") {
        return Err(parse_err(ln, format!("unexpected trailing content `{}`", toks.join(" "))));
    }

    Model::with_unaries(cards, edges, tables, unaries)
}

/// Reads and parses a model.
pub fn read_model<R: BufRead>(mut reader: R) -> Result<Model> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    load_model(&text)
}

fn join_floats(xs: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x:?}").unwrap();
    }
    s
}

/// Canonical text form of a model.
pub fn save_model(model: &Model) -> String {
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "vars {}", model.node_count()).unwrap();
    let cards: Vec<String> = model.cardinalities().iter().map(|k| k.to_string()).collect();
    writeln!(s, "card {}", cards.join(" ")).unwrap();
    for v in 0..model.node_count() {
        if let Some(f) = model.isolated_unary(v) {
            writeln!(s, "unary {v} {}", join_floats(f)).unwrap();
        }
    }
    writeln!(s, "edges {}", model.edge_count()).unwrap();
    for (e, &(u, v)) in model.edges().iter().enumerate() {
        writeln!(s, "edge {u} {v}").unwrap();
        let t = model.table(e);
        for i in 0..t.rows() {
            writeln!(s, "{}", join_floats(t.row(i))).unwrap();
        }
    }
    s
}

pub fn write_model<W: Write>(model: &Model, mut w: W) -> Result<()> {
    w.write_all(save_model(model).as_bytes())?;
    Ok(())
}
