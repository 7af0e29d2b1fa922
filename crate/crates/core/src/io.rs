//! Line-oriented text formats for explicit MDPs, BMDPs, factored MDPs and
//! partitions.
//!
//! ```text
//! mdp                         bmdp                      fmdp
//! states 2                    states 1                  vars P Q
//! actions 1                   actions 1                 actions go
//! discount 0.9                discount 0.5              discount 0.9
//! reward 0 1                  reward 0 0 1              cpt go P (if Q (leaf 0.8) (leaf 0))
//! t 0 0 1 1                   t 0 0 0 1 1               cpt go Q (leaf 0.5)
//! t 0 1 1 1                                             reward (if P (leaf 1) (leaf 0))
//!
//! partition                   partition
//! states 3                    vars P Q
//! block 0 : 0 2               block 0 : P & !Q | Q
//! block 1 : 1                 block 1 : !P & !Q
//! ```
//!
//! `#` starts a comment. Reals are written with 17 significant digits so that
//! every `f64` survives a round trip unchanged.

use std::fmt::Write as _;

use thiserror::Error;

use crate::factored::{BlockFormula, DecisionTree, FactoredMdp, Literal, Term};
use crate::interval::{Bmdp, Interval};
use crate::mdp::ExplicitMdp;
use crate::reduction::Partition;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{message}")]
    Semantic { message: String },
    #[error("unknown format tag {0:?}")]
    UnknownFormat(String),
}

impl ParseError {
    fn syntax(line: usize, message: impl Into<String>) -> Self {
        Self::Syntax {
            line,
            message: message.into(),
        }
    }

    fn semantic(message: impl Into<String>) -> Self {
        Self::Semantic {
            message: message.into(),
        }
    }

    pub fn is_semantic(&self) -> bool {
        matches!(self, Self::Semantic { .. })
    }
}

type ParseResult<T> = std::result::Result<T, ParseError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mdp,
    Bmdp,
    Fmdp,
    Partition,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Mdp => "mdp",
            Self::Bmdp => "bmdp",
            Self::Fmdp => "fmdp",
            Self::Partition => "partition",
        }
    }
}

/// A partition given either as explicit state sets or as block formulas.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionFile {
    Explicit(Partition),
    Symbolic {
        variables: Vec<String>,
        blocks: Vec<BlockFormula>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Mdp(ExplicitMdp<T>),
    Bmdp(Bmdp<T>),
    Fmdp(FactoredMdp<T>),
    Partition(PartitionFile),
}

impl<T> Model<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Mdp(_) => ModelKind::Mdp,
            Self::Bmdp(_) => ModelKind::Bmdp,
            Self::Fmdp(_) => ModelKind::Fmdp,
            Self::Partition(_) => ModelKind::Partition,
        }
    }
}

/// Formats `x` like C's `%.{digits}g`.
pub fn format_real(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let all: String = mantissa.chars().filter(|c| *c != '.').collect();
    if exp < -4 || exp >= digits as i32 {
        let mut m = format!("{}.{}", &all[..1], &all[1..]);
        trim_fraction(&mut m);
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{m}e{esign}{:02}", exp.abs());
    }
    let mut out = String::from(sign);
    if exp >= 0 {
        let split = exp as usize + 1;
        out.push_str(&all[..split]);
        out.push('.');
        out.push_str(&all[split..]);
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat('0').take((-exp - 1) as usize));
        out.push_str(&all);
    }
    trim_fraction(&mut out);
    out
}

fn trim_fraction(s: &mut String) {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
}

fn real<T: Scalar>(x: T) -> String {
    format_real(x.as_f64(), 17)
}

struct Line {
    number: usize,
    tokens: Vec<String>,
}

fn tokenize(text: &str) -> Vec<Line> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let content = raw.split('#').next().unwrap_or("");
            let mut tokens = Vec::new();
            let mut current = String::new();
            for c in content.chars() {
                if c.is_whitespace() || "()|&!:".contains(c) {
                    if !current.is_empty() {
                        tokens.push(std::mem::take(&mut current));
                    }
                    if !c.is_whitespace() {
                        tokens.push(c.to_string());
                    }
                } else {
                    current.push(c);
                }
            }
            if !current.is_empty() {
                tokens.push(current);
            }
            (!tokens.is_empty()).then_some(Line {
                number: i + 1,
                tokens,
            })
        })
        .collect()
}

struct Cursor<'a> {
    lines: &'a [Line],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next_line(&mut self) -> Option<&'a Line> {
        let line = self.lines.get(self.pos);
        self.pos += 1;
        line
    }

    fn last_line_number(&self) -> usize {
        self.lines.last().map_or(1, |l| l.number)
    }

    fn peek_keyword(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|l| l.tokens[0].as_str())
    }

    /// Reads a `keyword value...` line, returning the values.
    fn keyword(&mut self, keyword: &str) -> ParseResult<(usize, &'a [String])> {
        let end = self.last_line_number();
        let line = self
            .next_line()
            .ok_or_else(|| ParseError::syntax(end, format!("expected `{keyword}`, found end of file")))?;
        if line.tokens[0] != keyword {
            return Err(ParseError::syntax(
                line.number,
                format!("expected `{keyword}`, found `{}`", line.tokens[0]),
            ));
        }
        Ok((line.number, &line.tokens[1..]))
    }
}

fn parse_count(line: usize, tok: &str) -> ParseResult<usize> {
    tok.parse()
        .map_err(|_| ParseError::syntax(line, format!("expected a non-negative integer, found `{tok}`")))
}

fn parse_real<T: Scalar>(line: usize, tok: &str) -> ParseResult<T> {
    let x: f64 = tok
        .parse()
        .map_err(|_| ParseError::syntax(line, format!("expected a real number, found `{tok}`")))?;
    T::from_f64(x).ok_or_else(|| ParseError::syntax(line, format!("`{tok}` is not representable")))
}

fn expect_arity(line: usize, values: &[String], n: usize, what: &str) -> ParseResult<()> {
    if values.len() == n {
        Ok(())
    } else {
        Err(ParseError::syntax(
            line,
            format!("`{what}` takes {n} value(s), found {}", values.len()),
        ))
    }
}

fn single_count(cursor: &mut Cursor<'_>, keyword: &str) -> ParseResult<usize> {
    let (line, values) = cursor.keyword(keyword)?;
    expect_arity(line, values, 1, keyword)?;
    parse_count(line, &values[0])
}

fn single_real<T: Scalar>(cursor: &mut Cursor<'_>, keyword: &str) -> ParseResult<T> {
    let (line, values) = cursor.keyword(keyword)?;
    expect_arity(line, values, 1, keyword)?;
    parse_real(line, &values[0])
}

fn index_in(line: usize, tok: &str, bound: usize, what: &str) -> ParseResult<usize> {
    let i = parse_count(line, tok)?;
    if i < bound {
        Ok(i)
    } else {
        Err(ParseError::syntax(
            line,
            format!("{what} index {i} out of range (have {bound})"),
        ))
    }
}

/// Parses any of the four formats, dispatching on the first line.
pub fn parse_model<T: Scalar>(text: &str) -> ParseResult<Model<T>> {
    let lines = tokenize(text);
    let Some(first) = lines.first() else {
        return Err(ParseError::syntax(1, "empty input"));
    };
    if first.tokens.len() != 1 {
        return Err(ParseError::syntax(first.number, "format tag must be alone on its line"));
    }
    let mut cursor = Cursor {
        lines: &lines,
        pos: 1,
    };
    match first.tokens[0].as_str() {
        "mdp" => parse_mdp_body(&mut cursor).map(Model::Mdp),
        "bmdp" => parse_bmdp_body(&mut cursor).map(Model::Bmdp),
        "fmdp" => parse_fmdp_body(&mut cursor).map(Model::Fmdp),
        "partition" => parse_partition_body(&mut cursor).map(Model::Partition),
        other => Err(ParseError::UnknownFormat(other.to_string())),
    }
}

fn wrong_kind(expected: ModelKind, found: ModelKind) -> ParseError {
    ParseError::semantic(format!(
        "expected a `{}` file, found `{}`",
        expected.tag(),
        found.tag()
    ))
}

pub fn parse_mdp<T: Scalar>(text: &str) -> ParseResult<ExplicitMdp<T>> {
    match parse_model(text)? {
        Model::Mdp(m) => Ok(m),
        other => Err(wrong_kind(ModelKind::Mdp, other.kind())),
    }
}

pub fn parse_bmdp<T: Scalar>(text: &str) -> ParseResult<Bmdp<T>> {
    match parse_model(text)? {
        Model::Bmdp(b) => Ok(b),
        other => Err(wrong_kind(ModelKind::Bmdp, other.kind())),
    }
}

pub fn parse_fmdp<T: Scalar>(text: &str) -> ParseResult<FactoredMdp<T>> {
    match parse_model(text)? {
        Model::Fmdp(f) => Ok(f),
        other => Err(wrong_kind(ModelKind::Fmdp, other.kind())),
    }
}

pub fn parse_partition(text: &str) -> ParseResult<PartitionFile> {
    match parse_model::<f64>(text)? {
        Model::Partition(p) => Ok(p),
        other => Err(wrong_kind(ModelKind::Partition, other.kind())),
    }
}

struct Header<T> {
    states: usize,
    actions: usize,
    discount: T,
}

fn parse_header<T: Scalar>(cursor: &mut Cursor<'_>) -> ParseResult<Header<T>> {
    Ok(Header {
        states: single_count(cursor, "states")?,
        actions: single_count(cursor, "actions")?,
        discount: single_real(cursor, "discount")?,
    })
}

/// Shared body of `mdp` and `bmdp` files; `width` is 1 for points, 2 for
/// intervals.
fn parse_flat_body<T: Scalar>(
    cursor: &mut Cursor<'_>,
    width: usize,
) -> ParseResult<(Header<T>, Vec<Vec<T>>, Vec<Vec<Vec<(usize, Vec<T>)>>>)> {
    let header = parse_header::<T>(cursor)?;
    let mut rewards: Vec<Option<Vec<T>>> = vec![None; header.states];
    let mut rows = vec![vec![Vec::new(); header.states]; header.actions];
    while let Some(line) = cursor.next_line() {
        let n = line.number;
        let values = &line.tokens[1..];
        match line.tokens[0].as_str() {
            "reward" => {
                expect_arity(n, values, 1 + width, "reward")?;
                let s = index_in(n, &values[0], header.states, "state")?;
                let r = values[1..]
                    .iter()
                    .map(|t| parse_real(n, t))
                    .collect::<ParseResult<Vec<T>>>()?;
                if rewards[s].replace(r).is_some() {
                    return Err(ParseError::syntax(n, format!("duplicate reward for state {s}")));
                }
            }
            "t" => {
                expect_arity(n, values, 3 + width, "t")?;
                let a = index_in(n, &values[0], header.actions, "action")?;
                let s = index_in(n, &values[1], header.states, "state")?;
                let q = parse_count(n, &values[2])?;
                let p = values[3..]
                    .iter()
                    .map(|t| parse_real(n, t))
                    .collect::<ParseResult<Vec<T>>>()?;
                rows[a][s].push((q, p));
            }
            other => {
                return Err(ParseError::syntax(
                    n,
                    format!("expected `reward` or `t`, found `{other}`"),
                ))
            }
        }
    }
    let rewards = rewards
        .into_iter()
        .map(|r| r.unwrap_or_else(|| vec![T::zero(); width]))
        .collect();
    Ok((header, rewards, rows))
}

fn parse_mdp_body<T: Scalar>(cursor: &mut Cursor<'_>) -> ParseResult<ExplicitMdp<T>> {
    let (h, rewards, rows) = parse_flat_body::<T>(cursor, 1)?;
    let rewards = rewards.into_iter().map(|r| r[0]).collect();
    let rows = rows
        .into_iter()
        .map(|rows| {
            rows.into_iter()
                .map(|row| row.into_iter().map(|(q, p)| (q, p[0])).collect())
                .collect()
        })
        .collect();
    let m = ExplicitMdp::new(h.states, h.actions, h.discount, rewards, rows);
    let report = m.validate();
    if !report.is_ok() {
        return Err(ParseError::semantic(report.to_string()));
    }
    Ok(m)
}

fn parse_bmdp_body<T: Scalar>(cursor: &mut Cursor<'_>) -> ParseResult<Bmdp<T>> {
    let (h, rewards, rows) = parse_flat_body::<T>(cursor, 2)?;
    let rewards = rewards
        .into_iter()
        .map(|r| Interval::new(r[0], r[1]))
        .collect();
    let rows = rows
        .into_iter()
        .map(|rows| {
            rows.into_iter()
                .map(|row| row.into_iter().map(|(q, p)| (q, Interval::new(p[0], p[1]))).collect())
                .collect()
        })
        .collect();
    let b = Bmdp::new(h.states, h.actions, h.discount, rewards, rows);
    let report = b.validate();
    if !report.is_ok() {
        return Err(ParseError::semantic(report.to_string()));
    }
    Ok(b)
}

fn name_index(line: usize, names: &[String], tok: &str, what: &str) -> ParseResult<usize> {
    names
        .iter()
        .position(|n| n == tok)
        .ok_or_else(|| ParseError::syntax(line, format!("unknown {what} `{tok}`")))
}

fn parse_tree<T: Scalar>(
    line: usize,
    tokens: &[String],
    pos: &mut usize,
    vars: &[String],
) -> ParseResult<DecisionTree<T>> {
    let mut take = |what: &str| -> ParseResult<&String> {
        let t = tokens
            .get(*pos)
            .ok_or_else(|| ParseError::syntax(line, format!("expected {what}, found end of line")))?;
        *pos += 1;
        Ok(t)
    };
    let open = take("`(`")?;
    if open != "(" {
        return Err(ParseError::syntax(line, format!("expected `(`, found `{open}`")));
    }
    let head = take("`leaf` or `if`")?.clone();
    let tree = match head.as_str() {
        "leaf" => {
            let v = take("a real number")?.clone();
            DecisionTree::leaf(parse_real(line, &v)?)
        }
        "if" => {
            let var = take("a variable")?.clone();
            let var = name_index(line, vars, &var, "variable")?;
            let high = parse_tree(line, tokens, pos, vars)?;
            let low = parse_tree(line, tokens, pos, vars)?;
            DecisionTree::node(var, high, low)
        }
        other => {
            return Err(ParseError::syntax(
                line,
                format!("expected `leaf` or `if`, found `{other}`"),
            ))
        }
    };
    match tokens.get(*pos) {
        Some(t) if t == ")" => {
            *pos += 1;
            Ok(tree)
        }
        Some(t) => Err(ParseError::syntax(line, format!("expected `)`, found `{t}`"))),
        None => Err(ParseError::syntax(line, "expected `)`, found end of line")),
    }
}

fn parse_whole_tree<T: Scalar>(
    line: usize,
    tokens: &[String],
    vars: &[String],
) -> ParseResult<DecisionTree<T>> {
    let mut pos = 0;
    let tree = parse_tree(line, tokens, &mut pos, vars)?;
    if let Some(extra) = tokens.get(pos) {
        return Err(ParseError::syntax(line, format!("unexpected `{extra}` after tree")));
    }
    Ok(tree)
}

fn parse_fmdp_body<T: Scalar>(cursor: &mut Cursor<'_>) -> ParseResult<FactoredMdp<T>> {
    let (line, vars) = cursor.keyword("vars")?;
    if vars.is_empty() {
        return Err(ParseError::syntax(line, "`vars` needs at least one name"));
    }
    let vars = vars.to_vec();
    let (line, actions) = cursor.keyword("actions")?;
    if actions.is_empty() {
        return Err(ParseError::syntax(line, "`actions` needs at least one name"));
    }
    let actions = actions.to_vec();
    let discount = single_real::<T>(cursor, "discount")?;
    let mut cpts: Vec<Vec<Option<DecisionTree<T>>>> = vec![vec![None; vars.len()]; actions.len()];
    let mut reward = None;
    while let Some(line) = cursor.next_line() {
        let n = line.number;
        match line.tokens[0].as_str() {
            "cpt" => {
                if line.tokens.len() < 3 {
                    return Err(ParseError::syntax(n, "`cpt` needs an action, a variable and a tree"));
                }
                let a = name_index(n, &actions, &line.tokens[1], "action")?;
                let v = name_index(n, &vars, &line.tokens[2], "variable")?;
                let tree = parse_whole_tree(n, &line.tokens[3..], &vars)?;
                if cpts[a][v].replace(tree).is_some() {
                    return Err(ParseError::syntax(
                        n,
                        format!("duplicate cpt for {} {}", actions[a], vars[v]),
                    ));
                }
            }
            "reward" => {
                let tree = parse_whole_tree(n, &line.tokens[1..], &vars)?;
                if reward.replace(tree).is_some() {
                    return Err(ParseError::syntax(n, "duplicate reward tree"));
                }
            }
            other => {
                return Err(ParseError::syntax(
                    n,
                    format!("expected `cpt` or `reward`, found `{other}`"),
                ))
            }
        }
    }
    let mut table = Vec::with_capacity(actions.len());
    for (a, row) in cpts.into_iter().enumerate() {
        let mut trees = Vec::with_capacity(vars.len());
        for (v, tree) in row.into_iter().enumerate() {
            trees.push(tree.ok_or_else(|| {
                ParseError::semantic(format!("missing cpt for {} {}", actions[a], vars[v]))
            })?);
        }
        table.push(trees);
    }
    let reward = reward.ok_or_else(|| ParseError::semantic("missing reward tree"))?;
    FactoredMdp::new(vars, actions, discount, table, reward)
        .map_err(|e| ParseError::semantic(e.to_string()))
}

enum BlockSpec {
    States(Vec<usize>),
    Formula(BlockFormula),
}

fn parse_dnf(line: usize, tokens: &[String], vars: &[String]) -> ParseResult<BlockFormula> {
    if tokens.len() == 1 && (tokens[0] == "true" || tokens[0] == "false") {
        return Ok(if tokens[0] == "true" {
            BlockFormula::truth()
        } else {
            BlockFormula::falsum()
        });
    }
    let mut terms = Vec::new();
    for chunk in tokens.split(|t| t == "|") {
        let mut lits = Vec::new();
        for lit in chunk.split(|t| t == "&") {
            let (positive, name) = match lit {
                [name] => (true, name),
                [bang, name] if bang == "!" => (false, name),
                _ => return Err(ParseError::syntax(line, "malformed literal in block formula")),
            };
            if name == "true" && positive && chunk.len() == 1 {
                continue;
            }
            let var = name_index(line, vars, name, "variable")?;
            lits.push(Literal { var, positive });
        }
        let term = Term::new(lits)
            .ok_or_else(|| ParseError::semantic(format!("line {line}: contradictory term")))?;
        terms.push(term);
    }
    Ok(BlockFormula::from_terms(terms))
}

fn parse_partition_body(cursor: &mut Cursor<'_>) -> ParseResult<PartitionFile> {
    let mut n_states = None;
    let mut vars: Option<Vec<String>> = None;
    loop {
        match cursor.peek_keyword() {
            Some("states") if n_states.is_none() => n_states = Some(single_count(cursor, "states")?),
            Some("vars") if vars.is_none() => vars = Some(cursor.keyword("vars")?.1.to_vec()),
            _ => break,
        }
    }
    let mut specs: Vec<Option<BlockSpec>> = Vec::new();
    while let Some(line) = cursor.next_line() {
        let n = line.number;
        let t = &line.tokens;
        if t[0] != "block" {
            return Err(ParseError::syntax(n, format!("expected `block`, found `{}`", t[0])));
        }
        if t.len() < 4 || t[2] != ":" {
            return Err(ParseError::syntax(n, "expected `block INDEX : contents`"));
        }
        let index = parse_count(n, &t[1])?;
        let body = &t[3..];
        let spec = if body[0].parse::<usize>().is_ok() {
            BlockSpec::States(
                body.iter()
                    .map(|tok| parse_count(n, tok))
                    .collect::<ParseResult<_>>()?,
            )
        } else {
            let vars = vars
                .as_deref()
                .ok_or_else(|| ParseError::syntax(n, "block formulas need a `vars` line"))?;
            BlockSpec::Formula(parse_dnf(n, body, vars)?)
        };
        if specs.len() <= index {
            specs.resize_with(index + 1, || None);
        }
        if specs[index].replace(spec).is_some() {
            return Err(ParseError::syntax(n, format!("duplicate block {index}")));
        }
    }
    let specs = specs
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| ParseError::semantic(format!("block {i} is missing"))))
        .collect::<ParseResult<Vec<_>>>()?;
    if specs.iter().all(|s| matches!(s, BlockSpec::States(_))) {
        let blocks: Vec<Vec<usize>> = specs
            .into_iter()
            .map(|s| match s {
                BlockSpec::States(v) => v,
                BlockSpec::Formula(_) => unreachable!(),
            })
            .collect();
        let n = n_states.unwrap_or_else(|| blocks.iter().flatten().max().map_or(0, |&m| m + 1));
        return Partition::new(n, blocks)
            .map(PartitionFile::Explicit)
            .map_err(|e| ParseError::semantic(e.to_string()));
    }
    let blocks = specs
        .into_iter()
        .map(|s| match s {
            BlockSpec::Formula(f) => Ok(f),
            BlockSpec::States(_) => Err(ParseError::semantic(
                "partition mixes state lists and block formulas",
            )),
        })
        .collect::<ParseResult<Vec<_>>>()?;
    Ok(PartitionFile::Symbolic {
        variables: vars.unwrap_or_default(),
        blocks,
    })
}

pub fn serialize_mdp<T: Scalar>(m: &ExplicitMdp<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mdp");
    let _ = writeln!(out, "states {}", m.n_states());
    let _ = writeln!(out, "actions {}", m.n_actions());
    let _ = writeln!(out, "discount {}", real(m.discount()));
    for (s, &r) in m.rewards().iter().enumerate() {
        let _ = writeln!(out, "reward {s} {}", real(r));
    }
    for (a, rows) in m.transitions().iter().enumerate() {
        for (s, row) in rows.iter().enumerate() {
            for &(q, p) in row {
                let _ = writeln!(out, "t {a} {s} {q} {}", real(p));
            }
        }
    }
    out
}

pub fn serialize_bmdp<T: Scalar>(b: &Bmdp<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "bmdp");
    let _ = writeln!(out, "states {}", b.n_states());
    let _ = writeln!(out, "actions {}", b.n_actions());
    let _ = writeln!(out, "discount {}", real(b.discount()));
    for (s, iv) in b.reward_bounds().iter().enumerate() {
        let _ = writeln!(out, "reward {s} {} {}", real(iv.lo), real(iv.hi));
    }
    for (a, rows) in b.transition_bounds().iter().enumerate() {
        for (s, row) in rows.iter().enumerate() {
            for &(q, iv) in row {
                let _ = writeln!(out, "t {a} {s} {q} {} {}", real(iv.lo), real(iv.hi));
            }
        }
    }
    out
}

fn write_tree<T: Scalar>(out: &mut String, tree: &DecisionTree<T>, vars: &[String]) {
    match tree {
        DecisionTree::Leaf(v) => {
            let _ = write!(out, "(leaf {})", real(*v));
        }
        DecisionTree::Node { var, high, low } => {
            let _ = write!(out, "(if {} ", vars[*var]);
            write_tree(out, high, vars);
            out.push(' ');
            write_tree(out, low, vars);
            out.push(')');
        }
    }
}

pub fn serialize_fmdp<T: Scalar>(f: &FactoredMdp<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fmdp");
    let _ = writeln!(out, "vars {}", f.variables().join(" "));
    let _ = writeln!(out, "actions {}", f.actions().join(" "));
    let _ = writeln!(out, "discount {}", real(f.discount()));
    for (a, action) in f.actions().iter().enumerate() {
        for (v, var) in f.variables().iter().enumerate() {
            let _ = write!(out, "cpt {action} {var} ");
            write_tree(&mut out, f.cpt(a, v), f.variables());
            out.push('\n');
        }
    }
    out.push_str("reward ");
    write_tree(&mut out, f.reward_tree(), f.variables());
    out.push('\n');
    out
}

pub fn serialize_partition(p: &PartitionFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "partition");
    match p {
        PartitionFile::Explicit(p) => {
            let _ = writeln!(out, "states {}", p.n_states());
            for (i, block) in p.blocks().iter().enumerate() {
                let states: Vec<String> = block.iter().map(usize::to_string).collect();
                let _ = writeln!(out, "block {i} : {}", states.join(" "));
            }
        }
        PartitionFile::Symbolic { variables, blocks } => {
            let _ = writeln!(out, "vars {}", variables.join(" "));
            for (i, block) in blocks.iter().enumerate() {
                let _ = writeln!(out, "block {i} : {}", block.display(variables));
            }
        }
    }
    out
}

pub fn serialize_model<T: Scalar>(model: &Model<T>) -> String {
    match model {
        Model::Mdp(m) => serialize_mdp(m),
        Model::Bmdp(b) => serialize_bmdp(b),
        Model::Fmdp(f) => serialize_fmdp(f),
        Model::Partition(p) => serialize_partition(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_mdp_parses() {
        let m: ExplicitMdp<f64> =
            parse_mdp("mdp\nstates 1\nactions 1\ndiscount 0.9\nreward 0 1\nt 0 0 0 1").unwrap();
        assert_eq!(m.n_states(), 1);
        assert_eq!(m.rewards(), &[1.0]);
        assert_eq!(m.row(0, 0), &[(0, 1.0)]);
    }

    #[test]
    fn discount_one_is_semantic_error() {
        let err = parse_mdp::<f64>("mdp\nstates 1\nactions 1\ndiscount 1.0\nreward 0 1\nt 0 0 0 1")
            .unwrap_err();
        assert!(err.is_semantic());
        assert!(err.to_string().contains("discount must be < 1"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_mdp::<f64>("mdp\nstates 1\n# note\nactions x\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::Syntax {
                line: 4,
                message: "expected a non-negative integer, found `x`".into()
            }
        );
        let err = parse_mdp::<f64>("mdp\nstates 1\nactions 1\ndiscount 0.5\nbogus 1").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 5, .. }));
    }

    #[test]
    fn unknown_tag_is_reported() {
        assert_eq!(
            parse_model::<f64>("pomdp\n").unwrap_err(),
            ParseError::UnknownFormat("pomdp".into())
        );
    }

    #[test]
    fn sparse_rows_serialize_without_zero_entries() {
        let m = ExplicitMdp::new(
            3,
            1,
            0.5,
            vec![0.0, 1.0, 2.0],
            vec![vec![vec![(2, 1.0)], vec![(0, 0.25), (1, 0.75)], vec![(2, 1.0)]]],
        );
        let text = serialize_mdp(&m);
        assert_eq!(
            text,
            "mdp\nstates 3\nactions 1\ndiscount 0.5\nreward 0 0\nreward 1 1\nreward 2 2\n\
             t 0 0 2 1\nt 0 1 0 0.25\nt 0 1 1 0.75\nt 0 2 2 1\n"
        );
        assert_eq!(parse_mdp::<f64>(&text).unwrap(), m);
    }

    #[test]
    fn point_bmdp_writes_equal_bounds() {
        let b = Bmdp::new(
            1,
            1,
            0.5,
            vec![Interval::point(0.5)],
            vec![vec![vec![(0, Interval::point(1.0))]]],
        );
        let text = serialize_bmdp(&b);
        assert!(text.contains("reward 0 0.5 0.5\n"));
        assert!(text.contains("t 0 0 0 1 1\n"));
        assert_eq!(parse_bmdp::<f64>(&text).unwrap(), b);
    }

    #[test]
    fn fmdp_round_trip() {
        let text = "fmdp\nvars P Q\nactions go stay\ndiscount 0.9\n\
                    cpt go P (if Q (leaf 0.8) (leaf 0))\ncpt go Q (leaf 0.5)\n\
                    cpt stay P (if P (leaf 1) (leaf 0))\ncpt stay Q (if Q (leaf 1) (leaf 0))\n\
                    reward (if P (leaf 1) (leaf 0))\n";
        let f: FactoredMdp<f64> = parse_fmdp(text).unwrap();
        assert_eq!(f.parents(0, 0), vec![1]);
        let canonical = serialize_fmdp(&f);
        assert!(canonical.contains("cpt go P (if Q (leaf 0.80000000000000004) (leaf 0))\n"));
        assert_eq!(parse_fmdp::<f64>(&canonical).unwrap(), f);
        assert_eq!(serialize_fmdp(&parse_fmdp::<f64>(&canonical).unwrap()), canonical);
    }

    #[test]
    fn fmdp_missing_cpt_is_semantic() {
        let err = parse_fmdp::<f64>("fmdp\nvars P\nactions a\ndiscount 0.5\nreward (leaf 0)\n")
            .unwrap_err();
        assert!(err.is_semantic());
        let err = parse_fmdp::<f64>("fmdp\nvars P\nactions a\ndiscount 0.5\ncpt a P (leaf 0.5\n")
            .unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 5, .. }));
    }

    #[test]
    fn partition_formats() {
        let text = "partition\nstates 3\nblock 0 : 0 2\nblock 1 : 1\n";
        let p = parse_partition(text).unwrap();
        assert_eq!(serialize_partition(&p), text);
        let text = "partition\nvars P Q\nblock 0 : P & !Q | Q\nblock 1 : !P & !Q\n";
        let p = parse_partition(text).unwrap();
        assert_eq!(serialize_partition(&p), text);
        let text = "partition\nvars P\nblock 0 : true\n";
        assert_eq!(serialize_partition(&parse_partition(text).unwrap()), text);
        assert!(parse_partition("partition\nstates 3\nblock 0 : 0 1\n")
            .unwrap_err()
            .is_semantic());
    }

    #[test]
    fn reals_use_seventeen_significant_digits() {
        assert_eq!(format_real(0.9, 17), "0.90000000000000002");
        assert_eq!(format_real(10.0, 17), "10");
        assert_eq!(format_real(-2.5e-7, 17), "-2.4999999999999999e-07");
        assert_eq!(format_real(1e20, 17), "1e+20");
        assert_eq!(format_real(0.001, 17), "0.001");
        assert_eq!(format_real(9.999999999, 10), "9.999999999");
        assert_eq!(format_real(9.9999999999, 10), "10");
    }

    proptest! {
        #[test]
        fn reals_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = format_real(x, 17);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
