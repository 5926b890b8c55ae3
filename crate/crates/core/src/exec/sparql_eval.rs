//! Evaluator for the SPARQL subset emitted by the compiler: basic graph
//! patterns, `VALUES` with one variable, `FILTER` with one comparison, and
//! sub-selects projecting a single `MIN`/`MAX`/`COUNT` aggregate. Filters
//! apply at the end of their group. Aggregates skip values that are not
//! numbers or dates, and an aggregate over no values yields no row.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{AnswerSet, SparqlQuery};
use crate::kb::{EntityId, Literal, Node, Scalar, TripleStore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SparqlError {
    #[error("at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported construct `{0}`")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Var(String),
    Iri(String),
    Lit(Literal),
    Word(String),
    Punct(&'static str),
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, SparqlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |offset: usize, message: &str| SparqlError::Syntax { offset, message: message.to_string() };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'?' => {
                i += 1;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                if i == start + 1 {
                    return Err(syntax(start, "empty variable name"));
                }
                out.push((Tok::Var(src[start + 1..i].to_string()), start));
            }
            b'<' if i + 1 < bytes.len() && !matches!(bytes[i + 1], b'=' | b' ' | b'\t' | b'\n') => {
                let end = src[i..].find('>').ok_or_else(|| syntax(start, "unterminated IRI"))? + i;
                let iri = &src[i + 1..end];
                if iri.chars().any(char::is_whitespace) {
                    return Err(syntax(start, "whitespace inside IRI"));
                }
                out.push((Tok::Iri(iri.to_string()), start));
                i = end + 1;
            }
            b'"' => {
                i += 1;
                let mut body = String::new();
                loop {
                    let ch = src[i..].chars().next().ok_or_else(|| syntax(start, "unterminated string"))?;
                    i += ch.len_utf8();
                    match ch {
                        '"' => break,
                        '\\' => {
                            let esc = src[i..].chars().next().ok_or_else(|| syntax(start, "unterminated string"))?;
                            i += esc.len_utf8();
                            body.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                        }
                        ch => body.push(ch),
                    }
                }
                let lit = if src[i..].starts_with("^^<") {
                    let end = src[i..].find('>').ok_or_else(|| syntax(i, "unterminated datatype"))? + i;
                    let tag = &src[i + 3..end];
                    i = end + 1;
                    // same reading as a quoted literal in a logical form
                    Literal::parse(&format!("{}^^{tag}", Literal::string(body)))
                        .map_err(|e| syntax(start, &e.to_string()))?
                } else {
                    Literal::string(body)
                };
                out.push((Tok::Lit(lit), start));
            }
            b'{' | b'}' | b'(' | b')' | b'.' | b',' | b'*' => {
                let p = match c {
                    b'{' => "{",
                    b'}' => "}",
                    b'(' => "(",
                    b')' => ")",
                    b'.' => ".",
                    b',' => ",",
                    _ => "*",
                };
                out.push((Tok::Punct(p), start));
                i += 1;
            }
            b'<' | b'>' | b'=' | b'!' => {
                let two = src.get(i..i + 2).unwrap_or("");
                let (p, len) = match two {
                    "<=" => ("<=", 2),
                    ">=" => (">=", 2),
                    "!=" => ("!=", 2),
                    _ => match c {
                        b'<' => ("<", 1),
                        b'>' => (">", 1),
                        b'=' => ("=", 1),
                        _ => return Err(syntax(start, "unexpected `!`")),
                    },
                };
                out.push((Tok::Punct(p), start));
                i += len;
            }
            _ if c.is_ascii_alphanumeric() || c == b'-' || c == b'+' || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || matches!(bytes[i], b'_' | b'-' | b'+' | b':')) {
                    i += 1;
                }
                // decimal numbers keep their point
                if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() && bytes[start].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                        i += 1;
                    }
                }
                let word = &src[start..i];
                match Literal::parse(word) {
                    Ok(lit) if word.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+') => {
                        out.push((Tok::Lit(lit), start))
                    }
                    _ => out.push((Tok::Word(word.to_string()), start)),
                }
            }
            _ => return Err(syntax(start, "unexpected character")),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Term {
    Var(String),
    Const(Node),
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Agg {
    Min,
    Max,
    Count,
}

#[derive(Debug, Clone)]
enum Projection {
    Vars { distinct: bool, vars: Vec<String> },
    Aggregate { agg: Agg, distinct: bool, var: String, alias: String },
}

#[derive(Debug, Clone)]
enum Element {
    Triple(Term, String, Term),
    Values(String, Vec<Node>),
    Filter(Term, Op, Term),
    Sub(Box<Select>),
}

#[derive(Debug, Clone)]
struct Select {
    projection: Projection,
    group: Vec<Element>,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

const UNSUPPORTED: [&str; 13] = [
    "OPTIONAL", "UNION", "MINUS", "GRAPH", "SERVICE", "BIND", "ORDER", "LIMIT", "OFFSET", "GROUP", "HAVING", "NOT",
    "EXISTS",
];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, SparqlError> {
        Err(SparqlError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn next(&mut self) -> Result<Tok, SparqlError> {
        match self.toks.get(self.pos) {
            Some((t, _)) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.fail("unexpected end of query"),
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x.eq_ignore_ascii_case(w))
    }

    fn expect_word(&mut self, w: &str) -> Result<(), SparqlError> {
        if self.is_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected `{w}`"))
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), SparqlError> {
        match self.peek() {
            Some(Tok::Punct(x)) if *x == p => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(format!("expected `{p}`")),
        }
    }

    fn var(&mut self) -> Result<String, SparqlError> {
        match self.next()? {
            Tok::Var(v) => Ok(v),
            _ => {
                self.pos -= 1;
                self.fail("expected a variable")
            }
        }
    }

    fn check_unsupported(&self) -> Result<(), SparqlError> {
        if let Some(Tok::Word(w)) = self.peek() {
            let upper = w.to_ascii_uppercase();
            if UNSUPPORTED.contains(&upper.as_str()) {
                return Err(SparqlError::Unsupported(upper));
            }
        }
        Ok(())
    }

    fn select(&mut self) -> Result<Select, SparqlError> {
        self.expect_word("SELECT")?;
        let distinct = self.is_word("DISTINCT");
        if distinct {
            self.pos += 1;
        }
        let projection = if matches!(self.peek(), Some(Tok::Punct("("))) {
            self.pos += 1;
            let agg = match self.next()? {
                Tok::Word(w) if w.eq_ignore_ascii_case("MIN") => Agg::Min,
                Tok::Word(w) if w.eq_ignore_ascii_case("MAX") => Agg::Max,
                Tok::Word(w) if w.eq_ignore_ascii_case("COUNT") => Agg::Count,
                Tok::Word(w) => return Err(SparqlError::Unsupported(w)),
                _ => {
                    self.pos -= 1;
                    return self.fail("expected an aggregate");
                }
            };
            self.expect_punct("(")?;
            let inner_distinct = self.is_word("DISTINCT");
            if inner_distinct {
                self.pos += 1;
            }
            let var = self.var()?;
            self.expect_punct(")")?;
            self.expect_word("AS")?;
            let alias = self.var()?;
            self.expect_punct(")")?;
            Projection::Aggregate { agg, distinct: inner_distinct, var, alias }
        } else {
            let mut vars = Vec::new();
            while let Some(Tok::Var(_)) = self.peek() {
                vars.push(self.var()?);
            }
            if vars.is_empty() {
                self.check_unsupported()?;
                return self.fail("expected a projection");
            }
            Projection::Vars { distinct, vars }
        };
        self.expect_word("WHERE")?;
        let group = self.group()?;
        self.check_unsupported()?;
        Ok(Select { projection, group })
    }

    fn term(&mut self) -> Result<Term, SparqlError> {
        match self.next()? {
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Iri(i) => Ok(Term::Const(Node::Entity(EntityId::new(i)))),
            Tok::Lit(l) => Ok(Term::Const(Node::Literal(l))),
            _ => {
                self.pos -= 1;
                self.fail("expected a term")
            }
        }
    }

    fn group(&mut self) -> Result<Vec<Element>, SparqlError> {
        self.expect_punct("{")?;
        let mut elements = Vec::new();
        loop {
            self.check_unsupported()?;
            match self.peek() {
                Some(Tok::Punct("}")) => {
                    self.pos += 1;
                    return Ok(elements);
                }
                Some(Tok::Punct("{")) => {
                    self.pos += 1;
                    if !self.is_word("SELECT") {
                        return Err(SparqlError::Unsupported("nested group".into()));
                    }
                    elements.push(Element::Sub(Box::new(self.select()?)));
                    self.expect_punct("}")?;
                }
                Some(Tok::Word(w)) if w.eq_ignore_ascii_case("VALUES") => {
                    self.pos += 1;
                    let var = self.var()?;
                    self.expect_punct("{")?;
                    let mut nodes = Vec::new();
                    while !matches!(self.peek(), Some(Tok::Punct("}"))) {
                        match self.term()? {
                            Term::Const(n) => nodes.push(n),
                            Term::Var(_) => return self.fail("VALUES takes constants"),
                        }
                    }
                    self.pos += 1;
                    elements.push(Element::Values(var, nodes));
                }
                Some(Tok::Word(w)) if w.eq_ignore_ascii_case("FILTER") => {
                    self.pos += 1;
                    self.expect_punct("(")?;
                    let lhs = self.term()?;
                    let op = match self.next()? {
                        Tok::Punct("=") => Op::Eq,
                        Tok::Punct("!=") => Op::Ne,
                        Tok::Punct("<") => Op::Lt,
                        Tok::Punct("<=") => Op::Le,
                        Tok::Punct(">") => Op::Gt,
                        Tok::Punct(">=") => Op::Ge,
                        Tok::Word(w) => return Err(SparqlError::Unsupported(w)),
                        _ => {
                            self.pos -= 1;
                            return self.fail("expected a comparison operator");
                        }
                    };
                    let rhs = self.term()?;
                    if !matches!(self.peek(), Some(Tok::Punct(")"))) {
                        return Err(SparqlError::Unsupported("compound FILTER expression".into()));
                    }
                    self.pos += 1;
                    elements.push(Element::Filter(lhs, op, rhs));
                }
                Some(Tok::Word(w)) => return Err(SparqlError::Unsupported(w.clone())),
                Some(_) => {
                    let s = self.term()?;
                    let p = match self.next()? {
                        Tok::Iri(p) => p,
                        Tok::Var(_) => return Err(SparqlError::Unsupported("variable predicate".into())),
                        _ => {
                            self.pos -= 1;
                            return self.fail("expected a predicate IRI");
                        }
                    };
                    let o = self.term()?;
                    if let Term::Const(Node::Literal(_)) = s {
                        return self.fail("literal in subject position");
                    }
                    elements.push(Element::Triple(s, p, o));
                    match self.peek() {
                        Some(Tok::Punct(".")) => self.pos += 1,
                        Some(Tok::Punct("}")) => {}
                        _ => return self.fail("expected `.` or `}`"),
                    }
                }
                None => return self.fail("unexpected end of query"),
            }
        }
    }
}

type Row = BTreeMap<String, Node>;

fn value(term: &Term, row: &Row) -> Option<Node> {
    match term {
        Term::Var(v) => row.get(v).cloned(),
        Term::Const(n) => Some(n.clone()),
    }
}

fn scalar(n: &Node) -> Option<Scalar<'_>> {
    n.as_literal().and_then(Literal::scalar)
}

fn filter_holds(lhs: &Node, op: Op, rhs: &Node) -> bool {
    match op {
        Op::Eq | Op::Ne => {
            let same = match (scalar(lhs), scalar(rhs)) {
                (Some(a), Some(b)) => a.compare(&b) == Some(Ordering::Equal),
                _ => lhs == rhs,
            };
            same == matches!(op, Op::Eq)
        }
        _ => {
            let Some(ord) = scalar(lhs).zip(scalar(rhs)).and_then(|(a, b)| a.compare(&b)) else {
                return false;
            };
            match op {
                Op::Lt => ord == Ordering::Less,
                Op::Le => ord != Ordering::Greater,
                Op::Gt => ord == Ordering::Greater,
                _ => ord != Ordering::Less,
            }
        }
    }
}

fn bind(row: &Row, term: &Term, node: &Node) -> Option<Row> {
    match term {
        Term::Const(c) => (c == node).then(|| row.clone()),
        Term::Var(v) => match row.get(v) {
            Some(existing) => (existing == node).then(|| row.clone()),
            None => {
                let mut r = row.clone();
                r.insert(v.clone(), node.clone());
                Some(r)
            }
        },
    }
}

fn match_triple(rows: Vec<Row>, s: &Term, p: &str, o: &Term, store: &TripleStore) -> Vec<Row> {
    let mut out = Vec::new();
    for row in rows {
        let subject = value(s, &row);
        let object = value(o, &row);
        match (&subject, &object) {
            (Some(sn), _) => {
                let Some(objs) = sn.as_entity().and_then(|e| store.out_edges(e)).and_then(|adj| adj.get(p)) else {
                    continue;
                };
                out.extend(objs.iter().filter_map(|obj| bind(&row, o, obj)));
            }
            (None, Some(on)) => {
                let Some(subs) = store.in_edges(on).and_then(|adj| adj.get(p)) else { continue };
                out.extend(subs.iter().filter_map(|sub| bind(&row, s, &Node::Entity(sub.clone()))));
            }
            (None, None) => {
                for (sub, obj) in store.relation_pairs(p) {
                    if let Some(r) = bind(&row, s, &Node::Entity(sub.clone())).and_then(|r| bind(&r, o, obj)) {
                        out.push(r);
                    }
                }
            }
        }
    }
    out
}

fn eval_group(group: &[Element], store: &TripleStore) -> Vec<Row> {
    let mut rows = vec![Row::new()];
    for el in group {
        if rows.is_empty() {
            break;
        }
        rows = match el {
            Element::Triple(s, p, o) => match_triple(rows, s, p, o, store),
            Element::Values(var, nodes) => rows
                .iter()
                .flat_map(|row| nodes.iter().filter_map(|n| bind(row, &Term::Var(var.clone()), n)))
                .collect(),
            Element::Sub(sub) => {
                let sub_rows = eval_select(sub, store);
                rows.iter()
                    .flat_map(|row| {
                        sub_rows.iter().filter_map(|sr| {
                            sr.iter().try_fold(row.clone(), |acc, (k, v)| bind(&acc, &Term::Var(k.clone()), v))
                        })
                    })
                    .collect()
            }
            Element::Filter(..) => rows,
        };
    }
    for el in group {
        if let Element::Filter(lhs, op, rhs) = el {
            rows.retain(|row| match (value(lhs, row), value(rhs, row)) {
                (Some(a), Some(b)) => filter_holds(&a, *op, &b),
                _ => false,
            });
        }
    }
    rows
}

fn eval_select(q: &Select, store: &TripleStore) -> Vec<Row> {
    let rows = eval_group(&q.group, store);
    match &q.projection {
        Projection::Vars { distinct, vars } => {
            let projected = rows.into_iter().map(|r| {
                vars.iter().filter_map(|v| r.get(v).map(|n| (v.clone(), n.clone()))).collect::<Row>()
            });
            if *distinct {
                projected.collect::<BTreeSet<_>>().into_iter().collect()
            } else {
                projected.collect()
            }
        }
        Projection::Aggregate { agg, distinct, var, alias } => {
            let values: Vec<Node> = rows.into_iter().filter_map(|r| r.get(var).cloned()).collect();
            let result = match agg {
                Agg::Count => {
                    let n = if *distinct { values.iter().collect::<BTreeSet<_>>().len() } else { values.len() };
                    Some(Node::Literal(Literal::integer(n as i64)))
                }
                Agg::Min | Agg::Max => values
                    .into_iter()
                    .filter(|n| scalar(n).is_some())
                    .reduce(|a, b| {
                        let (sa, sb) = (scalar(&a), scalar(&b));
                        let b_better = if *agg == Agg::Min { sb < sa } else { sb > sa };
                        if b_better {
                            b
                        } else {
                            a
                        }
                    }),
            };
            result.map(|n| vec![Row::from([(alias.clone(), n)])]).unwrap_or_default()
        }
    }
}

/// Parses and runs a query produced by the compiler.
pub fn evaluate_sparql_subset(q: &SparqlQuery, store: &TripleStore) -> Result<AnswerSet, SparqlError> {
    let toks = lex(&q.text)?;
    let mut parser = Parser { toks, pos: 0, end: q.text.len() };
    let select = parser.select()?;
    if parser.pos != parser.toks.len() {
        return parser.fail("trailing tokens after query");
    }
    let rows = eval_select(&select, store);
    match &select.projection {
        Projection::Vars { vars, .. } => {
            if vars.len() != 1 {
                return Err(SparqlError::Unsupported("multi-variable projection".into()));
            }
            Ok(AnswerSet::Nodes(rows.into_iter().filter_map(|r| r.get(&vars[0]).cloned()).collect()))
        }
        Projection::Aggregate { agg: Agg::Count, alias, .. } => {
            let n = rows
                .first()
                .and_then(|r| r.get(alias))
                .and_then(Node::as_literal)
                .and_then(Literal::as_f64)
                .unwrap_or(0.0);
            Ok(AnswerSet::Number(n as u64))
        }
        Projection::Aggregate { .. } => Err(SparqlError::Unsupported("top-level MIN/MAX".into())),
    }
}
