//! The s-expression logical-form language.
//!
//! ```text
//! expr  := entity | literal | class
//!        | (AND expr expr) | (JOIN relx expr) | (COUNT expr)
//!        | (ARGMIN expr rel) | (ARGMAX expr rel) | (cmp rel literal)
//! relx  := rel | (R rel)
//! cmp   := lt | le | gt | ge
//! ```
//!
//! Bare symbols are told apart lexically: a symbol is a class when it
//! contains a `.` and the part before the first `.` is at least two
//! characters long (`measurement_unit.measurement_system`, `sf.engine`);
//! every other symbol is an entity id (`m.01p5ld`, `e1`). `COUNT` may only
//! appear at the root.

mod parse;
mod validate;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kb::{EntityId, Literal};

pub use parse::{is_literal_text, is_plain_symbol, parse, ParseError, ParseErrorKind};
pub use validate::{schema_names, validate_schema, SchemaViolation};

/// Operator heads accepted by the parser.
pub const OPERATORS: [&str; 10] = ["AND", "JOIN", "R", "COUNT", "ARGMIN", "ARGMAX", "lt", "le", "gt", "ge"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 4] = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    pub fn from_head(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.as_str() == s)
    }

    /// Whether `ord` (store value compared with the operand) satisfies the
    /// operator.
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }

    pub fn sparql_symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Relation position of a JOIN: forward, or reversed with `(R rel)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RelationRef {
    Forward(String),
    Reverse(String),
}

impl RelationRef {
    pub fn name(&self) -> &str {
        match self {
            RelationRef::Forward(r) | RelationRef::Reverse(r) => r,
        }
    }
}

impl fmt::Display for RelationRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationRef::Forward(r) => f.write_str(r),
            RelationRef::Reverse(r) => write!(f, "(R {r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LogicalForm {
    Entity(EntityId),
    Literal(Literal),
    Class(String),
    And(Box<LogicalForm>, Box<LogicalForm>),
    Join(RelationRef, Box<LogicalForm>),
    Count(Box<LogicalForm>),
    ArgMin(Box<LogicalForm>, String),
    ArgMax(Box<LogicalForm>, String),
    Compare(CmpOp, String, Literal),
}

/// Function taxonomy of a logical form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FunctionClass {
    None,
    Count,
    Comparative,
    Superlative,
}

impl fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FunctionClass::None => "none",
            FunctionClass::Count => "count",
            FunctionClass::Comparative => "comparative",
            FunctionClass::Superlative => "superlative",
        })
    }
}

/// Whether a bare symbol denotes a class rather than an entity.
pub fn is_class_symbol(s: &str) -> bool {
    s.find('.').is_some_and(|dot| s[..dot].chars().count() >= 2)
}

impl LogicalForm {
    pub fn entity(id: &str) -> Self {
        LogicalForm::Entity(EntityId::new(id))
    }

    pub fn class(name: &str) -> Self {
        LogicalForm::Class(name.to_string())
    }

    pub fn and(a: LogicalForm, b: LogicalForm) -> Self {
        LogicalForm::And(Box::new(a), Box::new(b))
    }

    pub fn join(relation: &str, sub: LogicalForm) -> Self {
        LogicalForm::Join(RelationRef::Forward(relation.to_string()), Box::new(sub))
    }

    pub fn join_reverse(relation: &str, sub: LogicalForm) -> Self {
        LogicalForm::Join(RelationRef::Reverse(relation.to_string()), Box::new(sub))
    }

    pub fn count(sub: LogicalForm) -> Self {
        LogicalForm::Count(Box::new(sub))
    }

    pub fn argmin(sub: LogicalForm, relation: &str) -> Self {
        LogicalForm::ArgMin(Box::new(sub), relation.to_string())
    }

    pub fn argmax(sub: LogicalForm, relation: &str) -> Self {
        LogicalForm::ArgMax(Box::new(sub), relation.to_string())
    }

    pub fn compare(op: CmpOp, relation: &str, value: Literal) -> Self {
        LogicalForm::Compare(op, relation.to_string(), value)
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, LogicalForm::Entity(_) | LogicalForm::Literal(_) | LogicalForm::Class(_))
    }

    pub fn children(&self) -> Vec<&LogicalForm> {
        match self {
            LogicalForm::Entity(_) | LogicalForm::Literal(_) | LogicalForm::Class(_) | LogicalForm::Compare(..) => vec![],
            LogicalForm::And(a, b) => vec![a, b],
            LogicalForm::Join(_, x) | LogicalForm::Count(x) | LogicalForm::ArgMin(x, _) | LogicalForm::ArgMax(x, _) => {
                vec![x]
            }
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a LogicalForm)) {
        visit(self);
        for c in self.children() {
            c.walk(visit);
        }
    }

    /// Relation names in pre-order, one entry per occurrence.
    pub fn relations(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| match n {
            LogicalForm::Join(r, _) => out.push(r.name()),
            LogicalForm::ArgMin(_, r) | LogicalForm::ArgMax(_, r) | LogicalForm::Compare(_, r, _) => out.push(r),
            _ => {}
        });
        out
    }

    pub fn classes(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let LogicalForm::Class(c) = n {
                out.push(c.as_str());
            }
        });
        out
    }

    pub fn entities(&self) -> Vec<&EntityId> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let LogicalForm::Entity(e) = n {
                out.push(e);
            }
        });
        out
    }

    pub fn literals(&self) -> Vec<&Literal> {
        let mut out = Vec::new();
        self.walk(&mut |n| match n {
            LogicalForm::Literal(l) | LogicalForm::Compare(_, _, l) => out.push(l),
            _ => {}
        });
        out
    }

    pub fn relation_count(&self) -> usize {
        self.relations().len()
    }

    pub fn function_class(&self) -> FunctionClass {
        let mut superlative = false;
        let mut comparative = false;
        self.walk(&mut |n| match n {
            LogicalForm::ArgMin(..) | LogicalForm::ArgMax(..) => superlative = true,
            LogicalForm::Compare(..) => comparative = true,
            _ => {}
        });
        if superlative {
            FunctionClass::Superlative
        } else if comparative {
            FunctionClass::Comparative
        } else if matches!(self, LogicalForm::Count(_)) {
            FunctionClass::Count
        } else {
            FunctionClass::None
        }
    }

    /// Number of JOIN steps on the longest path from the root.
    pub fn hop_count(&self) -> usize {
        let own = usize::from(matches!(self, LogicalForm::Join(..)));
        own + self.children().into_iter().map(LogicalForm::hop_count).max().unwrap_or(0)
    }

    /// Sorts the two arguments of every AND: atoms before compound forms,
    /// then by canonical print. Idempotent.
    pub fn canonicalize(&self) -> LogicalForm {
        match self {
            LogicalForm::And(a, b) => {
                let (a, b) = (a.canonicalize(), b.canonicalize());
                let (ka, kb) = ((!a.is_atom(), a.to_string()), (!b.is_atom(), b.to_string()));
                if kb < ka {
                    LogicalForm::and(b, a)
                } else {
                    LogicalForm::and(a, b)
                }
            }
            LogicalForm::Join(r, x) => LogicalForm::Join(r.clone(), Box::new(x.canonicalize())),
            LogicalForm::Count(x) => LogicalForm::count(x.canonicalize()),
            LogicalForm::ArgMin(x, r) => LogicalForm::ArgMin(Box::new(x.canonicalize()), r.clone()),
            LogicalForm::ArgMax(x, r) => LogicalForm::ArgMax(Box::new(x.canonicalize()), r.clone()),
            leaf => leaf.clone(),
        }
    }

    /// Deterministic text of the canonical form.
    pub fn print_canonical(&self) -> String {
        self.canonicalize().to_string()
    }
}

impl fmt::Display for LogicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicalForm::Entity(e) => write!(f, "{e}"),
            LogicalForm::Literal(l) => write!(f, "{l}"),
            LogicalForm::Class(c) => f.write_str(c),
            LogicalForm::And(a, b) => write!(f, "(AND {a} {b})"),
            LogicalForm::Join(r, x) => write!(f, "(JOIN {r} {x})"),
            LogicalForm::Count(x) => write!(f, "(COUNT {x})"),
            LogicalForm::ArgMin(x, r) => write!(f, "(ARGMIN {x} {r})"),
            LogicalForm::ArgMax(x, r) => write!(f, "(ARGMAX {x} {r})"),
            LogicalForm::Compare(op, r, v) => write!(f, "({} {r} {v})", op.as_str()),
        }
    }
}

impl std::str::FromStr for LogicalForm {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
