//! Evaluation of logical forms over a [`TripleStore`], compilation to
//! SPARQL, and a small SPARQL evaluator for the compiled subset.
//!
//! Denotations:
//!
//! | form              | denotation                                              |
//! |-------------------|---------------------------------------------------------|
//! | `e`, literal `v`  | `{e}`, `{v}`                                            |
//! | class `c`         | instances of `c` through the type relation              |
//! | `(JOIN r X)`      | `{s : (s, r, o), o ∈ ⟦X⟧}`                               |
//! | `(JOIN (R r) X)`  | `{o : (s, r, o), s ∈ ⟦X⟧}`                               |
//! | `(AND a b)`       | `⟦a⟧ ∩ ⟦b⟧`                                              |
//! | `(cmp r v)`       | `{s : (s, r, o), o cmp v}` for comparable literals `o`   |
//! | `(COUNT X)`       | `|⟦X⟧|`                                                 |
//! | `(ARGMIN X r)`    | members of `⟦X⟧` whose least `r` value is the least overall |
//!
//! Superlatives return every tied member. Values that are not numbers or
//! dates are ignored by superlatives and comparisons.

mod sparql;
mod sparql_eval;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::kb::{Literal, Node, Scalar, TripleStore};
use crate::sexpr::{self, LogicalForm, RelationRef, SchemaViolation};

pub use sparql::{compile_sparql, QueryShape, SparqlCompiler, SparqlQuery};
pub use sparql_eval::{evaluate_sparql_subset, SparqlError};

/// Result of evaluating a logical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerSet {
    /// Entities or literals.
    Nodes(BTreeSet<Node>),
    Number(u64),
}

impl AnswerSet {
    pub fn empty() -> Self {
        AnswerSet::Nodes(BTreeSet::new())
    }

    pub fn nodes(&self) -> Option<&BTreeSet<Node>> {
        match self {
            AnswerSet::Nodes(n) => Some(n),
            AnswerSet::Number(_) => None,
        }
    }

    /// A number, or a non-empty node set.
    pub fn is_answer(&self) -> bool {
        match self {
            AnswerSet::Nodes(n) => !n.is_empty(),
            AnswerSet::Number(_) => true,
        }
    }

    /// Answers as strings: entity ids, literal values, or the count.
    pub fn answer_strings(&self) -> BTreeSet<String> {
        match self {
            AnswerSet::Nodes(n) => n.iter().map(Node::answer_string).collect(),
            AnswerSet::Number(k) => BTreeSet::from([k.to_string()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("COUNT is only allowed at the root")]
    NestedCount,
    #[error("comparison operand `{0}` is not numeric or a date")]
    NotComparable(String),
}

/// Evaluates `lf` over `store`.
pub fn evaluate(lf: &LogicalForm, store: &TripleStore) -> Result<AnswerSet, ExecError> {
    match lf {
        LogicalForm::Count(x) => Ok(AnswerSet::Number(eval_set(x, store)?.len() as u64)),
        other => Ok(AnswerSet::Nodes(eval_set(other, store)?)),
    }
}

fn eval_set(lf: &LogicalForm, store: &TripleStore) -> Result<BTreeSet<Node>, ExecError> {
    Ok(match lf {
        LogicalForm::Entity(e) => BTreeSet::from([Node::Entity(e.clone())]),
        LogicalForm::Literal(l) => BTreeSet::from([Node::Literal(l.clone())]),
        LogicalForm::Class(c) => store.instances_of(c).into_iter().map(Node::Entity).collect(),
        LogicalForm::And(a, b) => {
            let a = eval_set(a, store)?;
            if a.is_empty() {
                return Ok(a);
            }
            let b = eval_set(b, store)?;
            a.intersection(&b).cloned().collect()
        }
        LogicalForm::Join(RelationRef::Forward(r), x) => {
            let objects = eval_set(x, store)?;
            let pairs = store.relation_pairs(r);
            if objects.len() <= pairs.len() {
                objects
                    .iter()
                    .filter_map(|o| store.in_edges(o).and_then(|adj| adj.get(r)))
                    .flatten()
                    .map(|s| Node::Entity(s.clone()))
                    .collect()
            } else {
                pairs.iter().filter(|(_, o)| objects.contains(o)).map(|(s, _)| Node::Entity(s.clone())).collect()
            }
        }
        LogicalForm::Join(RelationRef::Reverse(r), x) => {
            let subjects = eval_set(x, store)?;
            let pairs = store.relation_pairs(r);
            if subjects.len() <= pairs.len() {
                subjects
                    .iter()
                    .filter_map(Node::as_entity)
                    .filter_map(|s| store.out_edges(s).and_then(|adj| adj.get(r)))
                    .flatten()
                    .cloned()
                    .collect()
            } else {
                pairs
                    .iter()
                    .filter(|(s, _)| subjects.contains(&Node::Entity(s.clone())))
                    .map(|(_, o)| o.clone())
                    .collect()
            }
        }
        LogicalForm::Compare(op, r, v) => {
            let bound = v.scalar().ok_or_else(|| ExecError::NotComparable(v.to_string()))?;
            store
                .relation_pairs(r)
                .iter()
                .filter(|(_, o)| {
                    o.as_literal()
                        .and_then(Literal::scalar)
                        .and_then(|s| s.compare(&bound))
                        .is_some_and(|ord| op.holds(ord))
                })
                .map(|(s, _)| Node::Entity(s.clone()))
                .collect()
        }
        LogicalForm::ArgMin(x, r) => superlative(&eval_set(x, store)?, r, store, false),
        LogicalForm::ArgMax(x, r) => superlative(&eval_set(x, store)?, r, store, true),
        LogicalForm::Count(_) => return Err(ExecError::NestedCount),
    })
}

fn superlative(members: &BTreeSet<Node>, r: &str, store: &TripleStore, max: bool) -> BTreeSet<Node> {
    let better = |a: &Scalar<'_>, b: &Scalar<'_>| if max { a > b } else { a < b };
    let mut best: Option<Scalar<'_>> = None;
    let mut winners = BTreeSet::new();
    for node in members {
        let Some(values) = node.as_entity().and_then(|e| store.out_edges(e)).and_then(|adj| adj.get(r)) else {
            continue;
        };
        let own = values
            .iter()
            .filter_map(|o| o.as_literal().and_then(Literal::scalar))
            .reduce(|a, b| if better(&b, &a) { b } else { a });
        let Some(own) = own else { continue };
        match &best {
            Some(b) if better(b, &own) => {}
            Some(b) if !better(&own, b) => {
                winners.insert(node.clone());
            }
            _ => {
                best = Some(own);
                winners.clear();
                winners.insert(node.clone());
            }
        }
    }
    winners
}

/// Why a candidate prediction was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Invalid {
    #[error("parse error: {0}")]
    Parse(#[from] sexpr::ParseError),
    #[error("schema violations: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))]
    Schema(Vec<SchemaViolation>),
    #[error("execution error: {0}")]
    Exec(#[from] ExecError),
    #[error("empty answer")]
    Empty,
}

/// Checks a parsed form: it must validate against the catalog, execute and
/// yield a number or a non-empty set.
pub fn check_prediction(lf: &LogicalForm, store: &TripleStore) -> Result<AnswerSet, Invalid> {
    let violations = sexpr::validate_schema(lf, store);
    if !violations.is_empty() {
        return Err(Invalid::Schema(violations));
    }
    let answer = evaluate(lf, store)?;
    if answer.is_answer() {
        Ok(answer)
    } else {
        Err(Invalid::Empty)
    }
}

/// [`check_prediction`] on text.
pub fn check_prediction_text(text: &str, store: &TripleStore) -> Result<(LogicalForm, AnswerSet), Invalid> {
    let lf = sexpr::parse(text)?;
    let answer = check_prediction(&lf, store)?;
    Ok((lf, answer))
}

pub fn is_valid_prediction(lf: &LogicalForm, store: &TripleStore) -> bool {
    check_prediction(lf, store).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy_kb;
    use crate::kb::{EntityId, StoreBuilder, Triple};
    use crate::sexpr::parse;

    fn ents(ids: &[&str]) -> AnswerSet {
        AnswerSet::Nodes(ids.iter().map(|i| Node::entity(i)).collect())
    }

    fn eval(s: &str) -> AnswerSet {
        evaluate(&parse(s).unwrap(), &toy_kb()).unwrap()
    }

    /// Independent reading of the denotation table by scanning every
    /// entity of the fixture.
    fn brute_force_case_one(kb: &TripleStore) -> AnswerSet {
        let nodes = kb
            .entities()
            .iter()
            .filter(|e| {
                kb.triples().iter().any(|t| &t.subject == *e && t.relation == "type_rel" && t.object == Node::entity("ms.system"))
                    && kb.triples().iter().any(|t| &t.subject == *e && t.relation == "ms.length_units" && t.object == Node::entity("e1"))
            })
            .map(|e| Node::Entity(e.clone()))
            .collect();
        AnswerSet::Nodes(nodes)
    }

    #[test]
    fn class_and_join() {
        assert_eq!(eval("(AND ms.system (JOIN ms.length_units e1))"), brute_force_case_one(&toy_kb()));
        assert_eq!(eval("(AND ms.system (JOIN ms.length_units e1))"), ents(&["sys1"]));
    }

    #[test]
    fn comparative_with_oxidizer() {
        assert_eq!(eval("(AND sf.engine (AND (JOIN sf.oxidizer ox1) (lt sf.chamber_pressure 257.0^^float)))"), ents(&["eng1"]));
        assert_eq!(eval("(gt sf.chamber_pressure 100)"), ents(&["eng2"]));
        assert_eq!(eval("(ge sf.chamber_pressure 100^^integer)"), ents(&["eng1", "eng2"]));
    }

    #[test]
    fn count_and_superlatives() {
        assert_eq!(eval("(COUNT sf.engine)"), AnswerSet::Number(2));
        assert_eq!(eval("(ARGMIN sf.engine sf.chamber_pressure)"), ents(&["eng1"]));
        assert_eq!(eval("(ARGMAX sf.engine sf.chamber_pressure)"), ents(&["eng2"]));
    }

    #[test]
    fn reverse_join_reaches_literals() {
        let lit = Literal::tagged_float(100.0, "float").unwrap();
        assert_eq!(eval("(JOIN (R sf.chamber_pressure) eng1)"), AnswerSet::Nodes(BTreeSet::from([Node::Literal(lit)])));
        assert_eq!(eval("(JOIN sf.chamber_pressure 100.0^^float)"), ents(&["eng1"]));
    }

    #[test]
    fn empty_results() {
        assert_eq!(eval("(JOIN sf.oxidizer eng2)"), AnswerSet::empty());
        assert_eq!(eval("(JOIN sf.oxidizer nobody)"), AnswerSet::empty());
    }

    #[test]
    fn superlative_ties_and_multi_values() {
        let mut b = StoreBuilder::new();
        for (s, v) in [("a", 1.0), ("a", 9.0), ("b", 1.0), ("c", 5.0)] {
            b.add_triple(Triple::new(s, "num.v", Node::Literal(Literal::float(v).unwrap()))).unwrap();
        }
        for s in ["a", "b", "c", "d"] {
            b.add_triple(Triple::new(s, "type_rel", Node::entity("cls.x"))).unwrap();
        }
        let kb = b.freeze();
        let run = |s: &str| evaluate(&parse(s).unwrap(), &kb).unwrap();
        assert_eq!(run("(ARGMIN cls.x num.v)"), ents(&["a", "b"]));
        assert_eq!(run("(ARGMAX cls.x num.v)"), ents(&["a"]));
        assert_eq!(run("(ARGMAX d num.v)"), AnswerSet::empty());
    }

    #[test]
    fn nested_count_is_an_error() {
        let lf = LogicalForm::and(LogicalForm::class("sf.engine"), LogicalForm::count(LogicalForm::class("sf.engine")));
        assert_eq!(evaluate(&lf, &toy_kb()), Err(ExecError::NestedCount));
        let lf = LogicalForm::compare(sexpr::CmpOp::Lt, "sf.chamber_pressure", Literal::string("x"));
        assert!(matches!(evaluate(&lf, &toy_kb()), Err(ExecError::NotComparable(_))));
    }

    #[test]
    fn prediction_validity() {
        let kb = toy_kb();
        assert!(is_valid_prediction(&parse("(AND ms.system (JOIN ms.length_units e1))").unwrap(), &kb));
        assert!(!is_valid_prediction(&parse("(AND ms.system_unit (JOIN ms.length_units e1))").unwrap(), &kb));
        assert!(!is_valid_prediction(&parse("(JOIN sf.oxidizer eng2)").unwrap(), &kb));
        assert!(is_valid_prediction(&parse("(COUNT (JOIN sf.oxidizer eng2))").unwrap(), &kb));
        assert!(matches!(check_prediction_text("(JOIN", &kb), Err(Invalid::Parse(_))));
        assert_eq!(ents(&["x"]).answer_strings(), BTreeSet::from(["x".to_string()]));
        let _ = EntityId::new("x");
    }
}
