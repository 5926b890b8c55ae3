//! Candidate logical forms from the neighbourhood of linked entities and
//! question literals.
//!
//! Every path of one or two edges leaving a start point becomes a chain of
//! JOINs; an edge followed from object to subject reads `(JOIN r X)` and an
//! edge followed from subject to object reads `(JOIN (R r) X)`. Each chain may
//! also be wrapped as `(AND c F)` for every class `c` that has a member in
//! its denotation. The type relation is not walked.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::kb::{EntityId, Literal, Node, TripleStore};
use crate::sexpr::LogicalForm;

pub use oracle::completeness_oracle;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StartPoint {
    Entity(EntityId),
    Literal(Literal),
}

impl StartPoint {
    pub fn node(&self) -> Node {
        match self {
            StartPoint::Entity(e) => Node::Entity(e.clone()),
            StartPoint::Literal(l) => Node::Literal(l.clone()),
        }
    }

    pub fn form(&self) -> LogicalForm {
        match self {
            StartPoint::Entity(e) => LogicalForm::Entity(e.clone()),
            StartPoint::Literal(l) => LogicalForm::Literal(l.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumError {
    #[error("hop limit must be 1 or 2, got {0}")]
    HopLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumConfig {
    hop_limit: usize,
    pub include_class_constraint: bool,
    pub max_candidates: usize,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig { hop_limit: 2, include_class_constraint: true, max_candidates: 2000 }
    }
}

impl EnumConfig {
    pub fn new(hop_limit: usize) -> Result<Self, EnumError> {
        if !(1..=2).contains(&hop_limit) {
            return Err(EnumError::HopLimit(hop_limit));
        }
        Ok(EnumConfig { hop_limit, ..Default::default() })
    }

    pub fn hop_limit(&self) -> usize {
        self.hop_limit
    }

    pub fn with_class_constraint(mut self, on: bool) -> Self {
        self.include_class_constraint = on;
        self
    }

    pub fn with_max_candidates(mut self, cap: usize) -> Self {
        self.max_candidates = cap;
        self
    }
}

/// An enumerated form with its denotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub form: LogicalForm,
    pub answers: BTreeSet<Node>,
}

/// Wraps, dedupes, orders and truncates raw JOIN chains. Shared with the
/// oracle so that both apply the same output policy.
pub(crate) fn finish(
    chains: Vec<(LogicalForm, BTreeSet<Node>)>,
    classes_of: impl Fn(&BTreeSet<Node>) -> BTreeMap<String, BTreeSet<Node>>,
    cfg: &EnumConfig,
) -> Vec<Candidate> {
    let mut by_print: BTreeMap<(usize, String), Candidate> = BTreeMap::new();
    let mut push = |form: LogicalForm, answers: BTreeSet<Node>| {
        if answers.is_empty() {
            return;
        }
        let form = form.canonicalize();
        let key = (form.relation_count(), form.to_string());
        by_print.entry(key).or_insert(Candidate { form, answers });
    };
    for (form, answers) in chains {
        if cfg.include_class_constraint {
            for (class, members) in classes_of(&answers) {
                push(LogicalForm::and(LogicalForm::Class(class), form.clone()), members);
            }
        }
        push(form, answers);
    }
    by_print.into_values().take(cfg.max_candidates).collect()
}

fn extend(
    store: &TripleStore,
    form: &LogicalForm,
    frontier: &BTreeSet<Node>,
    out: &mut Vec<(LogicalForm, BTreeSet<Node>)>,
) {
    let type_rel = store.type_relation();
    let mut forward: BTreeMap<&str, BTreeSet<Node>> = BTreeMap::new();
    let mut reverse: BTreeMap<&str, BTreeSet<Node>> = BTreeMap::new();
    for node in frontier {
        if let Some(adj) = store.in_edges(node) {
            for (r, subjects) in adj.iter().filter(|(r, _)| *r != type_rel) {
                forward.entry(r).or_default().extend(subjects.iter().cloned().map(Node::Entity));
            }
        }
        if let Some(adj) = node.as_entity().and_then(|e| store.out_edges(e)) {
            for (r, objects) in adj.iter().filter(|(r, _)| *r != type_rel) {
                reverse.entry(r).or_default().extend(objects.iter().cloned());
            }
        }
    }
    for (r, d) in forward {
        out.push((LogicalForm::join(r, form.clone()), d));
    }
    for (r, d) in reverse {
        out.push((LogicalForm::join_reverse(r, form.clone()), d));
    }
}

/// Enumerates candidates with their denotations, ordered by relation count
/// then canonical print.
pub fn enumerate_candidates(starts: &[StartPoint], store: &TripleStore, cfg: &EnumConfig) -> Vec<Candidate> {
    let mut chains = Vec::new();
    for start in starts {
        let mut one_hop = Vec::new();
        extend(store, &start.form(), &BTreeSet::from([start.node()]), &mut one_hop);
        if cfg.hop_limit >= 2 {
            for (form, d) in &one_hop {
                extend(store, form, d, &mut chains);
            }
        }
        chains.extend(one_hop);
    }
    let classes_of = |answers: &BTreeSet<Node>| {
        let mut out: BTreeMap<String, BTreeSet<Node>> = BTreeMap::new();
        for node in answers {
            if let Some(types) = node.as_entity().and_then(|e| store.types_of(e)) {
                for c in types {
                    out.entry(c.clone()).or_default().insert(node.clone());
                }
            }
        }
        out
    };
    finish(chains, classes_of, cfg)
}

/// Canonical candidate forms, ordered by relation count then print.
pub fn enumerate_elfs(starts: &[StartPoint], store: &TripleStore, cfg: &EnumConfig) -> Vec<LogicalForm> {
    enumerate_candidates(starts, store, cfg).into_iter().map(|c| c.form).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{evaluate, AnswerSet};
    use crate::fixtures::toy_kb;
    use crate::sexpr::validate_schema;

    fn prints(forms: &[LogicalForm]) -> Vec<String> {
        forms.iter().map(|f| f.to_string()).collect()
    }

    #[test]
    fn entity_start_on_fixture() {
        let kb = toy_kb();
        let out = prints(&enumerate_elfs(&[StartPoint::Entity(EntityId::new("e1"))], &kb, &EnumConfig::default()));
        assert!(out.contains(&"(JOIN ms.length_units e1)".to_string()));
        assert!(out.contains(&"(AND ms.system (JOIN ms.length_units e1))".to_string()));
        assert_eq!(out[0], "(AND ms.system (JOIN ms.length_units e1))");
    }

    #[test]
    fn literal_start_on_fixture() {
        let kb = toy_kb();
        let start = StartPoint::Literal(Literal::tagged_float(100.0, "float").unwrap());
        let forms = enumerate_elfs(&[start], &kb, &EnumConfig::default());
        let target = forms.iter().find(|f| f.to_string() == "(JOIN sf.chamber_pressure 100.0^^float)").unwrap();
        assert_eq!(evaluate(target, &kb).unwrap(), AnswerSet::Nodes(BTreeSet::from([Node::entity("eng1")])));
    }

    #[test]
    fn no_starts_no_forms() {
        assert!(enumerate_elfs(&[], &toy_kb(), &EnumConfig::default()).is_empty());
    }

    #[test]
    fn emitted_forms_are_valid_and_bounded() {
        let kb = toy_kb();
        let starts: Vec<StartPoint> = ["e1", "ox1", "eng1", "sys1"].iter().map(|e| StartPoint::Entity(EntityId::new(*e))).collect();
        let cands = enumerate_candidates(&starts, &kb, &EnumConfig::default());
        assert!(!cands.is_empty());
        let mut seen = BTreeSet::new();
        for c in &cands {
            assert!(validate_schema(&c.form, &kb).is_empty(), "{}", c.form);
            assert!(c.form.relation_count() <= 2);
            assert_eq!(evaluate(&c.form, &kb).unwrap(), AnswerSet::Nodes(c.answers.clone()));
            assert!(!c.answers.is_empty());
            assert!(seen.insert(c.form.to_string()));
            let mentioned = c.form.entities().len();
            assert_eq!(mentioned, 1, "{}", c.form);
        }
    }

    #[test]
    fn truncation_keeps_the_order_prefix() {
        let kb = toy_kb();
        let starts = [StartPoint::Entity(EntityId::new("eng1"))];
        let all = enumerate_elfs(&starts, &kb, &EnumConfig::default());
        let cut = enumerate_elfs(&starts, &kb, &EnumConfig::default().with_max_candidates(3));
        assert_eq!(cut, all[..3]);
    }

    #[test]
    fn hop_limit_is_checked() {
        assert_eq!(EnumConfig::new(3), Err(EnumError::HopLimit(3)));
        assert_eq!(EnumConfig::new(0), Err(EnumError::HopLimit(0)));
        assert_eq!(EnumConfig::new(1).unwrap().hop_limit(), 1);
    }
}
