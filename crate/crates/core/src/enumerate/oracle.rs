use std::collections::{BTreeMap, BTreeSet};

use super::{finish, EnumConfig, StartPoint};
use crate::kb::{Node, TripleStore};
use crate::sexpr::LogicalForm;

/// One step of a walk: the relation and whether it was followed from
/// object to subject (`true`) or subject to object.
type Step = (String, bool);

/// Reference enumeration by unrestricted walks over the flat triple list,
/// without the store indexes. Walks are grouped by their relation sequence,
/// then turned into forms with the same output policy as
/// [`super::enumerate_elfs`].
pub fn completeness_oracle(starts: &[StartPoint], store: &TripleStore, cfg: &EnumConfig) -> Vec<LogicalForm> {
    let triples = store.triples();
    let type_rel = store.type_relation();
    let mut walks: BTreeMap<(StartPoint, Vec<Step>), BTreeSet<Node>> = BTreeMap::new();

    for start in starts {
        let mut frontier: Vec<(Vec<Step>, Node)> = vec![(Vec::new(), start.node())];
        for _ in 0..cfg.hop_limit() {
            let mut next = Vec::new();
            for (path, node) in &frontier {
                for t in triples.iter().filter(|t| t.relation != type_rel) {
                    let subject = Node::Entity(t.subject.clone());
                    if &t.object == node {
                        let mut p = path.clone();
                        p.push((t.relation.clone(), true));
                        next.push((p, subject.clone()));
                    }
                    if &subject == node {
                        let mut p = path.clone();
                        p.push((t.relation.clone(), false));
                        next.push((p, t.object.clone()));
                    }
                }
            }
            for (path, end) in &next {
                walks.entry((start.clone(), path.clone())).or_default().insert(end.clone());
            }
            frontier = next;
        }
    }

    let chains = walks
        .into_iter()
        .map(|((start, path), ends)| {
            let form = path.iter().fold(start.form(), |inner, (r, backward)| {
                if *backward {
                    LogicalForm::join(r, inner)
                } else {
                    LogicalForm::join_reverse(r, inner)
                }
            });
            (form, ends)
        })
        .collect();

    let classes_of = |answers: &BTreeSet<Node>| {
        let mut out: BTreeMap<String, BTreeSet<Node>> = BTreeMap::new();
        for t in triples.iter().filter(|t| t.relation == type_rel) {
            let member = Node::Entity(t.subject.clone());
            if let (true, Node::Entity(class)) = (answers.contains(&member), &t.object) {
                out.entry(class.as_str().to_string()).or_default().insert(member);
            }
        }
        out
    };
    finish(chains, classes_of, cfg).into_iter().map(|c| c.form).collect()
}
