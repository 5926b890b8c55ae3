use std::collections::BTreeSet;
use std::fmt;

use super::LogicalForm;
use crate::kb::{SchemaKind, TripleStore};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SchemaViolation {
    UnknownClass(String),
    UnknownRelation(String),
    /// The name exists in the catalog with the other kind.
    WrongKind { name: String, expected: SchemaKind },
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaViolation::UnknownClass(c) => write!(f, "unknown class `{c}`"),
            SchemaViolation::UnknownRelation(r) => write!(f, "unknown relation `{r}`"),
            SchemaViolation::WrongKind { name, expected } => write!(f, "`{name}` is not a {expected}"),
        }
    }
}

/// Every class and relation name in `lf`, with the kind its position needs.
pub fn schema_names(lf: &LogicalForm) -> BTreeSet<(SchemaKind, String)> {
    let mut out: BTreeSet<(SchemaKind, String)> =
        lf.classes().into_iter().map(|c| (SchemaKind::Class, c.to_string())).collect();
    out.extend(lf.relations().into_iter().map(|r| (SchemaKind::Relation, r.to_string())));
    out
}

/// Lists schema names of `lf` missing from the catalog or present with the
/// wrong kind, one violation per distinct name. Entities are not checked.
pub fn validate_schema(lf: &LogicalForm, store: &TripleStore) -> Vec<SchemaViolation> {
    schema_names(lf)
        .into_iter()
        .filter_map(|(kind, name)| match store.schema_item(&name) {
            Some(item) if item.kind == kind => None,
            Some(_) => Some(SchemaViolation::WrongKind { name, expected: kind }),
            None => Some(match kind {
                SchemaKind::Class => SchemaViolation::UnknownClass(name),
                SchemaKind::Relation => SchemaViolation::UnknownRelation(name),
            }),
        })
        .collect()
}
