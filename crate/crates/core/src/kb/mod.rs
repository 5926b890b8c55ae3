//! In-memory knowledge base: triples indexed in both directions, the schema
//! catalog, and entity labels, aliases and popularity.
//!
//! A [`StoreBuilder`] accumulates facts from text sources and is frozen into
//! an immutable [`TripleStore`]. Frozen stores are `Sync` and every query is
//! read-only.

mod ingest;
mod literal;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ingest::{parse_object, TripleFormat};
pub use literal::{format_float, Literal, LiteralError, LiteralKind, Scalar};

use crate::text;

/// Default name of the class-membership relation.
pub const DEFAULT_TYPE_RELATION: &str = "type_rel";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Type { line: usize, source: LiteralError },
    #[error("line {line}: alias `{alias}` refers to unknown entity `{entity}`")]
    UnknownEntity { line: usize, alias: String, entity: String },
    #[error("schema item `{name}` is a {existing} and cannot be used as a {requested}")]
    SchemaConflict { name: String, existing: SchemaKind, requested: SchemaKind },
    #[error("malformed store dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    /// Panics on an empty id.
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        assert!(!id.is_empty(), "entity ids are non-empty");
        EntityId(id)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId::new(s)
    }
}

/// A graph node: an entity (classes are entity-like objects of the type
/// relation) or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Entity(EntityId),
    Literal(Literal),
}

impl Node {
    pub fn entity(id: &str) -> Self {
        Node::Entity(EntityId::new(id))
    }

    pub fn as_entity(&self) -> Option<&EntityId> {
        match self {
            Node::Entity(e) => Some(e),
            Node::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Node::Literal(l) => Some(l),
            Node::Entity(_) => None,
        }
    }

    /// Answer-string form: entity id, or the literal's lexical value.
    pub fn answer_string(&self) -> String {
        match self {
            Node::Entity(e) => e.0.clone(),
            Node::Literal(l) => l.lexical(),
        }
    }
}

/// Entities serialize as their id, literals in their printed form.
impl Serialize for Node {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Entity(e) => f.write_str(e.as_str()),
            Node::Literal(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    Class,
    Relation,
}

impl fmt::Display for SchemaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemaKind::Class => "class",
            SchemaKind::Relation => "relation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaItem {
    pub kind: SchemaKind,
    pub name: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<String>,
}

impl SchemaItem {
    pub fn class(name: &str) -> Self {
        Self::new(SchemaKind::Class, name)
    }

    pub fn relation(name: &str) -> Self {
        Self::new(SchemaKind::Relation, name)
    }

    fn new(kind: SchemaKind, name: &str) -> Self {
        assert!(!name.is_empty(), "schema names are non-empty");
        SchemaItem {
            kind,
            name: name.to_string(),
            label: text::name_words(name).join(" "),
            domain: None,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: String,
    pub object: Node,
}

impl Triple {
    pub fn new(subject: &str, relation: &str, object: Node) -> Self {
        Triple { subject: EntityId::new(subject), relation: relation.to_string(), object }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntityMeta {
    pub label: Option<String>,
    pub aliases: Vec<String>,
    pub popularity: f64,
}

/// What to do with alias rows naming an entity the store has never seen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AliasPolicy {
    #[default]
    WarnAndKeep,
    Strict,
}

/// Accumulates triples, schema and entity metadata before freezing.
#[derive(Debug, Default)]
pub struct StoreBuilder {
    type_relation: String,
    triples: BTreeSet<Triple>,
    catalog: BTreeMap<String, SchemaItem>,
    meta: BTreeMap<EntityId, EntityMeta>,
    aliases: BTreeMap<String, BTreeMap<EntityId, f64>>,
    known: BTreeSet<EntityId>,
}

impl StoreBuilder {
    pub fn new() -> Self {
        Self::with_type_relation(DEFAULT_TYPE_RELATION)
    }

    pub fn with_type_relation(name: &str) -> Self {
        StoreBuilder { type_relation: name.to_string(), ..Default::default() }
    }

    pub fn type_relation(&self) -> &str {
        &self.type_relation
    }

    fn register(&mut self, kind: SchemaKind, name: &str) -> Result<(), KbError> {
        match self.catalog.get(name) {
            Some(item) if item.kind != kind => Err(KbError::SchemaConflict {
                name: name.to_string(),
                existing: item.kind,
                requested: kind,
            }),
            Some(_) => Ok(()),
            None => {
                self.catalog.insert(name.to_string(), SchemaItem::new(kind, name));
                Ok(())
            }
        }
    }

    /// Adds a triple, registering its relation (and, for type triples, the
    /// object class) in the catalog. Duplicates are ignored.
    pub fn add_triple(&mut self, triple: Triple) -> Result<(), KbError> {
        self.register(SchemaKind::Relation, &triple.relation)?;
        if triple.relation == self.type_relation {
            match &triple.object {
                Node::Entity(class) => self.register(SchemaKind::Class, class.as_str())?,
                Node::Literal(l) => {
                    return Err(KbError::Parse {
                        line: 0,
                        message: format!("type relation object must be a class, got literal {l}"),
                    })
                }
            }
        }
        self.known.insert(triple.subject.clone());
        if let (Node::Entity(e), false) = (&triple.object, triple.relation == self.type_relation) {
            self.known.insert(e.clone());
        }
        self.triples.insert(triple);
        Ok(())
    }

    /// Declares or refines a schema item. Domain, range and label replace the
    /// existing values; the kind must not change.
    pub fn add_schema_item(&mut self, item: SchemaItem) -> Result<(), KbError> {
        self.register(item.kind, &item.name)?;
        self.catalog.insert(item.name.clone(), item);
        Ok(())
    }

    pub fn set_label(&mut self, entity: &EntityId, label: &str) {
        self.meta.entry(entity.clone()).or_default().label = Some(label.to_string());
    }

    /// Adds an alias row; popularity must be a finite non-negative number.
    pub fn add_alias(&mut self, alias: &str, entity: &EntityId, popularity: f64) {
        let key = text::normalize(alias);
        if key.is_empty() {
            return;
        }
        let slot = self.aliases.entry(key).or_default().entry(entity.clone()).or_insert(popularity);
        *slot = slot.max(popularity);
        let meta = self.meta.entry(entity.clone()).or_default();
        if !meta.aliases.iter().any(|a| a == alias) {
            meta.aliases.push(alias.to_string());
        }
        meta.popularity = meta.popularity.max(popularity);
    }

    pub fn knows_entity(&self, entity: &EntityId) -> bool {
        self.meta.contains_key(entity) || self.known.contains(entity)
    }

    pub fn freeze(self) -> TripleStore {
        TripleStore::from_parts(self.type_relation, self.triples, self.catalog, self.meta, self.aliases)
    }
}

/// Relation name → set of neighbours.
pub type Adjacency<T> = BTreeMap<String, BTreeSet<T>>;

/// Frozen, indexed knowledge base.
#[derive(Debug, Clone)]
pub struct TripleStore {
    type_relation: String,
    triples: Vec<Triple>,
    spo: HashMap<EntityId, Adjacency<Node>>,
    ops: HashMap<Node, Adjacency<EntityId>>,
    by_relation: HashMap<String, Vec<(EntityId, Node)>>,
    class_members: HashMap<String, BTreeSet<EntityId>>,
    entity_types: HashMap<EntityId, BTreeSet<String>>,
    catalog: BTreeMap<String, SchemaItem>,
    meta: BTreeMap<EntityId, EntityMeta>,
    aliases: HashMap<String, Vec<(EntityId, f64)>>,
    entities: BTreeSet<EntityId>,
}

impl Default for TripleStore {
    fn default() -> Self {
        StoreBuilder::new().freeze()
    }
}

impl TripleStore {
    fn from_parts(
        type_relation: String,
        triples: BTreeSet<Triple>,
        catalog: BTreeMap<String, SchemaItem>,
        meta: BTreeMap<EntityId, EntityMeta>,
        alias_rows: BTreeMap<String, BTreeMap<EntityId, f64>>,
    ) -> Self {
        let mut spo: HashMap<EntityId, Adjacency<Node>> = HashMap::new();
        let mut ops: HashMap<Node, Adjacency<EntityId>> = HashMap::new();
        let mut by_relation: HashMap<String, Vec<(EntityId, Node)>> = HashMap::new();
        let mut class_members: HashMap<String, BTreeSet<EntityId>> = HashMap::new();
        let mut entity_types: HashMap<EntityId, BTreeSet<String>> = HashMap::new();
        let mut entities: BTreeSet<EntityId> = meta.keys().cloned().collect();

        for t in &triples {
            spo.entry(t.subject.clone())
                .or_default()
                .entry(t.relation.clone())
                .or_default()
                .insert(t.object.clone());
            ops.entry(t.object.clone())
                .or_default()
                .entry(t.relation.clone())
                .or_default()
                .insert(t.subject.clone());
            by_relation
                .entry(t.relation.clone())
                .or_default()
                .push((t.subject.clone(), t.object.clone()));
            entities.insert(t.subject.clone());
            if t.relation == type_relation {
                if let Node::Entity(class) = &t.object {
                    class_members.entry(class.0.clone()).or_default().insert(t.subject.clone());
                    entity_types.entry(t.subject.clone()).or_default().insert(class.0.clone());
                }
            } else if let Node::Entity(e) = &t.object {
                entities.insert(e.clone());
            }
        }

        let aliases = alias_rows
            .into_iter()
            .map(|(alias, rows)| {
                let mut list: Vec<(EntityId, f64)> = rows.into_iter().collect();
                // popularity descending, ties by entity id
                list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                (alias, list)
            })
            .collect();

        TripleStore {
            type_relation,
            triples: triples.into_iter().collect(),
            spo,
            ops,
            by_relation,
            class_members,
            entity_types,
            catalog,
            meta,
            aliases,
            entities,
        }
    }

    pub fn type_relation(&self) -> &str {
        &self.type_relation
    }

    /// Triples in sorted order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Every entity that occurs as a subject, as a non-class object, or in the
    /// label/alias metadata.
    pub fn entities(&self) -> &BTreeSet<EntityId> {
        &self.entities
    }

    pub fn contains_entity(&self, e: &EntityId) -> bool {
        self.entities.contains(e)
    }

    /// Outgoing adjacency of `s`, grouped by relation.
    pub fn out_edges(&self, s: &EntityId) -> Option<&Adjacency<Node>> {
        self.spo.get(s)
    }

    /// Incoming adjacency of `o`, grouped by relation.
    pub fn in_edges(&self, o: &Node) -> Option<&Adjacency<EntityId>> {
        self.ops.get(o)
    }

    pub fn neighbors_out(&self, s: &EntityId, relation: Option<&str>) -> BTreeSet<(String, Node)> {
        let Some(adj) = self.spo.get(s) else {
            return BTreeSet::new();
        };
        adj.iter()
            .filter(|(r, _)| relation.is_none_or(|want| want == r.as_str()))
            .flat_map(|(r, objs)| objs.iter().map(move |o| (r.clone(), o.clone())))
            .collect()
    }

    pub fn neighbors_in(&self, o: &Node, relation: Option<&str>) -> BTreeSet<(String, EntityId)> {
        let Some(adj) = self.ops.get(o) else {
            return BTreeSet::new();
        };
        adj.iter()
            .filter(|(r, _)| relation.is_none_or(|want| want == r.as_str()))
            .flat_map(|(r, subs)| subs.iter().map(move |s| (r.clone(), s.clone())))
            .collect()
    }

    /// All `(subject, object)` pairs of one relation, in triple order.
    pub fn relation_pairs(&self, relation: &str) -> &[(EntityId, Node)] {
        self.by_relation.get(relation).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn instances_of(&self, class: &str) -> BTreeSet<EntityId> {
        self.class_members.get(class).cloned().unwrap_or_default()
    }

    pub fn class_members(&self, class: &str) -> Option<&BTreeSet<EntityId>> {
        self.class_members.get(class)
    }

    /// Classes `e` belongs to through the type relation.
    pub fn types_of(&self, e: &EntityId) -> Option<&BTreeSet<String>> {
        self.entity_types.get(e)
    }

    /// Relations incident to `e` in either direction.
    pub fn entity_relations(&self, e: &EntityId) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.spo.get(e).map(|a| a.keys().cloned().collect()).unwrap_or_default();
        if let Some(adj) = self.ops.get(&Node::Entity(e.clone())) {
            out.extend(adj.keys().cloned());
        }
        out
    }

    pub fn catalog(&self) -> &BTreeMap<String, SchemaItem> {
        &self.catalog
    }

    pub fn schema_item(&self, name: &str) -> Option<&SchemaItem> {
        self.catalog.get(name)
    }

    pub fn classes(&self) -> impl Iterator<Item = &SchemaItem> {
        self.catalog.values().filter(|i| i.kind == SchemaKind::Class)
    }

    pub fn relations(&self) -> impl Iterator<Item = &SchemaItem> {
        self.catalog.values().filter(|i| i.kind == SchemaKind::Relation)
    }

    pub fn is_class(&self, name: &str) -> bool {
        self.catalog.get(name).is_some_and(|i| i.kind == SchemaKind::Class)
    }

    pub fn is_relation(&self, name: &str) -> bool {
        self.catalog.get(name).is_some_and(|i| i.kind == SchemaKind::Relation)
    }

    /// Case-folded alias lookup, popularity descending.
    pub fn lookup_alias(&self, alias: &str) -> &[(EntityId, f64)] {
        self.aliases.get(&text::normalize(alias)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Whether some alias normalizes to exactly `normalized`.
    pub fn has_alias_key(&self, normalized: &str) -> bool {
        self.aliases.contains_key(normalized)
    }

    pub fn alias_count(&self) -> usize {
        self.aliases.len()
    }

    pub fn meta(&self, e: &EntityId) -> Option<&EntityMeta> {
        self.meta.get(e)
    }

    /// Human-readable label, falling back to the id.
    pub fn label<'a>(&'a self, e: &'a EntityId) -> &'a str {
        self.meta.get(e).and_then(|m| m.label.as_deref()).unwrap_or(e.as_str())
    }

    pub fn popularity(&self, e: &EntityId) -> f64 {
        self.meta.get(e).map(|m| m.popularity).unwrap_or(0.0)
    }
}
