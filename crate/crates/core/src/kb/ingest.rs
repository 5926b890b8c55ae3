//! Text ingestion (triple TSV, an N-Triples subset, alias/label/schema TSV)
//! and the JSON store dump.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{
    AliasPolicy, EntityId, KbError, Literal, LiteralError, Node, SchemaItem, StoreBuilder,
    Triple, TripleStore,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripleFormat {
    /// `subject \t relation \t object`
    Tsv,
    /// `<s> <p> <o> .` with IRIs reduced to local names.
    NTriples,
}

impl TripleFormat {
    /// Picks the format from a file extension; anything but `.nt` is TSV.
    pub fn from_path(path: &str) -> Self {
        if path.ends_with(".nt") {
            TripleFormat::NTriples
        } else {
            TripleFormat::Tsv
        }
    }
}

fn looks_numeric(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.'))
        && s.parse::<f64>().is_ok_and(f64::is_finite)
}

/// Interprets a TSV object field: quoted or `^^`-tagged text and plain
/// numbers are literals, anything else is an entity id.
pub fn parse_object(field: &str) -> Result<Node, LiteralError> {
    if field.starts_with('"') || field.contains("^^") || looks_numeric(field) {
        Literal::parse(field).map(Node::Literal)
    } else {
        Ok(Node::Entity(EntityId::new(field)))
    }
}

fn is_blank(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn parse_err(line: usize, message: impl Into<String>) -> KbError {
    KbError::Parse { line, message: message.into() }
}

fn check_name(line: usize, what: &str, s: &str) -> Result<(), KbError> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
        return Err(parse_err(line, format!("invalid {what} `{s}`")));
    }
    Ok(())
}

fn local_name(iri: &str) -> &str {
    iri.rsplit(['/', '#']).next().unwrap_or(iri)
}

/// Reads `<iri>` starting at `s` and returns the local name and the rest.
fn take_iri(s: &str, line: usize) -> Result<(&str, &str), KbError> {
    let s = s.trim_start();
    let rest = s.strip_prefix('<').ok_or_else(|| parse_err(line, "expected `<iri>`"))?;
    let end = rest.find('>').ok_or_else(|| parse_err(line, "unterminated IRI"))?;
    let name = local_name(&rest[..end]);
    if name.is_empty() {
        return Err(parse_err(line, "IRI has an empty local name"));
    }
    Ok((name, &rest[end + 1..]))
}

fn parse_nt_line(raw: &str, line: usize) -> Result<Triple, KbError> {
    let (subject, rest) = take_iri(raw, line)?;
    let (relation, rest) = take_iri(rest, line)?;
    let rest = rest.trim_start();
    let (object, rest) = if rest.starts_with('<') {
        let (o, r) = take_iri(rest, line)?;
        (Node::Entity(EntityId::new(o)), r)
    } else if let Some(body) = rest.strip_prefix('"') {
        let mut value = String::new();
        let mut end = None;
        let mut chars = body.char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    end = Some(i + 1);
                    break;
                }
                '\\' => match chars.next() {
                    Some((_, 'n')) => value.push('\n'),
                    Some((_, 't')) => value.push('\t'),
                    Some((_, c)) => value.push(c),
                    None => break,
                },
                c => value.push(c),
            }
        }
        let end = end.ok_or_else(|| parse_err(line, "unterminated literal"))?;
        let after = &body[end..];
        if let Some(dt) = after.strip_prefix("^^") {
            let (tag, r) = take_iri(dt, line)?;
            let lit = if tag == "string" {
                Literal::parse(&format!("\"{}\"^^string", value.replace('\\', "\\\\").replace('"', "\\\"")))
            } else {
                Literal::from_parts(&value, Some(tag))
            }
            .map_err(|source| KbError::Type { line, source })?;
            (Node::Literal(lit), r)
        } else if let Some(lang) = after.strip_prefix('@') {
            let skip = lang.find(|c: char| c.is_whitespace()).unwrap_or(lang.len());
            (Node::Literal(Literal::string(value)), &lang[skip..])
        } else {
            (Node::Literal(Literal::string(value)), after)
        }
    } else if rest.starts_with("_:") {
        return Err(parse_err(line, "blank nodes are not supported"));
    } else {
        return Err(parse_err(line, "expected IRI or literal object"));
    };
    if rest.trim() != "." {
        return Err(parse_err(line, "expected terminating `.`"));
    }
    Ok(Triple { subject: EntityId::new(subject), relation: relation.to_string(), object })
}

fn parse_tsv_line(raw: &str, line: usize) -> Result<Triple, KbError> {
    let fields: Vec<&str> = raw.split('\t').collect();
    if fields.len() != 3 {
        return Err(parse_err(line, format!("expected 3 tab-separated fields, found {}", fields.len())));
    }
    let (s, r, o) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
    check_name(line, "subject", s)?;
    check_name(line, "relation", r)?;
    if o.is_empty() {
        return Err(parse_err(line, "empty object"));
    }
    if looks_numeric(s) || s.starts_with('"') || s.contains("^^") {
        return Err(parse_err(line, format!("subject `{s}` must be an entity")));
    }
    let object = parse_object(o).map_err(|source| KbError::Type { line, source })?;
    Ok(Triple { subject: EntityId::new(s), relation: r.to_string(), object })
}

impl StoreBuilder {
    /// Ingests one triple per line. Blank lines and `#` comments are skipped.
    /// Returns the number of triple lines read.
    pub fn load_triples<R: BufRead>(&mut self, reader: R, format: TripleFormat) -> Result<usize, KbError> {
        let mut n = 0;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if is_blank(&line) {
                continue;
            }
            let raw = line.trim_end_matches('\r');
            let triple = match format {
                TripleFormat::Tsv => parse_tsv_line(raw, line_no)?,
                TripleFormat::NTriples => parse_nt_line(raw, line_no)?,
            };
            self.add_triple(triple).map_err(|e| match e {
                KbError::Parse { message, .. } => KbError::Parse { line: line_no, message },
                other => other,
            })?;
            n += 1;
        }
        Ok(n)
    }

    /// Ingests `alias \t entity \t popularity` rows.
    pub fn load_aliases<R: BufRead>(&mut self, reader: R, policy: AliasPolicy) -> Result<usize, KbError> {
        let mut n = 0;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if is_blank(&line) {
                continue;
            }
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(line_no, "expected `alias \\t entity \\t popularity`"));
            }
            let entity = fields[1].trim();
            check_name(line_no, "entity", entity)?;
            let popularity: f64 = fields[2]
                .trim()
                .parse()
                .ok()
                .filter(|p: &f64| p.is_finite() && *p >= 0.0)
                .ok_or_else(|| parse_err(line_no, format!("popularity `{}` is not a non-negative number", fields[2])))?;
            let entity = EntityId::new(entity);
            if !self.knows_entity(&entity) {
                match policy {
                    AliasPolicy::Strict => {
                        return Err(KbError::UnknownEntity {
                            line: line_no,
                            alias: fields[0].to_string(),
                            entity: entity.0,
                        })
                    }
                    AliasPolicy::WarnAndKeep => {
                        log::warn!("line {line_no}: alias `{}` names unknown entity `{entity}`", fields[0])
                    }
                }
            }
            self.add_alias(fields[0], &entity, popularity);
            n += 1;
        }
        Ok(n)
    }

    /// Ingests `entity \t label` rows.
    pub fn load_labels<R: BufRead>(&mut self, reader: R) -> Result<usize, KbError> {
        let mut n = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if is_blank(&line) {
                continue;
            }
            let (id, label) = line
                .trim_end_matches('\r')
                .split_once('\t')
                .ok_or_else(|| parse_err(i + 1, "expected `entity \\t label`"))?;
            check_name(i + 1, "entity", id.trim())?;
            self.set_label(&EntityId::new(id.trim()), label.trim());
            n += 1;
        }
        Ok(n)
    }

    /// Ingests schema declarations: `class \t name [\t label]` or
    /// `relation \t name [\t domain [\t range [\t label]]]`. Empty domain or
    /// range fields mean "unspecified".
    pub fn load_schema<R: BufRead>(&mut self, reader: R) -> Result<usize, KbError> {
        let mut n = 0;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if is_blank(&line) {
                continue;
            }
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').map(str::trim).collect();
            let name = fields.get(1).copied().unwrap_or("");
            check_name(line_no, "schema name", name)?;
            let opt = |k: usize| fields.get(k).filter(|s| !s.is_empty()).map(|s| s.to_string());
            let item = match fields[0] {
                "class" => {
                    let mut item = SchemaItem::class(name);
                    if let Some(label) = opt(2) {
                        item.label = label;
                    }
                    item
                }
                "relation" => {
                    let mut item = SchemaItem::relation(name);
                    item.domain = opt(2);
                    item.range = opt(3);
                    if let Some(label) = opt(4) {
                        item.label = label;
                    }
                    item
                }
                other => return Err(parse_err(line_no, format!("unknown schema kind `{other}`"))),
            };
            self.add_schema_item(item)?;
            n += 1;
        }
        Ok(n)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DumpObject {
    Entity(String),
    Literal(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpTriple {
    s: String,
    r: String,
    o: DumpObject,
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpAlias {
    alias: String,
    entity: String,
    popularity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreDump {
    type_relation: String,
    schema: Vec<SchemaItem>,
    labels: BTreeMap<String, String>,
    aliases: Vec<DumpAlias>,
    triples: Vec<DumpTriple>,
}

impl StoreBuilder {
    /// A builder holding the contents of a [`TripleStore::dump`] document,
    /// ready for further ingestion.
    pub fn from_dump<R: std::io::Read>(reader: R) -> Result<StoreBuilder, KbError> {
        let dump: StoreDump = serde_json::from_reader(reader).map_err(|e| KbError::Dump(e.to_string()))?;
        let mut b = StoreBuilder::with_type_relation(&dump.type_relation);
        for item in dump.schema {
            b.add_schema_item(item)?;
        }
        for (i, t) in dump.triples.into_iter().enumerate() {
            let object = match t.o {
                DumpObject::Entity(e) => Node::Entity(EntityId::new(e)),
                DumpObject::Literal(text) => {
                    Node::Literal(Literal::parse(&text).map_err(|source| KbError::Type { line: i + 1, source })?)
                }
            };
            b.add_triple(Triple { subject: EntityId::new(t.s), relation: t.r, object })?;
        }
        for (e, label) in dump.labels {
            b.set_label(&EntityId::new(e), &label);
        }
        for a in dump.aliases {
            b.add_alias(&a.alias, &EntityId::new(a.entity), a.popularity);
        }
        Ok(b)
    }
}

impl TripleStore {
    /// Writes the whole store as one JSON document.
    pub fn dump<W: Write>(&self, writer: W) -> Result<(), KbError> {
        let mut aliases = Vec::new();
        for (entity, meta) in &self.meta {
            for alias in &meta.aliases {
                let key = crate::text::normalize(alias);
                let popularity = self
                    .aliases
                    .get(&key)
                    .and_then(|rows| rows.iter().find(|(e, _)| e == entity))
                    .map(|(_, p)| *p)
                    .unwrap_or(0.0);
                aliases.push(DumpAlias { alias: alias.clone(), entity: entity.0.clone(), popularity });
            }
        }
        let dump = StoreDump {
            type_relation: self.type_relation.clone(),
            schema: self.catalog.values().cloned().collect(),
            labels: self
                .meta
                .iter()
                .filter_map(|(e, m)| m.label.as_ref().map(|l| (e.0.clone(), l.clone())))
                .collect(),
            aliases,
            triples: self
                .triples
                .iter()
                .map(|t| DumpTriple {
                    s: t.subject.0.clone(),
                    r: t.relation.clone(),
                    o: match &t.object {
                        Node::Entity(e) => DumpObject::Entity(e.0.clone()),
                        Node::Literal(l) => DumpObject::Literal(l.to_string()),
                    },
                })
                .collect(),
        };
        serde_json::to_writer(writer, &dump).map_err(|e| KbError::Dump(e.to_string()))
    }

    /// Reads a document written by [`TripleStore::dump`].
    pub fn load_dump<R: std::io::Read>(reader: R) -> Result<TripleStore, KbError> {
        Ok(StoreBuilder::from_dump(reader)?.freeze())
    }

    /// Writes triples in the TSV ingestion format.
    pub fn write_tsv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for t in &self.triples {
            writeln!(writer, "{}\t{}\t{}", t.subject, t.relation, t.object)?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn meta_map(&self) -> &BTreeMap<EntityId, super::EntityMeta> {
        &self.meta
    }
}
