//! Token vocabulary and the built-in tokenizer.
//!
//! Tokenization of a logical form is lossless: the concatenated token
//! strings equal its printed form.
//!
//! * operators, `(`, `)` and the single space are atomic tokens;
//! * schema names split into words at `.` and `_`, which are tokens of
//!   their own (`sf.chamber_pressure` → `sf` `.` `chamber` `_` `pressure`);
//! * entity ids are atomic;
//! * literals split into single characters plus one `^^tag` token.
//!
//! Context text (questions, labels) is split into lower-cased words; numbers
//! are spelled out in characters and words outside the vocabulary map to
//! `<unk>`.

use std::collections::{BTreeSet, HashMap};

use super::DecodeError;
use crate::kb::{Literal, TripleStore};
use crate::sexpr::{LogicalForm, RelationRef, OPERATORS};
use crate::text;

pub type TokenId = u32;

pub const BOS: TokenId = 0;
pub const EOS: TokenId = 1;
pub const UNK: TokenId = 2;
pub const ENTITIES: TokenId = 3;
pub const ELFS: TokenId = 4;
pub const SCHEMA: TokenId = 5;
pub const COMMA: TokenId = 6;
pub const SEMI: TokenId = 7;
pub const LPAREN: TokenId = 8;
pub const RPAREN: TokenId = 9;
pub const SPACE: TokenId = 10;

const FIXED: [&str; 11] = ["<s>", "</s>", "<unk>", "<entities>", "<elfs>", "<schema>", ",", ";", "(", ")", " "];
const LITERAL_CHARS: [&str; 12] = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9", ".", "-"];
const SEPARATORS: [&str; 2] = [".", "_"];
/// Datatype tags the decoder may emit after a number.
pub const NUMBER_TAGS: [&str; 2] = ["^^float", "^^integer"];

fn tokenizable(piece: &str) -> bool {
    !piece.is_empty() && !piece.chars().any(|c| c.is_whitespace() || c == '(' || c == ')')
}

/// Splits a schema name into words and separators; empty words are dropped.
pub fn schema_pieces(name: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in name.char_indices() {
        if c == '.' || c == '_' {
            if i > start {
                out.push(&name[start..i]);
            }
            out.push(&name[i..i + 1]);
            start = i + 1;
        }
    }
    if start < name.len() {
        out.push(&name[start..]);
    }
    out
}

/// Character pieces of a literal's printed form plus its `^^tag`.
pub fn literal_pieces(lit: &Literal) -> Vec<String> {
    let printed = lit.to_string();
    let (value, tag) = match printed.rfind("^^") {
        Some(i) if !printed[i..].contains('"') => (&printed[..i], Some(&printed[i..])),
        _ => (printed.as_str(), None),
    };
    let mut out: Vec<String> = value.chars().map(String::from).collect();
    out.extend(tag.map(String::from));
    out
}

#[derive(Debug, Clone, Default)]
pub struct VocabBuilder {
    extra: BTreeSet<String>,
}

impl VocabBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn piece(&mut self, piece: &str, item: &str) -> Result<(), DecodeError> {
        if !tokenizable(piece) {
            return Err(DecodeError::Untokenizable(item.to_string()));
        }
        self.extra.insert(piece.to_string());
        Ok(())
    }

    pub fn add_schema_name(&mut self, name: &str) -> Result<&mut Self, DecodeError> {
        if name.is_empty() {
            return Err(DecodeError::Untokenizable(name.to_string()));
        }
        for p in schema_pieces(name) {
            self.piece(p, name)?;
        }
        Ok(self)
    }

    pub fn add_entity(&mut self, id: &str) -> Result<&mut Self, DecodeError> {
        self.piece(id, id)?;
        Ok(self)
    }

    pub fn add_literal(&mut self, lit: &Literal) -> &mut Self {
        // characters of a literal are single tokens, including spaces and
        // parentheses inside strings
        self.extra.extend(literal_pieces(lit));
        self
    }

    /// Adds the words of free text (labels, aliases).
    pub fn add_text(&mut self, s: &str) -> &mut Self {
        self.extra.extend(text::words(s).into_iter().map(|w| w.text));
        self
    }

    /// Adds every name, id and literal in `lf`.
    pub fn add_form(&mut self, lf: &LogicalForm) -> Result<&mut Self, DecodeError> {
        for c in lf.classes() {
            self.add_schema_name(c)?;
        }
        for r in lf.relations() {
            self.add_schema_name(r)?;
        }
        for e in lf.entities() {
            self.add_entity(e.as_str())?;
        }
        for l in lf.literals() {
            self.add_literal(l);
        }
        Ok(self)
    }

    /// Schema names, entity ids, literal objects and label/alias words of a
    /// store. Names that cannot be tokenized are skipped with a warning.
    pub fn add_store(&mut self, store: &TripleStore) -> &mut Self {
        for name in store.catalog().keys() {
            if let Err(e) = self.add_schema_name(name) {
                log::warn!("{e}");
            }
        }
        for e in store.entities() {
            if let Err(err) = self.add_entity(e.as_str()) {
                log::warn!("{err}");
            }
            if let Some(meta) = store.meta(e) {
                if let Some(label) = &meta.label {
                    self.add_text(label);
                }
                for a in &meta.aliases {
                    self.add_text(a);
                }
            }
        }
        for t in store.triples() {
            if let Some(l) = t.object.as_literal() {
                self.add_literal(l);
            }
        }
        self
    }

    pub fn build(&self) -> Vocabulary {
        let mut tokens: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
        tokens.extend(OPERATORS.iter().map(|s| s.to_string()));
        tokens.extend(LITERAL_CHARS.iter().map(|s| s.to_string()));
        tokens.extend(SEPARATORS.iter().map(|s| s.to_string()));
        tokens.extend(NUMBER_TAGS.iter().map(|s| s.to_string()));
        let mut index = HashMap::new();
        let mut unique = Vec::new();
        for t in tokens.into_iter().chain(self.extra.iter().cloned()) {
            if !index.contains_key(&t) {
                index.insert(t.clone(), unique.len() as TokenId);
                unique.push(t);
            }
        }
        Vocabulary { tokens: unique, index }
    }
}

/// Bidirectional token ↔ id map with dense ids.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Vocabulary of a store plus any extra forms (e.g. scorer targets).
    pub fn for_store<'a>(store: &TripleStore, extra: impl IntoIterator<Item = &'a LogicalForm>) -> Result<Self, DecodeError> {
        let mut b = VocabBuilder::new();
        b.add_store(store);
        for lf in extra {
            b.add_form(lf)?;
        }
        Ok(b.build())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn require(&self, piece: &str, item: &str) -> Result<TokenId, DecodeError> {
        self.id(piece).ok_or_else(|| DecodeError::UnknownToken { token: piece.to_string(), item: item.to_string() })
    }

    pub fn encode_schema_name(&self, name: &str) -> Result<Vec<TokenId>, DecodeError> {
        if name.is_empty() {
            return Err(DecodeError::Untokenizable(String::new()));
        }
        schema_pieces(name).into_iter().map(|p| self.require(p, name)).collect()
    }

    pub fn encode_literal(&self, lit: &Literal) -> Result<Vec<TokenId>, DecodeError> {
        let item = lit.to_string();
        literal_pieces(lit).iter().map(|p| self.require(p, &item)).collect()
    }

    /// Tokens of `lf` as printed (callers canonicalize first when needed).
    pub fn encode_form(&self, lf: &LogicalForm) -> Result<Vec<TokenId>, DecodeError> {
        let mut out = Vec::new();
        self.encode_into(lf, &mut out)?;
        Ok(out)
    }

    fn op(&self, name: &str) -> TokenId {
        self.id(name).expect("operators are always in the vocabulary")
    }

    fn encode_into(&self, lf: &LogicalForm, out: &mut Vec<TokenId>) -> Result<(), DecodeError> {
        let open = |out: &mut Vec<TokenId>, op: &str| {
            out.extend([LPAREN, self.op(op), SPACE]);
        };
        match lf {
            LogicalForm::Entity(e) => out.push(self.require(e.as_str(), e.as_str())?),
            LogicalForm::Literal(l) => out.extend(self.encode_literal(l)?),
            LogicalForm::Class(c) => out.extend(self.encode_schema_name(c)?),
            LogicalForm::And(a, b) => {
                open(out, "AND");
                self.encode_into(a, out)?;
                out.push(SPACE);
                self.encode_into(b, out)?;
                out.push(RPAREN);
            }
            LogicalForm::Join(rel, x) => {
                open(out, "JOIN");
                match rel {
                    RelationRef::Forward(r) => out.extend(self.encode_schema_name(r)?),
                    RelationRef::Reverse(r) => {
                        open(out, "R");
                        out.extend(self.encode_schema_name(r)?);
                        out.push(RPAREN);
                    }
                }
                out.push(SPACE);
                self.encode_into(x, out)?;
                out.push(RPAREN);
            }
            LogicalForm::Count(x) => {
                open(out, "COUNT");
                self.encode_into(x, out)?;
                out.push(RPAREN);
            }
            LogicalForm::ArgMin(x, r) | LogicalForm::ArgMax(x, r) => {
                open(out, if matches!(lf, LogicalForm::ArgMin(..)) { "ARGMIN" } else { "ARGMAX" });
                self.encode_into(x, out)?;
                out.push(SPACE);
                out.extend(self.encode_schema_name(r)?);
                out.push(RPAREN);
            }
            LogicalForm::Compare(op, r, v) => {
                open(out, op.as_str());
                out.extend(self.encode_schema_name(r)?);
                out.push(SPACE);
                out.extend(self.encode_literal(v)?);
                out.push(RPAREN);
            }
        }
        Ok(())
    }

    /// Words of free text; numbers spelled out in characters, unknown words
    /// as `<unk>`.
    pub fn encode_text(&self, s: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        for w in text::words(s) {
            if let Some(id) = self.id(&w.text) {
                out.push(id);
            } else if w.text.chars().all(|c| c.is_ascii_digit() || c == '.') {
                out.extend(w.text.chars().map(|c| self.id(&c.to_string()).expect("digit tokens")));
            } else {
                out.push(UNK);
            }
        }
        out
    }

    /// Concatenated token strings, skipping `<s>` and `</s>`.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().filter(|&&t| t != BOS && t != EOS).map(|&t| self.token(t)).collect()
    }
}
