//! Typed literal values stored as triple objects and used in comparatives.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiteralError {
    #[error("value `{value}` is not a valid {kind}")]
    KindMismatch { value: String, kind: &'static str },
    #[error("literal value must be finite, got `{0}`")]
    NonFinite(String),
    #[error("malformed literal `{0}`")]
    Malformed(String),
}

/// Payload of a literal, one variant per kind.
#[derive(Debug, Clone)]
pub enum LiteralKind {
    Float(f64),
    Integer(i64),
    Str(String),
    DateTime(String),
}

/// A typed literal. Numeric kinds are always finite.
///
/// Equality, ordering and hashing are by value: integers and floats compare
/// after promotion to `f64` and the datatype tag is ignored, so
/// `100^^integer`, `100.0^^float` and `100.0` denote the same node.
#[derive(Debug, Clone)]
pub struct Literal {
    kind: LiteralKind,
    tag: Option<String>,
}

/// Comparable projection of a literal. Numbers order before date-times.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar<'a> {
    Num(f64),
    Time(&'a str),
}

impl PartialOrd for Scalar<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(match (self, other) {
            (Scalar::Num(a), Scalar::Num(b)) => a.total_cmp(b),
            (Scalar::Time(a), Scalar::Time(b)) => a.cmp(b),
            (Scalar::Num(_), Scalar::Time(_)) => Ordering::Less,
            (Scalar::Time(_), Scalar::Num(_)) => Ordering::Greater,
        })
    }
}

impl Scalar<'_> {
    /// Comparison for FILTER-style predicates: only same-kind scalars are
    /// comparable.
    pub fn compare(&self, other: &Scalar<'_>) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Num(a), Scalar::Num(b)) => a.partial_cmp(b),
            (Scalar::Time(a), Scalar::Time(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

fn normalize_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

fn tag_kind(tag: &str) -> Option<&'static str> {
    match tag {
        "float" | "double" | "decimal" => Some("float"),
        "integer" | "int" | "long" | "short" | "nonNegativeInteger" => Some("integer"),
        "dateTime" | "date" | "gYear" | "gYearMonth" | "time" => Some("datetime"),
        "string" => Some("string"),
        _ => None,
    }
}

fn looks_like_datetime(v: &str) -> bool {
    let mut chars = v.chars();
    let lead = chars.next().map(|c| c == '-' || c.is_ascii_digit()).unwrap_or(false);
    lead && v
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '-' | ':' | 'T' | 'Z' | '+' | '.'))
}

fn parse_finite(value: &str) -> Result<f64, LiteralError> {
    let v: f64 = value.parse().map_err(|_| LiteralError::KindMismatch {
        value: value.to_string(),
        kind: "float",
    })?;
    if !v.is_finite() {
        return Err(LiteralError::NonFinite(value.to_string()));
    }
    Ok(normalize_zero(v))
}

impl Literal {
    pub fn float(v: f64) -> Result<Self, LiteralError> {
        if !v.is_finite() {
            return Err(LiteralError::NonFinite(v.to_string()));
        }
        Ok(Literal { kind: LiteralKind::Float(normalize_zero(v)), tag: None })
    }

    pub fn tagged_float(v: f64, tag: &str) -> Result<Self, LiteralError> {
        let mut lit = Self::float(v)?;
        lit.tag = Some(tag.to_string());
        Ok(lit)
    }

    pub fn integer(v: i64) -> Self {
        Literal { kind: LiteralKind::Integer(v), tag: Some("integer".into()) }
    }

    pub fn string(s: impl Into<String>) -> Self {
        Literal { kind: LiteralKind::Str(s.into()), tag: None }
    }

    pub fn datetime(s: impl Into<String>) -> Self {
        Literal { kind: LiteralKind::DateTime(s.into()), tag: Some("dateTime".into()) }
    }

    /// Builds a literal from its lexical value and optional datatype tag.
    ///
    /// Known tags fix the kind; a value that does not fit its tag's kind is a
    /// [`LiteralError::KindMismatch`]. Without a tag the value must be numeric
    /// and becomes a float. Unknown tags keep the value numeric when it
    /// parses as a number and fall back to a string otherwise.
    pub fn from_parts(value: &str, tag: Option<&str>) -> Result<Self, LiteralError> {
        let Some(tag) = tag else {
            return Self::float(parse_finite(value)?);
        };
        let kind = match tag_kind(tag) {
            Some("float") => LiteralKind::Float(parse_finite(value)?),
            Some("integer") => LiteralKind::Integer(value.parse().map_err(|_| {
                LiteralError::KindMismatch { value: value.to_string(), kind: "integer" }
            })?),
            Some("datetime") => {
                if !looks_like_datetime(value) {
                    return Err(LiteralError::KindMismatch {
                        value: value.to_string(),
                        kind: "datetime",
                    });
                }
                LiteralKind::DateTime(value.to_string())
            }
            Some(_) => LiteralKind::Str(value.to_string()),
            None => match parse_finite(value) {
                Ok(v) => LiteralKind::Float(v),
                Err(_) => LiteralKind::Str(value.to_string()),
            },
        };
        Ok(Literal { kind, tag: Some(tag.to_string()) })
    }

    /// Parses the textual form produced by [`fmt::Display`]:
    /// `"quoted"` or `"quoted"^^tag` for strings, `value^^tag`, or a bare
    /// number (a float).
    pub fn parse(text: &str) -> Result<Self, LiteralError> {
        if let Some(rest) = text.strip_prefix('"') {
            let (body, after) = split_quoted(rest).ok_or_else(|| LiteralError::Malformed(text.into()))?;
            return match after {
                "" => Ok(Literal::string(body)),
                t => match t.strip_prefix("^^") {
                    Some(tag) if !tag.is_empty() => {
                        if tag_kind(tag) == Some("string") || tag_kind(tag).is_none() {
                            Ok(Literal { kind: LiteralKind::Str(body), tag: Some(tag.into()) })
                        } else {
                            Literal::from_parts(&body, Some(tag))
                        }
                    }
                    _ => Err(LiteralError::Malformed(text.into())),
                },
            };
        }
        match text.split_once("^^") {
            Some((value, tag)) if !value.is_empty() && !tag.is_empty() => {
                let lit = Literal::from_parts(value, Some(tag))?;
                if matches!(lit.kind, LiteralKind::Str(_)) {
                    // unquoted strings would not survive a print/parse cycle
                    return Err(LiteralError::KindMismatch { value: value.into(), kind: "number" });
                }
                Ok(lit)
            }
            Some(_) => Err(LiteralError::Malformed(text.into())),
            None => Literal::from_parts(text, None),
        }
    }

    pub fn kind(&self) -> &LiteralKind {
        &self.kind
    }

    pub fn tag(&self) -> Option<&str> {
        self.tag.as_deref()
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, LiteralKind::Float(_) | LiteralKind::Integer(_))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self.kind {
            LiteralKind::Float(v) => Some(v),
            LiteralKind::Integer(v) => Some(v as f64),
            _ => None,
        }
    }

    /// Numbers and date-times are comparable; strings are not.
    pub fn scalar(&self) -> Option<Scalar<'_>> {
        match &self.kind {
            LiteralKind::Float(v) => Some(Scalar::Num(*v)),
            LiteralKind::Integer(v) => Some(Scalar::Num(*v as f64)),
            LiteralKind::DateTime(s) => Some(Scalar::Time(s)),
            LiteralKind::Str(_) => None,
        }
    }

    /// Lexical value without the datatype tag (`257.0`, `abc`).
    pub fn lexical(&self) -> String {
        match &self.kind {
            LiteralKind::Float(v) => format_float(*v),
            LiteralKind::Integer(v) => v.to_string(),
            LiteralKind::Str(s) | LiteralKind::DateTime(s) => s.clone(),
        }
    }

    fn rank(&self) -> u8 {
        match self.kind {
            LiteralKind::Float(_) | LiteralKind::Integer(_) => 0,
            LiteralKind::Str(_) => 1,
            LiteralKind::DateTime(_) => 2,
        }
    }
}

fn split_quoted(rest: &str) -> Option<(String, &str)> {
    let mut out = String::new();
    let mut chars = rest.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Some((out, &rest[i + 1..])),
            '\\' => match chars.next()?.1 {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                other => out.push(other),
            },
            c => out.push(c),
        }
    }
    None
}

/// Shortest representation that reparses to the same value; integral values
/// keep a trailing `.0`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LiteralKind::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
                if let Some(tag) = &self.tag {
                    write!(f, "^^{tag}")?;
                }
                Ok(())
            }
            LiteralKind::Float(v) => match &self.tag {
                Some(tag) => write!(f, "{}^^{tag}", format_float(*v)),
                None => f.write_str(&format_float(*v)),
            },
            LiteralKind::Integer(v) => write!(f, "{v}^^{}", self.tag.as_deref().unwrap_or("integer")),
            LiteralKind::DateTime(s) => write!(f, "{s}^^{}", self.tag.as_deref().unwrap_or("dateTime")),
        }
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Literal {}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.rank().cmp(&other.rank()) {
            Ordering::Equal => {}
            o => return o,
        }
        match (&self.kind, &other.kind) {
            (LiteralKind::Str(a), LiteralKind::Str(b)) => a.cmp(b),
            (LiteralKind::DateTime(a), LiteralKind::DateTime(b)) => a.cmp(b),
            _ => {
                let a = self.as_f64().unwrap_or_default();
                let b = other.as_f64().unwrap_or_default();
                a.total_cmp(&b)
            }
        }
    }
}

impl Hash for Literal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match &self.kind {
            LiteralKind::Str(s) | LiteralKind::DateTime(s) => s.hash(state),
            _ => normalize_zero(self.as_f64().unwrap_or_default()).to_bits().hash(state),
        }
    }
}
