use std::fmt::Write;

use serde::Serialize;

use crate::kb::{Literal, LiteralKind, DEFAULT_TYPE_RELATION};
use crate::sexpr::{LogicalForm, RelationRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryShape {
    SelectDistinct,
    CountAggregate,
    SuperlativeSubquery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SparqlQuery {
    pub text: String,
    pub shape: QueryShape,
}

/// Compiles logical forms to SPARQL text.
///
/// Patterns follow a pre-order walk of the form. The answer variable is
/// `?x`; intermediate variables are `?y0`, `?y1`, … in allocation order.
#[derive(Debug, Clone)]
pub struct SparqlCompiler {
    type_relation: String,
}

impl Default for SparqlCompiler {
    fn default() -> Self {
        SparqlCompiler { type_relation: DEFAULT_TYPE_RELATION.to_string() }
    }
}

/// Compiles with the default type relation.
pub fn compile_sparql(lf: &LogicalForm) -> SparqlQuery {
    SparqlCompiler::default().compile(lf)
}

pub(super) fn literal_term(l: &Literal) -> String {
    let quoted = |s: &str| {
        let mut out = String::from("\"");
        for c in s.chars() {
            match c {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                c => out.push(c),
            }
        }
        out.push('"');
        out
    };
    match (l.kind(), l.tag()) {
        (LiteralKind::Str(s), None) => quoted(s),
        (LiteralKind::Float(_), None) => format!("{}^^<float>", quoted(&l.lexical())),
        (_, Some(tag)) => format!("{}^^<{tag}>", quoted(&l.lexical())),
        (LiteralKind::Integer(_), None) => format!("{}^^<integer>", quoted(&l.lexical())),
        (LiteralKind::DateTime(_), None) => format!("{}^^<dateTime>", quoted(&l.lexical())),
    }
}

struct Emitter<'a> {
    type_relation: &'a str,
    next: usize,
}

impl Emitter<'_> {
    fn fresh(&mut self) -> String {
        let v = format!("?y{}", self.next);
        self.next += 1;
        v
    }

    /// Appends the group elements constraining `var` to the denotation of
    /// `lf`; filters go to `filters` so they can close the group.
    fn pattern(&mut self, lf: &LogicalForm, var: &str, body: &mut Vec<String>, filters: &mut Vec<String>) {
        match lf {
            LogicalForm::Entity(e) => body.push(format!("VALUES {var} {{ <{e}> }}")),
            LogicalForm::Literal(l) => body.push(format!("VALUES {var} {{ {} }}", literal_term(l))),
            LogicalForm::Class(c) => body.push(format!("{var} <{}> <{c}> .", self.type_relation)),
            LogicalForm::And(a, b) => {
                self.pattern(a, var, body, filters);
                self.pattern(b, var, body, filters);
            }
            LogicalForm::Join(rel, x) => {
                let inner = match &**x {
                    LogicalForm::Entity(e) => format!("<{e}>"),
                    LogicalForm::Literal(l) if matches!(rel, RelationRef::Forward(_)) => literal_term(l),
                    _ => {
                        let y = self.fresh();
                        let mut sub_body = Vec::new();
                        self.pattern(x, &y, &mut sub_body, filters);
                        let triple = match rel {
                            RelationRef::Forward(r) => format!("{var} <{r}> {y} ."),
                            RelationRef::Reverse(r) => format!("{y} <{r}> {var} ."),
                        };
                        body.push(triple);
                        body.extend(sub_body);
                        return;
                    }
                };
                body.push(match rel {
                    RelationRef::Forward(r) => format!("{var} <{r}> {inner} ."),
                    RelationRef::Reverse(r) => format!("{inner} <{r}> {var} ."),
                });
            }
            LogicalForm::Compare(op, r, v) => {
                let y = self.fresh();
                body.push(format!("{var} <{r}> {y} ."));
                filters.push(format!("FILTER({y} {} {})", op.sparql_symbol(), literal_term(v)));
            }
            LogicalForm::ArgMin(x, r) | LogicalForm::ArgMax(x, r) => {
                let agg = if matches!(lf, LogicalForm::ArgMin(..)) { "MIN" } else { "MAX" };
                self.pattern(x, var, body, filters);
                let value = self.fresh();
                let best = self.fresh();
                let inner_value = self.fresh();
                let inner_var = self.fresh();
                body.push(format!("{var} <{r}> {value} ."));
                let mut sub_body = Vec::new();
                let mut sub_filters = Vec::new();
                self.pattern(x, &inner_var, &mut sub_body, &mut sub_filters);
                sub_body.push(format!("{inner_var} <{r}> {inner_value} ."));
                sub_body.extend(sub_filters);
                body.push(format!(
                    "{{ SELECT ({agg}({inner_value}) AS {best}) WHERE {{ {} }} }}",
                    sub_body.join(" ")
                ));
                filters.push(format!("FILTER({value} = {best})"));
            }
            LogicalForm::Count(x) => self.pattern(x, var, body, filters),
        }
    }
}

impl SparqlCompiler {
    pub fn new(type_relation: &str) -> Self {
        SparqlCompiler { type_relation: type_relation.to_string() }
    }

    pub fn compile(&self, lf: &LogicalForm) -> SparqlQuery {
        let mut emitter = Emitter { type_relation: &self.type_relation, next: 0 };
        let (root, head, shape) = match lf {
            LogicalForm::Count(x) => (&**x, "SELECT (COUNT(DISTINCT ?x) AS ?count)", QueryShape::CountAggregate),
            other => {
                let mut superlative = false;
                other.walk(&mut |n| superlative |= matches!(n, LogicalForm::ArgMin(..) | LogicalForm::ArgMax(..)));
                let shape = if superlative { QueryShape::SuperlativeSubquery } else { QueryShape::SelectDistinct };
                (other, "SELECT DISTINCT ?x", shape)
            }
        };
        let mut body = Vec::new();
        let mut filters = Vec::new();
        emitter.pattern(root, "?x", &mut body, &mut filters);
        body.extend(filters);
        let mut text = String::new();
        write!(text, "{head} WHERE {{\n").expect("string write");
        for line in body {
            writeln!(text, "  {line}").expect("string write");
        }
        text.push('}');
        SparqlQuery { text, shape }
    }
}
