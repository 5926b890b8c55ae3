use std::fmt;

use thiserror::Error;

use super::{is_class_symbol, CmpOp, LogicalForm, RelationRef, OPERATORS};
use crate::kb::{EntityId, Literal};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    UnexpectedEnd,
    UnbalancedClose,
    UnterminatedString,
    TrailingInput,
    UnknownOperator(String),
    MissingOperator,
    Arity { op: String, expected: &'static str, found: usize },
    MalformedLiteral(String),
    ExpectedRelation,
    ExpectedExpression,
    ReservedWord(String),
    CountNotOutermost,
    NonNumericComparison(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyInput => f.write_str("empty input"),
            ParseErrorKind::UnexpectedEnd => f.write_str("unexpected end of input (unbalanced parentheses)"),
            ParseErrorKind::UnbalancedClose => f.write_str("unbalanced `)`"),
            ParseErrorKind::UnterminatedString => f.write_str("unterminated string literal"),
            ParseErrorKind::TrailingInput => f.write_str("trailing input after expression"),
            ParseErrorKind::UnknownOperator(op) => write!(f, "unknown operator `{op}`"),
            ParseErrorKind::MissingOperator => f.write_str("expected an operator after `(`"),
            ParseErrorKind::Arity { op, expected, found } => {
                write!(f, "{op} takes {expected} argument(s), found {found}")
            }
            ParseErrorKind::MalformedLiteral(s) => write!(f, "malformed literal `{s}`"),
            ParseErrorKind::ExpectedRelation => f.write_str("expected a relation"),
            ParseErrorKind::ExpectedExpression => f.write_str("expected an expression"),
            ParseErrorKind::ReservedWord(w) => write!(f, "operator `{w}` used as a symbol"),
            ParseErrorKind::CountNotOutermost => f.write_str("COUNT is only allowed at the root"),
            ParseErrorKind::NonNumericComparison(s) => write!(f, "comparison operand `{s}` is not numeric or a date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

fn err<T>(offset: usize, kind: ParseErrorKind) -> Result<T, ParseError> {
    Err(ParseError { offset, kind })
}

#[derive(Debug)]
enum Sexp<'a> {
    Atom(&'a str, usize),
    List(Vec<Sexp<'a>>, usize),
}

impl Sexp<'_> {
    fn pos(&self) -> usize {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn atom(&mut self) -> Result<Sexp<'a>, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        if bytes[self.pos] == b'"' {
            self.pos += 1;
            loop {
                match bytes.get(self.pos) {
                    None => return err(start, ParseErrorKind::UnterminatedString),
                    Some(b'\\') => self.pos += 2,
                    Some(b'"') => {
                        self.pos += 1;
                        break;
                    }
                    Some(_) => self.pos += 1,
                }
            }
        }
        while let Some(c) = self.src[self.pos.min(self.src.len())..].chars().next() {
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            self.pos += c.len_utf8();
        }
        Ok(Sexp::Atom(&self.src[start..self.pos], start))
    }

    fn sexp(&mut self) -> Result<Sexp<'a>, ParseError> {
        self.skip_ws();
        match self.src[self.pos..].chars().next() {
            None => err(self.pos, ParseErrorKind::UnexpectedEnd),
            Some(')') => err(self.pos, ParseErrorKind::UnbalancedClose),
            Some('(') => {
                let start = self.pos;
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.src[self.pos..].chars().next() {
                        None => return err(self.pos, ParseErrorKind::UnexpectedEnd),
                        Some(')') => {
                            self.pos += 1;
                            return Ok(Sexp::List(items, start));
                        }
                        Some(_) => items.push(self.sexp()?),
                    }
                }
            }
            Some(_) => self.atom(),
        }
    }
}

/// Whether a bare token reads as a literal rather than a symbol.
pub fn is_literal_text(s: &str) -> bool {
    s.starts_with('"')
        || s.contains("^^")
        || (s.chars().next().is_some_and(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.'))
            && s.parse::<f64>().is_ok())
}

/// Whether `s` can stand alone as an entity, class or relation symbol.
pub fn is_plain_symbol(s: &str) -> bool {
    !s.is_empty()
        && !is_literal_text(s)
        && !OPERATORS.contains(&s)
        && !s.chars().any(|c| c.is_whitespace() || c == '(' || c == ')')
}

fn literal(text: &str, pos: usize) -> Result<Literal, ParseError> {
    Literal::parse(text).map_err(|_| ParseError { offset: pos, kind: ParseErrorKind::MalformedLiteral(text.into()) })
}

fn symbol<'a>(s: &Sexp<'a>) -> Option<(&'a str, usize)> {
    match s {
        Sexp::Atom(t, p) if !is_literal_text(t) => Some((t, *p)),
        _ => None,
    }
}

fn relation(s: &Sexp<'_>) -> Result<String, ParseError> {
    match symbol(s) {
        Some((t, p)) if OPERATORS.contains(&t) => err(p, ParseErrorKind::ReservedWord(t.into())),
        Some((t, _)) => Ok(t.to_string()),
        None => err(s.pos(), ParseErrorKind::ExpectedRelation),
    }
}

fn relation_ref(s: &Sexp<'_>) -> Result<RelationRef, ParseError> {
    match s {
        Sexp::List(items, pos) => match items.first() {
            Some(Sexp::Atom("R", _)) => {
                if items.len() != 2 {
                    return err(*pos, ParseErrorKind::Arity { op: "R".into(), expected: "1", found: items.len() - 1 });
                }
                Ok(RelationRef::Reverse(relation(&items[1])?))
            }
            _ => err(*pos, ParseErrorKind::ExpectedRelation),
        },
        atom => Ok(RelationRef::Forward(relation(atom)?)),
    }
}

fn arity(op: &str, args: &[Sexp<'_>], n: usize, pos: usize) -> Result<(), ParseError> {
    if args.len() != n {
        let expected = match n {
            1 => "1",
            2 => "2",
            _ => "3",
        };
        return err(pos, ParseErrorKind::Arity { op: op.into(), expected, found: args.len() });
    }
    Ok(())
}

fn expr(s: &Sexp<'_>, root: bool) -> Result<LogicalForm, ParseError> {
    let (items, pos) = match s {
        Sexp::Atom(t, p) => {
            if is_literal_text(t) {
                return Ok(LogicalForm::Literal(literal(t, *p)?));
            }
            if OPERATORS.contains(t) {
                return err(*p, ParseErrorKind::ReservedWord(t.to_string()));
            }
            return Ok(if is_class_symbol(t) {
                LogicalForm::Class(t.to_string())
            } else {
                LogicalForm::Entity(EntityId::new(*t))
            });
        }
        Sexp::List(items, pos) => (items, *pos),
    };
    let Some(head) = items.first() else {
        return err(pos, ParseErrorKind::MissingOperator);
    };
    let Sexp::Atom(op, op_pos) = head else {
        return err(head.pos(), ParseErrorKind::MissingOperator);
    };
    let args = &items[1..];
    match *op {
        "AND" => {
            if args.len() < 2 {
                return err(pos, ParseErrorKind::Arity { op: "AND".into(), expected: "at least 2", found: args.len() });
            }
            let mut acc = expr(&args[0], false)?;
            for a in &args[1..] {
                acc = LogicalForm::and(acc, expr(a, false)?);
            }
            Ok(acc)
        }
        "JOIN" => {
            arity(op, args, 2, pos)?;
            Ok(LogicalForm::Join(relation_ref(&args[0])?, Box::new(expr(&args[1], false)?)))
        }
        "COUNT" => {
            if !root {
                return err(pos, ParseErrorKind::CountNotOutermost);
            }
            arity(op, args, 1, pos)?;
            Ok(LogicalForm::count(expr(&args[0], false)?))
        }
        "ARGMIN" | "ARGMAX" => {
            arity(op, args, 2, pos)?;
            let sub = expr(&args[0], false)?;
            let rel = relation(&args[1])?;
            Ok(if *op == "ARGMIN" { LogicalForm::argmin(sub, &rel) } else { LogicalForm::argmax(sub, &rel) })
        }
        "R" => err(pos, ParseErrorKind::ExpectedExpression),
        other => match CmpOp::from_head(other) {
            Some(cmp) => {
                arity(op, args, 2, pos)?;
                let rel = relation(&args[0])?;
                let Sexp::Atom(text, lit_pos) = &args[1] else {
                    return err(args[1].pos(), ParseErrorKind::MalformedLiteral("(...)".into()));
                };
                if !is_literal_text(text) {
                    return err(*lit_pos, ParseErrorKind::MalformedLiteral(text.to_string()));
                }
                let value = literal(text, *lit_pos)?;
                if value.scalar().is_none() {
                    return err(*lit_pos, ParseErrorKind::NonNumericComparison(text.to_string()));
                }
                Ok(LogicalForm::Compare(cmp, rel, value))
            }
            None => err(*op_pos, ParseErrorKind::UnknownOperator(other.to_string())),
        },
    }
}

/// Parses one logical form.
pub fn parse(text: &str) -> Result<LogicalForm, ParseError> {
    let mut reader = Reader { src: text, pos: 0 };
    reader.skip_ws();
    if reader.pos == text.len() {
        return err(0, ParseErrorKind::EmptyInput);
    }
    let tree = reader.sexp()?;
    reader.skip_ws();
    if reader.pos != text.len() {
        let kind = if text[reader.pos..].starts_with(')') {
            ParseErrorKind::UnbalancedClose
        } else {
            ParseErrorKind::TrailingInput
        };
        return err(reader.pos, kind);
    }
    expr(&tree, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(s: &str) -> ParseErrorKind {
        parse(s).unwrap_err().kind
    }

    #[test]
    fn unbalanced_input_reports_end() {
        let e = parse("(JOIN r").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnexpectedEnd);
        assert_eq!(e.offset, 7);
        assert_eq!(kind("(COUNT a.b))"), ParseErrorKind::UnbalancedClose);
        assert_eq!(kind(")"), ParseErrorKind::UnbalancedClose);
    }

    #[test]
    fn unknown_heads_are_rejected() {
        assert_eq!(kind("(OR a.b c.d)"), ParseErrorKind::UnknownOperator("OR".into()));
        assert_eq!(kind("(eq r.x 3)"), ParseErrorKind::UnknownOperator("eq".into()));
        assert_eq!(kind("()"), ParseErrorKind::MissingOperator);
    }

    #[test]
    fn arity_is_checked() {
        assert!(matches!(kind("(JOIN r.x)"), ParseErrorKind::Arity { .. }));
        assert!(matches!(kind("(ARGMAX a.b r.x e1)"), ParseErrorKind::Arity { .. }));
        assert!(matches!(kind("(AND a.b)"), ParseErrorKind::Arity { .. }));
        assert!(matches!(kind("(JOIN (R a b) e1)"), ParseErrorKind::Arity { .. }));
    }

    #[test]
    fn nary_and_nests_left() {
        let lf = parse("(AND ab.x cd.y ef.z)").unwrap();
        assert_eq!(
            lf,
            LogicalForm::and(LogicalForm::and(LogicalForm::class("ab.x"), LogicalForm::class("cd.y")), LogicalForm::class("ef.z"))
        );
    }

    #[test]
    fn literal_errors() {
        assert!(matches!(kind("(lt r.x 1.5^^integer)"), ParseErrorKind::MalformedLiteral(_)));
        assert!(matches!(kind("(lt r.x \"abc\")"), ParseErrorKind::NonNumericComparison(_)));
        assert!(matches!(kind("(lt r.x e1)"), ParseErrorKind::MalformedLiteral(_)));
        assert!(matches!(kind("(JOIN r.x \"abc)"), ParseErrorKind::UnterminatedString));
    }

    #[test]
    fn count_must_be_outermost() {
        assert!(parse("(COUNT (JOIN r.x e1))").is_ok());
        assert_eq!(kind("(AND a.b (COUNT c.d))"), ParseErrorKind::CountNotOutermost);
    }

    #[test]
    fn misplaced_reverse_and_reserved_words() {
        assert_eq!(kind("(AND (R r.x) a.b)"), ParseErrorKind::ExpectedExpression);
        assert_eq!(kind("(JOIN AND e1)"), ParseErrorKind::ReservedWord("AND".into()));
        assert_eq!(kind("(JOIN 3.5 e1)"), ParseErrorKind::ExpectedRelation);
    }

    #[test]
    fn string_and_date_literals() {
        let lf = parse("(JOIN r.name \"Lox (liquid)\")").unwrap();
        assert_eq!(lf.to_string(), "(JOIN r.name \"Lox (liquid)\")");
        let lf = parse("(ge r.date 2001-05-01^^date)").unwrap();
        assert_eq!(lf.to_string(), "(ge r.date 2001-05-01^^date)");
    }

    #[test]
    fn whitespace_is_flexible() {
        let lf = parse("  (JOIN\n  (R r.x)\te1 )  ").unwrap();
        assert_eq!(lf.to_string(), "(JOIN (R r.x) e1)");
        assert_eq!(kind("   "), ParseErrorKind::EmptyInput);
        assert_eq!(kind("a.b c.d"), ParseErrorKind::TrailingInput);
    }
}
