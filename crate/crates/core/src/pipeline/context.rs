use serde::Serialize;

use crate::decode::{TokenId, Vocabulary, COMMA, ELFS, ENTITIES, LPAREN, RPAREN, SCHEMA, SEMI};
use crate::kb::TripleStore;
use crate::retrieve::{LinkedEntity, ScoredCandidate, SchemaRetrieval};
use crate::sexpr::LogicalForm;

/// Generator input: the question followed by entity, exemplary-form and
/// schema sections.
///
/// Token layout:
/// `question <entities> (label , id) ; … <elfs> form ; … <schema> name ; …`
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssembledContext {
    pub question: String,
    /// `(label, id)` pairs.
    pub entities: Vec<(String, String)>,
    pub elfs: Vec<String>,
    pub schema: Vec<String>,
    #[serde(skip)]
    pub tokens: Vec<TokenId>,
}

impl AssembledContext {
    /// Readable rendering of the kept items.
    pub fn text(&self) -> String {
        let entities: Vec<String> = self.entities.iter().map(|(l, id)| format!("({l}, {id})")).collect();
        format!(
            "{} <entities> {} <elfs> {} <schema> {}",
            self.question,
            entities.join("; "),
            self.elfs.join("; "),
            self.schema.join("; ")
        )
    }
}

struct Item<T> {
    value: T,
    tokens: Vec<TokenId>,
}

fn entity_item(store: &TripleStore, link: &LinkedEntity, vocab: &Vocabulary) -> Item<(String, String)> {
    let label = store.label(&link.entity).to_string();
    let id = link.entity.as_str().to_string();
    let mut tokens = vec![LPAREN];
    tokens.extend(vocab.encode_text(&label));
    tokens.push(COMMA);
    tokens.push(vocab.id(&id).unwrap_or(crate::decode::UNK));
    tokens.push(RPAREN);
    Item { value: (label, id), tokens }
}

fn form_item(lf: &LogicalForm, vocab: &Vocabulary) -> Item<String> {
    let text = lf.print_canonical();
    let tokens = vocab.encode_form(&lf.canonicalize()).unwrap_or_else(|_| vocab.encode_text(&text));
    Item { value: text, tokens }
}

fn schema_item(name: &str, vocab: &Vocabulary) -> Item<String> {
    let tokens = vocab.encode_schema_name(name).unwrap_or_else(|_| vocab.encode_text(name));
    Item { value: name.to_string(), tokens }
}

/// Serializes the sections and drops whole items from the end until the
/// token count fits `budget`. Entities repeated across mentions appear
/// once; the question itself is cut only if it alone exceeds the budget.
pub fn assemble_context(
    question: &str,
    store: &TripleStore,
    links: &[LinkedEntity],
    elfs: &[ScoredCandidate<LogicalForm>],
    schema: &SchemaRetrieval,
    vocab: &Vocabulary,
    budget: usize,
) -> AssembledContext {
    let mut seen = std::collections::BTreeSet::new();
    let mut entities: Vec<Item<(String, String)>> = links
        .iter()
        .filter(|l| seen.insert(l.entity.clone()))
        .map(|l| entity_item(store, l, vocab))
        .collect();
    let mut forms: Vec<Item<String>> = elfs.iter().map(|c| form_item(&c.candidate, vocab)).collect();
    let mut names: Vec<Item<String>> = schema
        .classes
        .iter()
        .chain(&schema.relations)
        .map(|c| schema_item(&c.candidate, vocab))
        .collect();
    let mut question_tokens = vocab.encode_text(question);
    // sentinels plus one separator between neighbouring items
    let section = |items: usize, tokens: usize| 1 + tokens + items.saturating_sub(1);
    let total = |q: usize, e: &[Item<(String, String)>], f: &[Item<String>], s: &[Item<String>]| {
        q + section(e.len(), e.iter().map(|i| i.tokens.len()).sum())
            + section(f.len(), f.iter().map(|i| i.tokens.len()).sum())
            + section(s.len(), s.iter().map(|i| i.tokens.len()).sum())
    };
    while total(question_tokens.len(), &entities, &forms, &names) > budget {
        if names.pop().is_some() || forms.pop().is_some() || entities.pop().is_some() {
            continue;
        }
        let keep = budget.saturating_sub(3);
        question_tokens.truncate(keep);
        break;
    }
    let mut tokens = question_tokens;
    let mut push_section = |sentinel: TokenId, items: Vec<&[TokenId]>| {
        tokens.push(sentinel);
        for (i, t) in items.into_iter().enumerate() {
            if i > 0 {
                tokens.push(SEMI);
            }
            tokens.extend_from_slice(t);
        }
    };
    push_section(ENTITIES, entities.iter().map(|i| i.tokens.as_slice()).collect());
    push_section(ELFS, forms.iter().map(|i| i.tokens.as_slice()).collect());
    push_section(SCHEMA, names.iter().map(|i| i.tokens.as_slice()).collect());
    tokens.truncate(budget);
    AssembledContext {
        question: question.to_string(),
        entities: entities.into_iter().map(|i| i.value).collect(),
        elfs: forms.into_iter().map(|i| i.value).collect(),
        schema: names.into_iter().map(|i| i.value).collect(),
        tokens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::Vocabulary;
    use crate::fixtures::toy_kb;
    use crate::kb::EntityId;
    use crate::retrieve::Mention;
    use crate::sexpr::parse;

    fn link(id: &str) -> LinkedEntity {
        LinkedEntity { mention: Mention { start: 0, end: 1, surface: "x".into() }, entity: EntityId::new(id), score: 1.0 }
    }

    fn empty_schema() -> SchemaRetrieval {
        SchemaRetrieval { classes: vec![], relations: vec![] }
    }

    #[test]
    fn sections_in_order() {
        let kb = toy_kb();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let elf = ScoredCandidate { candidate: parse("(JOIN ms.length_units e1)").unwrap(), score: 1.0 };
        let schema = SchemaRetrieval {
            classes: vec![ScoredCandidate { candidate: "ms.system".into(), score: 1.0 }],
            relations: vec![ScoredCandidate { candidate: "ms.length_units".into(), score: 1.0 }],
        };
        let ctx = assemble_context("name the system", &kb, &[link("e1"), link("e1")], &[elf], &schema, &v, 1000);
        assert_eq!(ctx.entities, [("decimetre".to_string(), "e1".to_string())]);
        assert_eq!(ctx.text(), "name the system <entities> (decimetre, e1) <elfs> (JOIN ms.length_units e1) <schema> ms.system; ms.length_units");
        let pos = |t| ctx.tokens.iter().position(|&x| x == t).unwrap();
        assert!(pos(ENTITIES) < pos(ELFS) && pos(ELFS) < pos(SCHEMA));
        assert_eq!(v.decode(&ctx.tokens[pos(ELFS) + 1..pos(SCHEMA)]), "(JOIN ms.length_units e1)");
    }

    #[test]
    fn no_entities_or_forms() {
        let kb = toy_kb();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let ctx = assemble_context("smallest engine", &kb, &[], &[], &empty_schema(), &v, 1000);
        assert!(ctx.entities.is_empty() && ctx.elfs.is_empty());
        assert_eq!(&ctx.tokens[ctx.tokens.len() - 3..], [ENTITIES, ELFS, SCHEMA]);
    }

    #[test]
    fn budget_drops_tail_items() {
        let kb = toy_kb();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let lf = parse("(AND sf.engine (JOIN sf.oxidizer ox1))").unwrap();
        let per = v.encode_form(&lf).unwrap().len();
        let elfs: Vec<_> = (0..50).map(|_| ScoredCandidate { candidate: lf.clone(), score: 0.0 }).collect();
        let ctx = assemble_context("which engine", &kb, &[], &elfs, &empty_schema(), &v, 100);
        assert!(ctx.tokens.len() <= 100);
        assert!(!ctx.elfs.is_empty() && ctx.elfs.len() < 50);
        // whole items only
        let kept = ctx.elfs.len();
        assert_eq!(ctx.tokens.len(), 2 + 3 + kept * per + kept - 1);
        let tiny = assemble_context("which engine", &kb, &[], &elfs, &empty_schema(), &v, 2);
        assert!(tiny.tokens.len() <= 2 && tiny.elfs.is_empty());
    }
}
