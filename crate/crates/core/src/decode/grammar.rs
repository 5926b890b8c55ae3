//! Incremental recognizer for the logical-form grammar over token ids.
//!
//! ```text
//! Expr := class | "(" Op
//! Obj  := Expr | linked entity | Lit
//! Op   := "AND" " " Expr " " Expr ")"
//!       | "JOIN" " " RelX " " Obj ")"
//!       | "COUNT" " " Expr ")"                (outermost only)
//!       | ("ARGMIN" | "ARGMAX") " " Expr " " Rel ")"
//!       | ("lt" | "le" | "gt" | "ge") " " Rel " " Lit ")"
//! RelX := Rel | "(" "R" " " Rel ")"
//! Lit  := "-"? digit+ ("." digit+)? ("^^float" | "^^integer")?
//! ```
//!
//! Classes and relations are paths in their tries. An atom slot runs every
//! interpretation in parallel and ends at the token that follows it, which is
//! always a space, a closing parenthesis or the end token.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::trie::TokenTrie;
use super::vocab::{TokenId, Vocabulary, EOS, LPAREN, RPAREN, SPACE};
use super::DecodeError;
use crate::kb::TripleStore;
use crate::sexpr::{is_class_symbol, is_plain_symbol};

/// Digits before `^^integer`; more could overflow.
const MAX_INTEGER_DIGITS: u8 = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Sym {
    Tok(TokenId),
    /// `object`: the object of a JOIN, where entities and literals may stand.
    Expr { root: bool, object: bool },
    OpHead { root: bool },
    RelX,
    Rel,
    Lit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum SlotKind {
    Atom { object: bool },
    Rel,
    Lit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EntityState {
    Open,
    Done,
    Dead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum LitState {
    Start,
    Sign,
    Int(u8),
    Dot,
    Frac,
    Tagged,
}

impl LitState {
    fn complete(self) -> bool {
        matches!(self, LitState::Frac | LitState::Tagged)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Slot {
    kind: SlotKind,
    trie: Option<usize>,
    entity: EntityState,
    lit: Option<LitState>,
}

/// What the next token has to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Operator,
    Expression,
    Relation,
    Literal,
    /// Inside a class, relation, entity or literal.
    Slot,
    Structural,
    End,
    Done,
}

/// Parse position of a partial token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrammarState {
    stack: Vec<Sym>,
    slot: Option<Slot>,
    done: bool,
}

impl GrammarState {
    pub fn is_done(&self) -> bool {
        self.done
    }
}

#[derive(Debug, Clone)]
struct LitTokens {
    digits: [TokenId; 10],
    dot: TokenId,
    minus: TokenId,
    float_tag: TokenId,
    int_tag: TokenId,
}

#[derive(Debug, Clone)]
struct OpTokens {
    and: TokenId,
    join: TokenId,
    r: TokenId,
    count: TokenId,
    argmin: TokenId,
    argmax: TokenId,
    cmp: [TokenId; 4],
}

#[derive(Debug)]
struct SchemaTables {
    classes: TokenTrie,
    relations: TokenTrie,
    class_depth: Vec<usize>,
    rel_depth: Vec<usize>,
}

/// Immutable tables for constrained decoding: class and relation tries plus
/// the linked entity tokens. The tries are shared between clones.
#[derive(Debug, Clone)]
pub struct Grammar {
    schema: Arc<SchemaTables>,
    entities: BTreeSet<TokenId>,
    lit: LitTokens,
    ops: OpTokens,
}

fn entity_tokens<'a>(vocab: &Vocabulary, entities: impl IntoIterator<Item = &'a str>) -> BTreeSet<TokenId> {
    let mut out = BTreeSet::new();
    for e in entities {
        match vocab.id(e) {
            Some(id) if is_plain_symbol(e) && !is_class_symbol(e) => {
                out.insert(id);
            }
            Some(_) => log::warn!("entity `{e}` would not read back as an entity; not decodable"),
            None => log::warn!("entity `{e}` has no token; not decodable"),
        }
    }
    out
}

fn fixed(vocab: &Vocabulary, s: &str) -> TokenId {
    vocab.id(s).expect("fixed tokens are always in the vocabulary")
}

impl Grammar {
    /// Names that could not be printed back as the same kind of symbol are
    /// dropped with a warning: classes must look like classes, entities must
    /// not, and nothing may read as a literal or operator.
    pub fn new<'a>(
        vocab: &Vocabulary,
        classes: impl IntoIterator<Item = &'a str>,
        relations: impl IntoIterator<Item = &'a str>,
        entities: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, DecodeError> {
        let mut class_trie = TokenTrie::default();
        for c in classes {
            if is_class_symbol(c) && is_plain_symbol(c) {
                class_trie.insert(c, vocab)?;
            } else {
                log::warn!("class `{c}` cannot be decoded as a class symbol; left out of the class trie");
            }
        }
        let mut rel_trie = TokenTrie::default();
        for r in relations {
            if is_plain_symbol(r) {
                rel_trie.insert(r, vocab)?;
            } else {
                log::warn!("relation `{r}` is not a plain symbol; left out of the relation trie");
            }
        }
        let ents = entity_tokens(vocab, entities);
        let digit = |d: usize| fixed(vocab, &d.to_string());
        let lit = LitTokens {
            digits: std::array::from_fn(digit),
            dot: fixed(vocab, "."),
            minus: fixed(vocab, "-"),
            float_tag: fixed(vocab, "^^float"),
            int_tag: fixed(vocab, "^^integer"),
        };
        let ops = OpTokens {
            and: fixed(vocab, "AND"),
            join: fixed(vocab, "JOIN"),
            r: fixed(vocab, "R"),
            count: fixed(vocab, "COUNT"),
            argmin: fixed(vocab, "ARGMIN"),
            argmax: fixed(vocab, "ARGMAX"),
            cmp: ["lt", "le", "gt", "ge"].map(|s| fixed(vocab, s)),
        };
        let schema = SchemaTables {
            class_depth: class_trie.min_depths(),
            rel_depth: rel_trie.min_depths(),
            classes: class_trie,
            relations: rel_trie,
        };
        Ok(Grammar { schema: Arc::new(schema), entities: ents, lit, ops })
    }

    /// Same tries with another linked-entity set.
    pub fn with_entities<'a>(&self, vocab: &Vocabulary, entities: impl IntoIterator<Item = &'a str>) -> Grammar {
        Grammar { entities: entity_tokens(vocab, entities), ..self.clone() }
    }

    /// The whole catalog of `store` with the given linked entities.
    pub fn for_store<'a>(
        vocab: &Vocabulary,
        store: &'a TripleStore,
        entities: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, DecodeError> {
        Self::new(
            vocab,
            store.classes().map(|c| c.name.as_str()),
            store.relations().map(|r| r.name.as_str()),
            entities,
        )
    }

    pub fn class_trie(&self) -> &TokenTrie {
        &self.schema.classes
    }

    pub fn relation_trie(&self) -> &TokenTrie {
        &self.schema.relations
    }

    pub fn entity_tokens(&self) -> &BTreeSet<TokenId> {
        &self.entities
    }

    pub fn initial(&self) -> GrammarState {
        GrammarState { stack: vec![Sym::Expr { root: true, object: false }], slot: None, done: false }
    }

    fn follow(st: &GrammarState) -> TokenId {
        match st.stack.last() {
            Some(Sym::Tok(t)) => *t,
            None => EOS,
            Some(other) => unreachable!("slots are always followed by a token, found {other:?}"),
        }
    }

    fn new_slot(kind: SlotKind) -> Slot {
        match kind {
            SlotKind::Atom { object } => Slot {
                kind,
                trie: Some(TokenTrie::ROOT),
                entity: if object { EntityState::Open } else { EntityState::Dead },
                lit: object.then_some(LitState::Start),
            },
            SlotKind::Rel => Slot { kind, trie: Some(TokenTrie::ROOT), entity: EntityState::Dead, lit: None },
            SlotKind::Lit => Slot { kind, trie: None, entity: EntityState::Dead, lit: Some(LitState::Start) },
        }
    }

    fn trie(&self, kind: SlotKind) -> &TokenTrie {
        if kind == SlotKind::Rel {
            &self.schema.relations
        } else {
            &self.schema.classes
        }
    }

    fn lit_step(&self, s: LitState, t: TokenId) -> Option<LitState> {
        let l = &self.lit;
        let digit = l.digits.contains(&t);
        match s {
            LitState::Start if t == l.minus => Some(LitState::Sign),
            LitState::Start | LitState::Sign if digit => Some(LitState::Int(1)),
            LitState::Int(n) if digit => Some(LitState::Int(n.saturating_add(1))),
            LitState::Int(_) if t == l.dot => Some(LitState::Dot),
            LitState::Int(n) if t == l.int_tag && n <= MAX_INTEGER_DIGITS => Some(LitState::Tagged),
            LitState::Int(_) | LitState::Frac if t == l.float_tag => Some(LitState::Tagged),
            LitState::Dot | LitState::Frac if digit => Some(LitState::Frac),
            _ => None,
        }
    }

    fn lit_next(&self, s: LitState, out: &mut Vec<TokenId>) {
        let l = &self.lit;
        match s {
            LitState::Start => {
                out.push(l.minus);
                out.extend(l.digits);
            }
            LitState::Sign => out.extend(l.digits),
            LitState::Int(n) => {
                out.extend(l.digits);
                out.push(l.dot);
                out.push(l.float_tag);
                if n <= MAX_INTEGER_DIGITS {
                    out.push(l.int_tag);
                }
            }
            LitState::Dot => out.extend(l.digits),
            LitState::Frac => {
                out.extend(l.digits);
                out.push(l.float_tag);
            }
            LitState::Tagged => {}
        }
    }

    fn slot_step(&self, s: &Slot, t: TokenId) -> Option<Slot> {
        let trie = s.trie.and_then(|n| self.trie(s.kind).child(n, t));
        let entity = match s.entity {
            EntityState::Open if self.entities.contains(&t) => EntityState::Done,
            _ => EntityState::Dead,
        };
        let lit = s.lit.and_then(|l| self.lit_step(l, t));
        (trie.is_some() || entity == EntityState::Done || lit.is_some()).then_some(Slot { kind: s.kind, trie, entity, lit })
    }

    fn slot_complete(&self, s: &Slot) -> bool {
        s.trie.is_some_and(|n| self.trie(s.kind).is_terminal(n))
            || s.entity == EntityState::Done
            || s.lit.is_some_and(LitState::complete)
    }

    fn slot_next(&self, s: &Slot, out: &mut Vec<TokenId>) {
        if let Some(n) = s.trie {
            out.extend(self.trie(s.kind).children(n));
        }
        if s.entity == EntityState::Open {
            out.extend(self.entities.iter().copied());
        }
        if let Some(l) = s.lit {
            self.lit_next(l, out);
        }
    }

    fn ops_for(&self, root: bool) -> Vec<TokenId> {
        let o = &self.ops;
        let mut out = vec![o.and, o.join, o.argmin, o.argmax];
        if root {
            out.push(o.count);
        }
        out.extend(o.cmp);
        out
    }

    /// Sorted ids the grammar accepts next. Empty when finished or dead.
    pub fn allowed(&self, st: &GrammarState) -> Vec<TokenId> {
        let mut out = Vec::new();
        if st.done {
            return out;
        }
        if let Some(slot) = &st.slot {
            self.slot_next(slot, &mut out);
            if self.slot_complete(slot) {
                out.push(Self::follow(st));
            }
        } else {
            match st.stack.last() {
                None => out.push(EOS),
                Some(Sym::Tok(t)) => out.push(*t),
                Some(Sym::Expr { object, .. }) => {
                    out.push(LPAREN);
                    self.slot_next(&Self::new_slot(SlotKind::Atom { object: *object }), &mut out);
                }
                Some(Sym::OpHead { root }) => out.extend(self.ops_for(*root)),
                Some(Sym::RelX) => {
                    out.push(LPAREN);
                    self.slot_next(&Self::new_slot(SlotKind::Rel), &mut out);
                }
                Some(Sym::Rel) => self.slot_next(&Self::new_slot(SlotKind::Rel), &mut out),
                Some(Sym::Lit) => self.slot_next(&Self::new_slot(SlotKind::Lit), &mut out),
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn category(&self, st: &GrammarState) -> Category {
        if st.done {
            return Category::Done;
        }
        if st.slot.is_some() {
            return Category::Slot;
        }
        match st.stack.last() {
            None => Category::End,
            Some(Sym::Tok(_)) => Category::Structural,
            Some(Sym::Expr { .. }) => Category::Expression,
            Some(Sym::OpHead { .. }) => Category::Operator,
            Some(Sym::RelX | Sym::Rel) => Category::Relation,
            Some(Sym::Lit) => Category::Literal,
        }
    }

    fn lit_remaining(s: LitState) -> usize {
        match s {
            LitState::Start | LitState::Sign => 2,
            LitState::Int(_) | LitState::Dot => 1,
            LitState::Frac | LitState::Tagged => 0,
        }
    }

    fn sym_min(&self, sym: &Sym) -> usize {
        let sum = |parts: &[usize]| parts.iter().fold(0usize, |a, &p| a.saturating_add(p));
        let class = self.schema.class_depth[TokenTrie::ROOT];
        let rel = self.schema.rel_depth[TokenTrie::ROOT];
        let entity = if self.entities.is_empty() { usize::MAX } else { 1 };
        let object = class.min(entity).min(Self::lit_remaining(LitState::Start));
        // tokens after "(": operator, separators, arguments and ")"; a
        // bracketed argument is never shorter than the form it would replace
        let open = sum(&[5, class, class]).min(sum(&[4, rel, object])).min(sum(&[4, class, rel])).min(sum(&[4, rel, 2]));
        let expr = class.min(open.saturating_add(1));
        let open_root = open.min(sum(&[3, expr]));
        match sym {
            Sym::Tok(_) => 1,
            Sym::Expr { root: true, .. } => class.min(open_root.saturating_add(1)),
            Sym::Expr { object: true, .. } => object,
            Sym::Expr { .. } => expr,
            Sym::OpHead { root: true } => open_root,
            Sym::OpHead { root: false } => open,
            Sym::RelX | Sym::Rel => rel,
            Sym::Lit => 2,
        }
    }

    /// Fewest tokens, excluding the end token, that complete `st`;
    /// `usize::MAX` when it cannot be completed.
    pub fn min_completion(&self, st: &GrammarState) -> usize {
        if st.done {
            return 0;
        }
        let slot = st.slot.map_or(0, |s| {
            let trie = s.trie.map_or(usize::MAX, |n| if s.kind == SlotKind::Rel { self.schema.rel_depth[n] } else { self.schema.class_depth[n] });
            let entity = if s.entity == EntityState::Done { 0 } else { usize::MAX };
            let lit = s.lit.map_or(usize::MAX, Self::lit_remaining);
            trie.min(entity).min(lit)
        });
        st.stack.iter().fold(slot, |acc, sym| acc.saturating_add(self.sym_min(sym)))
    }

    /// State after emitting `t`, or `None` when `t` is not allowed.
    pub fn next(&self, st: &GrammarState, t: TokenId) -> Option<GrammarState> {
        if st.done {
            return None;
        }
        let mut st = st.clone();
        if let Some(slot) = st.slot {
            if let Some(next) = self.slot_step(&slot, t) {
                st.slot = Some(next);
                return Some(st);
            }
            if !(self.slot_complete(&slot) && t == Self::follow(&st)) {
                return None;
            }
            st.slot = None;
        }
        let push = |stack: &mut Vec<Sym>, syms: &[Sym]| stack.extend(syms.iter().rev());
        let start = |st: &mut GrammarState, kind: SlotKind| -> bool {
            match self.slot_step(&Self::new_slot(kind), t) {
                Some(s) => {
                    st.slot = Some(s);
                    true
                }
                None => false,
            }
        };
        let o = &self.ops;
        let ok = match st.stack.pop() {
            None => {
                st.done = t == EOS;
                st.done
            }
            Some(Sym::Tok(x)) => x == t,
            Some(Sym::Expr { root, .. }) if t == LPAREN => {
                st.stack.push(Sym::OpHead { root });
                true
            }
            Some(Sym::Expr { object, .. }) => start(&mut st, SlotKind::Atom { object }),
            Some(Sym::OpHead { root }) => {
                let sp = Sym::Tok(SPACE);
                let rp = Sym::Tok(RPAREN);
                let e = Sym::Expr { root: false, object: false };
                let object = Sym::Expr { root: false, object: true };
                if t == o.and {
                    push(&mut st.stack, &[sp, e, sp, e, rp]);
                } else if t == o.join {
                    push(&mut st.stack, &[sp, Sym::RelX, sp, object, rp]);
                } else if t == o.count && root {
                    push(&mut st.stack, &[sp, e, rp]);
                } else if t == o.argmin || t == o.argmax {
                    push(&mut st.stack, &[sp, e, sp, Sym::Rel, rp]);
                } else if o.cmp.contains(&t) {
                    push(&mut st.stack, &[sp, Sym::Rel, sp, Sym::Lit, rp]);
                } else {
                    return None;
                }
                true
            }
            Some(Sym::RelX) if t == LPAREN => {
                push(&mut st.stack, &[Sym::Tok(o.r), Sym::Tok(SPACE), Sym::Rel, Sym::Tok(RPAREN)]);
                true
            }
            Some(Sym::RelX | Sym::Rel) => start(&mut st, SlotKind::Rel),
            Some(Sym::Lit) => start(&mut st, SlotKind::Lit),
        };
        ok.then_some(st)
    }

    /// Replays `ids` from the initial state.
    pub fn replay(&self, ids: &[TokenId]) -> Option<GrammarState> {
        ids.iter().try_fold(self.initial(), |st, &t| self.next(&st, t))
    }

    /// Whether `ids` (ending with the end token) is a complete sentence.
    pub fn accepts(&self, ids: &[TokenId]) -> bool {
        self.replay(ids).is_some_and(|s| s.done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy_kb;
    use crate::sexpr::{parse, LogicalForm};

    fn setup() -> (Vocabulary, Grammar) {
        let kb = toy_kb();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let g = Grammar::for_store(&v, &kb, ["e1", "sys1", "ox1"]).unwrap();
        (v, g)
    }

    fn ids(v: &Vocabulary, text: &str) -> Vec<TokenId> {
        let mut ids = v.encode_form(&parse(text).unwrap()).unwrap();
        ids.push(EOS);
        ids
    }

    #[test]
    fn accepts_well_formed_forms() {
        let (v, g) = setup();
        for f in [
            "(AND sf.engine (AND (JOIN sf.oxidizer ox1) (lt sf.chamber_pressure 257.0^^float)))",
            "(COUNT (JOIN (R ms.length_units) sys1))",
            "(ARGMAX sf.engine sf.chamber_pressure)",
            "(JOIN sf.chamber_pressure 257^^integer)",
            "sf.engine",
        ] {
            assert!(g.accepts(&ids(&v, f)), "{f}");
        }
    }

    #[test]
    fn rejects_unlinked_entities_and_inner_count() {
        let (v, g) = setup();
        assert!(!g.accepts(&ids(&v, "(JOIN sf.oxidizer eng1)")));
        let inner = LogicalForm::and(LogicalForm::class("sf.engine"), LogicalForm::count(LogicalForm::class("sf.engine")));
        let mut seq = v.encode_form(&inner).unwrap();
        seq.push(EOS);
        assert!(!g.accepts(&seq));
    }

    #[test]
    fn entities_and_literals_only_as_join_objects() {
        let (v, g) = setup();
        for f in ["e1", "257.0^^float", "(AND sf.engine 257.0^^float)", "(AND sf.engine e1)", "(COUNT e1)", "(ARGMAX e1 sf.chamber_pressure)"] {
            assert!(!g.accepts(&ids(&v, f)), "{f}");
        }
        assert!(g.accepts(&ids(&v, "(JOIN (R sf.oxidizer) 1^^integer)")));
        let first = g.allowed(&g.initial());
        assert!(!first.contains(&v.id("0").unwrap()) && !first.contains(&v.id("e1").unwrap()));
    }

    #[test]
    fn after_open_paren_only_operators() {
        let (v, g) = setup();
        let st = g.replay(&[LPAREN]).unwrap();
        let names: Vec<&str> = g.allowed(&st).iter().map(|&t| v.token(t)).collect();
        assert_eq!(names, ["AND", "JOIN", "COUNT", "ARGMIN", "ARGMAX", "lt", "le", "gt", "ge"]);
        assert_eq!(g.category(&st), Category::Operator);
        // COUNT is only offered at the outermost level
        let inner = g.replay(&ids(&v, "(AND sf.engine sf.engine)")[..4]).unwrap();
        assert!(!g.allowed(&inner).contains(&v.id("COUNT").unwrap()));
    }

    #[test]
    fn relation_slot_follows_the_trie() {
        let (v, g) = setup();
        let prefix: Vec<TokenId> = ids(&v, "(JOIN sf.oxidizer ox1)")[..5].to_vec();
        assert_eq!(v.decode(&prefix), "(JOIN sf.");
        let st = g.replay(&prefix).unwrap();
        let node = g.relation_trie().walk(&v.encode_schema_name("sf.").unwrap()).unwrap();
        let expected: Vec<TokenId> = g.relation_trie().children(node).collect();
        assert_eq!(g.allowed(&st), expected);
    }

    #[test]
    fn finished_sentence_allows_only_end() {
        let (v, g) = setup();
        let mut seq = ids(&v, "(ARGMAX sf.engine sf.chamber_pressure)");
        seq.pop();
        let st = g.replay(&seq).unwrap();
        assert_eq!(g.allowed(&st), [EOS]);
        let done = g.next(&st, EOS).unwrap();
        assert!(done.is_done());
        assert!(g.allowed(&done).is_empty());
    }

    #[test]
    fn literal_syntax() {
        let (v, g) = setup();
        let prefix = &ids(&v, "(lt sf.chamber_pressure 257.0^^float)")[..9];
        let st = g.replay(prefix).unwrap();
        assert_eq!(g.category(&st), Category::Literal);
        let allowed: Vec<&str> = g.allowed(&st).iter().map(|&t| v.token(t)).collect();
        assert_eq!(allowed, ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "-"]);
        // a bare integer without tag is not a complete literal
        let mut bare: Vec<TokenId> = prefix.to_vec();
        bare.extend(["2", "5"].map(|d| v.id(d).unwrap()));
        let st = g.replay(&bare).unwrap();
        assert!(!g.allowed(&st).contains(&RPAREN));
        assert!(g.allowed(&st).contains(&v.id("^^integer").unwrap()));
    }

    #[test]
    fn shortest_completion() {
        let (v, g) = setup();
        // "sf.engine" is three tokens
        assert_eq!(g.min_completion(&g.initial()), 3);
        let seq = ids(&v, "(JOIN sf.oxidizer ox1)");
        // "(JOIN " then the shortest relation (3 tokens), " ", an entity, ")"
        let st = g.replay(&seq[..3]).unwrap();
        assert_eq!(g.min_completion(&st), 6);
        let st = g.replay(&seq[..seq.len() - 1]).unwrap();
        assert_eq!(g.min_completion(&st), 0);
    }

    #[test]
    fn empty_tries_dead_end_schema_slots() {
        let kb = toy_kb();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let g = Grammar::new(&v, [], [], []).unwrap();
        let st = g.replay(&[LPAREN, v.id("JOIN").unwrap(), SPACE]).unwrap();
        assert_eq!(g.allowed(&st), [LPAREN]);
        let st = g.replay(&[LPAREN, v.id("JOIN").unwrap(), SPACE, LPAREN, v.id("R").unwrap(), SPACE]).unwrap();
        assert!(g.allowed(&st).is_empty());
    }

    #[test]
    fn undecodable_names_are_filtered() {
        let kb = toy_kb();
        let mut b = crate::decode::vocab::VocabBuilder::new();
        b.add_store(&kb);
        for n in ["m.0x", "ab.cd"] {
            b.add_entity(n).unwrap();
        }
        let v = b.build();
        let g = Grammar::new(&v, ["e1", "sf.engine"], ["sf.oxidizer"], ["ab.cd", "m.0x"]).unwrap();
        assert_eq!(g.class_trie().items().len(), 1);
        assert_eq!(g.entity_tokens().len(), 1);
        assert!(g.entity_tokens().contains(&v.id("m.0x").unwrap()));
    }
}
