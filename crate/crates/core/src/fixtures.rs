//! Test fixtures: the small reference store, random stores and random
//! logical forms. Used by unit tests, integration tests and benchmarks.

use std::collections::HashMap;
use std::io::Cursor;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decode::{DecodeContext, TokenId, TokenScorer};
use crate::kb::{AliasPolicy, EntityId, Literal, Node, StoreBuilder, Triple, TripleFormat, TripleStore};
use crate::retrieve::ScorerError;
use crate::sexpr::{CmpOp, LogicalForm};

pub const TOY_TRIPLES: &str = include_str!("../fixtures/toy_kb.tsv");
pub const TOY_LABELS: &str = include_str!("../fixtures/toy_labels.tsv");
pub const TOY_ALIASES: &str = include_str!("../fixtures/toy_aliases.tsv");

/// The seven-triple reference store: a metric system with one length unit
/// and two engines with chamber pressures and an oxidizer.
pub fn toy_kb() -> TripleStore {
    toy_builder().freeze()
}

pub fn toy_builder() -> StoreBuilder {
    let mut b = StoreBuilder::new();
    b.load_triples(Cursor::new(TOY_TRIPLES), TripleFormat::Tsv).expect("fixture triples");
    b.load_labels(Cursor::new(TOY_LABELS)).expect("fixture labels");
    b.load_aliases(Cursor::new(TOY_ALIASES), AliasPolicy::Strict).expect("fixture aliases");
    b
}

/// Shape of a random store.
#[derive(Debug, Clone, Copy)]
pub struct RandomStoreConfig {
    pub entities: usize,
    pub classes: usize,
    pub entity_relations: usize,
    pub literal_relations: usize,
    pub triples: usize,
}

impl Default for RandomStoreConfig {
    fn default() -> Self {
        RandomStoreConfig { entities: 30, classes: 4, entity_relations: 5, literal_relations: 3, triples: 60 }
    }
}

/// Builds a random store with entities `n0..`, classes `cls.k0..`,
/// entity-valued relations `rel.r0..` and numeric relations `num.v0..`.
/// Numeric values are drawn from a small grid so that ties and shared
/// literal objects occur. Every entity gets a label and an alias.
pub fn random_store(rng: &mut impl Rng, cfg: RandomStoreConfig) -> TripleStore {
    let mut b = StoreBuilder::new();
    let n = cfg.entities.max(1);
    let ent = |i: usize| format!("n{i}");
    for i in 0..n {
        let id = EntityId::new(ent(i));
        b.set_label(&id, &format!("item {i}"));
        b.add_alias(&format!("item {i}"), &id, rng.gen_range(0.0..1.0));
        if cfg.classes > 0 && rng.gen_bool(0.7) {
            let c = format!("cls.k{}", rng.gen_range(0..cfg.classes));
            b.add_triple(Triple::new(&ent(i), "type_rel", Node::entity(&c))).expect("type triple");
        }
    }
    for _ in 0..cfg.triples {
        let s = ent(rng.gen_range(0..n));
        let numeric = cfg.literal_relations > 0 && (cfg.entity_relations == 0 || rng.gen_bool(0.35));
        let triple = if numeric {
            let r = format!("num.v{}", rng.gen_range(0..cfg.literal_relations));
            let v = f64::from(rng.gen_range(0..12u8)) * 0.5;
            let lit = if rng.gen_bool(0.2) {
                Literal::integer(v as i64)
            } else {
                Literal::tagged_float(v, "float").expect("finite")
            };
            Triple::new(&s, &r, Node::Literal(lit))
        } else {
            let r = format!("rel.r{}", rng.gen_range(0..cfg.entity_relations.max(1)));
            Triple::new(&s, &r, Node::entity(&ent(rng.gen_range(0..n))))
        };
        b.add_triple(triple).expect("random triple");
    }
    b.freeze()
}

/// Names a random logical form may draw from.
#[derive(Debug, Clone, Default)]
pub struct LfPool {
    pub entities: Vec<String>,
    pub classes: Vec<String>,
    pub relations: Vec<String>,
    pub literals: Vec<Literal>,
}

impl LfPool {
    /// Names and literal objects present in `store`. The type relation is
    /// left out of the relation pool.
    pub fn from_store(store: &TripleStore) -> Self {
        let mut literals: Vec<Literal> = store
            .triples()
            .iter()
            .filter_map(|t| t.object.as_literal().cloned())
            .collect();
        literals.sort();
        literals.dedup();
        if literals.is_empty() {
            literals.push(Literal::tagged_float(1.0, "float").expect("finite"));
        }
        LfPool {
            entities: store.entities().iter().map(|e| e.as_str().to_string()).collect(),
            classes: store.classes().map(|c| c.name.clone()).collect(),
            relations: store
                .relations()
                .filter(|r| r.name != store.type_relation())
                .map(|r| r.name.clone())
                .collect(),
            literals,
        }
    }

    /// A synthetic pool with awkward but legal spellings, for syntax tests.
    pub fn synthetic() -> Self {
        LfPool {
            entities: ["m.01p5ld", "m.0l2l_", "e1", "g.11b6x", "x"].map(String::from).to_vec(),
            classes: ["sf.engine", "measurement_unit.measurement_system", "ab.c_d.e"].map(String::from).to_vec(),
            relations: ["sf.chamber_pressure", "ms.length_units", "a.b.c", "type_rel"].map(String::from).to_vec(),
            literals: vec![
                Literal::tagged_float(257.0, "float").expect("finite"),
                Literal::float(-0.125).expect("finite"),
                Literal::float(1e-7).expect("finite"),
                Literal::integer(42),
                Literal::integer(-3),
                Literal::datetime("2001-05-01"),
                Literal::string("say \"hi\" (now)"),
                Literal::string("tab\there"),
            ],
        }
    }
}

fn pick<'a, T>(rng: &mut impl Rng, xs: &'a [T]) -> Option<&'a T> {
    xs.choose(rng)
}

/// Random logical form of at most `depth` nested operators. COUNT appears
/// only at the root. Slots whose pool is empty fall back to other shapes.
pub fn random_lf(rng: &mut impl Rng, pool: &LfPool, depth: usize) -> LogicalForm {
    let sub = random_set_lf(rng, pool, depth);
    if rng.gen_bool(0.1) {
        LogicalForm::count(sub)
    } else {
        sub
    }
}

fn random_atom(rng: &mut impl Rng, pool: &LfPool) -> LogicalForm {
    let choice = rng.gen_range(0..10);
    if choice < 5 {
        if let Some(e) = pick(rng, &pool.entities) {
            return LogicalForm::entity(e);
        }
    }
    if choice < 8 {
        if let Some(c) = pick(rng, &pool.classes) {
            return LogicalForm::class(c);
        }
    }
    if let Some(l) = pick(rng, &pool.literals) {
        return LogicalForm::Literal(l.clone());
    }
    LogicalForm::entity(pick(rng, &pool.entities).map(String::as_str).unwrap_or("x"))
}

fn random_set_lf(rng: &mut impl Rng, pool: &LfPool, depth: usize) -> LogicalForm {
    if depth == 0 || pool.relations.is_empty() || rng.gen_bool(0.25) {
        return random_atom(rng, pool);
    }
    let rel = pick(rng, &pool.relations).expect("non-empty").clone();
    match rng.gen_range(0..10) {
        0..=3 => {
            let x = random_set_lf(rng, pool, depth - 1);
            if rng.gen_bool(0.5) {
                LogicalForm::join(&rel, x)
            } else {
                LogicalForm::join_reverse(&rel, x)
            }
        }
        4..=6 => LogicalForm::and(random_set_lf(rng, pool, depth - 1), random_set_lf(rng, pool, depth - 1)),
        7 => {
            let x = random_set_lf(rng, pool, depth - 1);
            if rng.gen_bool(0.5) {
                LogicalForm::argmin(x, &rel)
            } else {
                LogicalForm::argmax(x, &rel)
            }
        }
        _ => {
            let comparable: Vec<&Literal> = pool.literals.iter().filter(|l| l.scalar().is_some()).collect();
            match comparable.choose(rng) {
                Some(v) => LogicalForm::compare(*CmpOp::ALL.choose(rng).expect("four ops"), &rel, (*v).clone()),
                None => LogicalForm::join(&rel, random_atom(rng, pool)),
            }
        }
    }
}

/// Seeded scorer with arbitrary but reproducible rows: each row is a
/// softmax over logits drawn from a generator keyed by the seed and prefix.
#[derive(Debug, Clone)]
pub struct RandomTokenScorer {
    seed: u64,
    size: usize,
    spread: f64,
}

fn mix(mut h: u64, x: u64) -> u64 {
    // splitmix64 step
    h = h.wrapping_add(x).wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// In-place log-softmax.
pub fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return;
    }
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    for l in logits {
        *l -= lse;
    }
}

impl RandomTokenScorer {
    /// Logits are uniform in `[0, spread)`.
    pub fn new(seed: u64, vocab_size: usize, spread: f64) -> Self {
        RandomTokenScorer { seed, size: vocab_size, spread }
    }
}

impl TokenScorer for RandomTokenScorer {
    fn vocab_size(&self) -> usize {
        self.size
    }

    fn next_log_probs(&self, _: &DecodeContext, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let key = prefix.iter().fold(mix(self.seed, prefix.len() as u64), |h, &t| mix(h, t as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut row: Vec<f64> = (0..self.size).map(|_| rng.gen::<f64>() * self.spread).collect();
        log_softmax(&mut row);
        Ok(row)
    }
}

/// Adds fixed log-space bonuses to chosen tokens of another scorer and
/// renormalizes.
pub struct BiasedScorer<S> {
    pub inner: S,
    pub bias: HashMap<TokenId, f64>,
}

impl<S: TokenScorer> TokenScorer for BiasedScorer<S> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_log_probs(&self, ctx: &DecodeContext, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let mut row = self.inner.next_log_probs(ctx, prefix)?;
        for (&t, &b) in &self.bias {
            if let Some(v) = row.get_mut(t as usize) {
                *v += b;
            }
        }
        log_softmax(&mut row);
        Ok(row)
    }

    fn is_reentrant(&self) -> bool {
        self.inner.is_reentrant()
    }
}
