//! Entity linking, schema retrieval and candidate ranking over a pluggable
//! question/candidate [`Scorer`].

mod external;
mod lexical;
mod oracle;

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kb::{EntityId, SchemaItem, TripleStore};
use crate::sexpr::LogicalForm;
use crate::text::{self, Word};

pub use external::{ExternalScorer, LineProcess, DEFAULT_TIMEOUT};
pub use lexical::LexicalScorer;
pub use oracle::TextOracleScorer;

/// Longest alias span considered, in words.
pub const MAX_MENTION_LEN: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub text: String,
    pub tokens: Vec<Word>,
}

impl Question {
    pub fn new(text: &str) -> Self {
        Question { text: text.to_string(), tokens: text::words(text) }
    }

    /// Space-joined lower-cased tokens.
    pub fn normalized(&self) -> String {
        self.tokens.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer protocol error: {0}")]
    Protocol(String),
    #[error("scorer did not answer within {0:?}")]
    Timeout(std::time::Duration),
    #[error("scorer i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid scorer data: {0}")]
    Data(String),
}

/// Scores a (question, candidate text) pair; larger is better.
pub trait Scorer: Send + Sync {
    fn score(&self, question: &Question, candidate: &str) -> Result<f64, ScorerError>;

    /// Whether concurrent calls are independent. Non-reentrant scorers are
    /// called from one thread at a time.
    fn is_reentrant(&self) -> bool {
        true
    }
}

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("mention `{0}` has no candidate entities")]
    NoCandidates(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// A question token span `[start, end)` whose text is a known alias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl Mention {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkedEntity {
    pub mention: Mention,
    pub entity: EntityId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredCandidate<T> {
    pub candidate: T,
    pub score: f64,
}

/// All alias-matching spans of at most `max_len` words, overlaps resolved
/// longest first, then leftmost. Returned in question order.
pub fn detect_mentions(q: &Question, store: &TripleStore, max_len: usize) -> Vec<Mention> {
    let n = q.tokens.len();
    let mut hits = Vec::new();
    for start in 0..n {
        let mut key = String::new();
        for end in start + 1..=n.min(start + max_len) {
            if end > start + 1 {
                key.push(' ');
            }
            key.push_str(&q.tokens[end - 1].text);
            if store.has_alias_key(&key) {
                hits.push((start, end));
            }
        }
    }
    hits.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
    let mut taken = vec![false; n];
    let mut out = Vec::new();
    for (start, end) in hits {
        if taken[start..end].iter().any(|t| *t) {
            continue;
        }
        taken[start..end].iter_mut().for_each(|t| *t = true);
        let surface = q.text[q.tokens[start].start..q.tokens[end - 1].end].to_string();
        out.push(Mention { start, end, surface });
    }
    out.sort_by_key(|m| m.start);
    out
}

/// Alias-table candidates for a mention, popularity descending.
pub fn generate_candidates(m: &Mention, store: &TripleStore) -> Vec<(EntityId, f64)> {
    store.lookup_alias(&m.surface).to_vec()
}

/// Text describing an entity to the scorer: its label and the names of its
/// relations.
pub fn entity_context(store: &TripleStore, e: &EntityId) -> String {
    let mut out = store.label(e).to_string();
    for r in store.entity_relations(e) {
        out.push(' ');
        out.push_str(&r);
    }
    out
}

fn score_all(q: &Question, texts: &[String], scorer: &dyn Scorer) -> Result<Vec<f64>, ScorerError> {
    if scorer.is_reentrant() {
        texts.par_iter().map(|t| scorer.score(q, t)).collect()
    } else {
        texts.iter().map(|t| scorer.score(q, t)).collect()
    }
}

fn by_score_desc(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

/// Picks the candidate with the highest score; ties go to higher
/// popularity, then to the smaller entity id.
pub fn disambiguate(
    q: &Question,
    m: &Mention,
    candidates: &[(EntityId, f64)],
    store: &TripleStore,
    scorer: &dyn Scorer,
) -> Result<LinkedEntity, RetrieveError> {
    if candidates.is_empty() {
        return Err(RetrieveError::NoCandidates(m.surface.clone()));
    }
    let contexts: Vec<String> = candidates.iter().map(|(e, _)| entity_context(store, e)).collect();
    let scores = score_all(q, &contexts, scorer)?;
    let best = candidates
        .iter()
        .zip(scores)
        .min_by(|((ea, pa), sa), ((eb, pb), sb)| by_score_desc(*sa, *sb).then(by_score_desc(*pa, *pb)).then(ea.cmp(eb)))
        .expect("non-empty");
    Ok(LinkedEntity { mention: m.clone(), entity: best.0 .0.clone(), score: best.1 })
}

/// Mention detection, candidate generation and disambiguation.
pub fn link_entities(
    q: &Question,
    store: &TripleStore,
    scorer: &dyn Scorer,
    max_len: usize,
) -> Result<Vec<LinkedEntity>, RetrieveError> {
    detect_mentions(q, store, max_len)
        .into_iter()
        .filter_map(|m| {
            let candidates = generate_candidates(&m, store);
            (!candidates.is_empty()).then(|| disambiguate(q, &m, &candidates, store, scorer))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemaRetrieval {
    pub classes: Vec<ScoredCandidate<String>>,
    pub relations: Vec<ScoredCandidate<String>>,
}

fn top_k_names(q: &Question, items: Vec<&SchemaItem>, scorer: &dyn Scorer, k: usize) -> Result<Vec<ScoredCandidate<String>>, ScorerError> {
    let names: Vec<String> = items.into_iter().map(|i| i.name.clone()).collect();
    let scores = score_all(q, &names, scorer)?;
    let mut scored: Vec<ScoredCandidate<String>> =
        names.into_iter().zip(scores).map(|(candidate, score)| ScoredCandidate { candidate, score }).collect();
    scored.sort_by(|a, b| by_score_desc(a.score, b.score).then_with(|| a.candidate.cmp(&b.candidate)));
    scored.truncate(k);
    Ok(scored)
}

/// Scores every catalog class and relation; keeps the top `k` of each.
pub fn retrieve_schema(q: &Question, store: &TripleStore, scorer: &dyn Scorer, k: usize) -> Result<SchemaRetrieval, ScorerError> {
    Ok(SchemaRetrieval {
        classes: top_k_names(q, store.classes().collect(), scorer, k)?,
        relations: top_k_names(q, store.relations().collect(), scorer, k)?,
    })
}

/// Scores candidate forms by their canonical print; top `k`, ties by print.
pub fn rank_elfs(
    q: &Question,
    elfs: &[LogicalForm],
    scorer: &dyn Scorer,
    k: usize,
) -> Result<Vec<ScoredCandidate<LogicalForm>>, ScorerError> {
    let prints: Vec<String> = elfs.iter().map(LogicalForm::print_canonical).collect();
    let scores = score_all(q, &prints, scorer)?;
    let mut ranked: Vec<(String, ScoredCandidate<LogicalForm>)> = elfs
        .iter()
        .zip(prints)
        .zip(scores)
        .map(|((lf, p), score)| (p, ScoredCandidate { candidate: lf.canonicalize(), score }))
        .collect();
    ranked.sort_by(|a, b| by_score_desc(a.1.score, b.1.score).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked.into_iter().map(|(_, c)| c).collect())
}

/// Ranking loss for one question: the negative softmax probability of the
/// target, `-exp(s_t) / Σ_c exp(s_c)`, computed in log space. Lies in
/// `[-1, 0)` for finite scores.
///
/// # Panics
/// If `scores` is empty or `target` is out of range.
pub fn ranker_loss(scores: &[f64], target: usize) -> f64 {
    assert!(target < scores.len(), "target index {target} out of range for {} scores", scores.len());
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    -(scores[target] - log_z).exp()
}
