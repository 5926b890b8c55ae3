use std::collections::{BTreeSet, HashMap};

use super::{Question, Scorer, ScorerError};
use crate::kb::TripleStore;
use crate::text;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "did", "do", "does", "for", "from", "had", "has", "have", "how",
    "in", "is", "it", "its", "of", "on", "or", "than", "that", "the", "their", "there", "these", "this", "those", "to",
    "was", "were", "what", "when", "where", "which", "who", "whom", "whose", "with",
];

const TRIGRAM_WEIGHT: f64 = 0.1;

fn stem(w: &str) -> String {
    if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") {
        w[..w.len() - 1].to_string()
    } else {
        w.to_string()
    }
}

fn terms(words: impl IntoIterator<Item = String>) -> BTreeSet<String> {
    words.into_iter().filter(|w| !STOPWORDS.contains(&w.as_str())).map(|w| stem(&w)).collect()
}

fn trigrams(words: &[String]) -> BTreeSet<String> {
    let padded: Vec<char> = format!(" {} ", words.join(" ")).chars().collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

/// Deterministic baseline scorer: IDF-weighted cosine between the distinct
/// content words of question and candidate, plus 0.1 times the Jaccard
/// similarity of their character trigrams.
///
/// Candidate names split on `.`, `_` and other punctuation. IDF follows the
/// BM25 form over the store's schema names and labels and entity labels.
#[derive(Debug, Clone, Default)]
pub struct LexicalScorer {
    idf: HashMap<String, f64>,
    unseen_idf: f64,
}

impl LexicalScorer {
    pub fn new(store: &TripleStore) -> Self {
        let mut docs: Vec<BTreeSet<String>> = Vec::new();
        for item in store.catalog().values() {
            let mut d = terms(text::name_words(&item.name));
            d.extend(terms(text::name_words(&item.label)));
            docs.push(d);
        }
        for e in store.entities() {
            if let Some(label) = store.meta(e).and_then(|m| m.label.as_deref()) {
                docs.push(terms(text::name_words(label)));
            }
        }
        let n = docs.len() as f64;
        let mut df: HashMap<String, usize> = HashMap::new();
        for d in &docs {
            for t in d {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        let idf_of = |df: f64| (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        LexicalScorer {
            idf: df.into_iter().map(|(t, k)| (t, idf_of(k as f64))).collect(),
            unseen_idf: idf_of(0.0),
        }
    }

    /// All words weigh the same.
    pub fn unweighted() -> Self {
        LexicalScorer { idf: HashMap::new(), unseen_idf: 1.0 }
    }

    fn weight(&self, t: &str) -> f64 {
        self.idf.get(t).copied().unwrap_or(self.unseen_idf)
    }

    pub fn score_text(&self, question: &str, candidate: &str) -> f64 {
        let qw = text::name_words(question);
        let cw = text::name_words(candidate);
        let (qt, ct) = (terms(qw.iter().cloned()), terms(cw.iter().cloned()));
        let norm = |s: &BTreeSet<String>| s.iter().map(|t| self.weight(t).powi(2)).sum::<f64>().sqrt();
        let denom = norm(&qt) * norm(&ct);
        let overlap = if denom > 0.0 {
            qt.intersection(&ct).map(|t| self.weight(t).powi(2)).sum::<f64>() / denom
        } else {
            0.0
        };
        let (qg, cg) = (trigrams(&qw), trigrams(&cw));
        let union = qg.union(&cg).count();
        let jaccard = if qw.is_empty() || cw.is_empty() || union == 0 {
            0.0
        } else {
            qg.intersection(&cg).count() as f64 / union as f64
        };
        overlap + TRIGRAM_WEIGHT * jaccard
    }
}

impl Scorer for LexicalScorer {
    fn score(&self, question: &Question, candidate: &str) -> Result<f64, ScorerError> {
        Ok(self.score_text(&question.text, candidate))
    }
}
