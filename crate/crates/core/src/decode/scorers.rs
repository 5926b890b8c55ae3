use std::collections::HashMap;

use serde::Deserialize;

use super::vocab::{TokenId, Vocabulary, BOS, EOS};
use super::DecodeError;
use crate::retrieve::ScorerError;
use crate::sexpr::{parse, LogicalForm};

/// Input the generator conditions on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeContext {
    pub question: String,
    pub tokens: Vec<TokenId>,
}

impl DecodeContext {
    pub fn new(question: &str, tokens: Vec<TokenId>) -> Self {
        DecodeContext { question: question.to_string(), tokens }
    }
}

/// Autoregressive next-token distribution.
///
/// Rows hold one natural-log probability per vocabulary id and must be
/// deterministic for fixed inputs. `prefix` excludes the begin token.
pub trait TokenScorer: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn next_log_probs(&self, ctx: &DecodeContext, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError>;

    fn is_reentrant(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct UniformScorer {
    size: usize,
}

impl UniformScorer {
    pub fn new(vocab_size: usize) -> Self {
        UniformScorer { size: vocab_size }
    }
}

impl TokenScorer for UniformScorer {
    fn vocab_size(&self) -> usize {
        self.size
    }

    fn next_log_probs(&self, _: &DecodeContext, _: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        Ok(vec![-(self.size as f64).ln(); self.size])
    }
}

/// Add-one smoothed n-gram model over logical-form tokens. Histories are
/// padded with the begin token and the context is ignored.
#[derive(Debug, Clone)]
pub struct NgramScorer {
    order: usize,
    size: usize,
    counts: HashMap<Vec<TokenId>, (u64, HashMap<TokenId, u64>)>,
}

impl NgramScorer {
    /// `corpus` sequences exclude the end token, which is appended.
    pub fn train(corpus: &[Vec<TokenId>], order: usize, vocab_size: usize) -> Self {
        assert!(order >= 1, "n-gram order is at least 1");
        let mut counts: HashMap<Vec<TokenId>, (u64, HashMap<TokenId, u64>)> = HashMap::new();
        for seq in corpus {
            let mut padded = vec![BOS; order - 1];
            padded.extend(seq);
            padded.push(EOS);
            for w in padded.windows(order) {
                let (hist, next) = w.split_at(order - 1);
                let entry = counts.entry(hist.to_vec()).or_default();
                entry.0 += 1;
                *entry.1.entry(next[0]).or_default() += 1;
            }
        }
        NgramScorer { order, size: vocab_size, counts }
    }

    /// Trains on s-expressions, one per line; blank lines are skipped.
    pub fn train_on_forms(text: &str, vocab: &Vocabulary, order: usize) -> Result<Self, DecodeError> {
        let corpus = corpus_forms(text)?
            .iter()
            .map(|lf| vocab.encode_form(&lf.canonicalize()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::train(&corpus, order, vocab.len()))
    }

    fn history(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let n = self.order - 1;
        let mut h = vec![BOS; n.saturating_sub(prefix.len())];
        h.extend(&prefix[prefix.len().saturating_sub(n)..]);
        h
    }
}

/// Parses one s-expression per non-blank line.
pub fn corpus_forms(text: &str) -> Result<Vec<LogicalForm>, DecodeError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse(l.trim()).map_err(|e| DecodeError::Data(format!("line {}: {e}", i + 1))))
        .collect()
}

impl TokenScorer for NgramScorer {
    fn vocab_size(&self) -> usize {
        self.size
    }

    fn next_log_probs(&self, _: &DecodeContext, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let v = self.size as f64;
        match self.counts.get(&self.history(prefix)) {
            None => Ok(vec![-v.ln(); self.size]),
            Some((total, next)) => {
                let denom = (*total as f64 + v).ln();
                let mut row = vec![-denom; self.size];
                for (&t, &c) in next {
                    row[t as usize] = (c as f64 + 1.0).ln() - denom;
                }
                Ok(row)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTarget {
    pub sexpr: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Weighted target forms per question, as read from JSON:
/// `{"epsilon": 0.1, "default": [{"sexpr": "...", "weight": 1.0}], "questions": {"<question>": [...]}}`
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTargets {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub default: Vec<OracleTarget>,
    #[serde(default)]
    pub questions: HashMap<String, Vec<OracleTarget>>,
}

impl OracleTargets {
    pub fn from_json(text: &str) -> Result<Self, DecodeError> {
        serde_json::from_str(text).map_err(|e| DecodeError::Data(e.to_string()))
    }

    /// Every target form, for building a vocabulary that covers them.
    pub fn forms(&self) -> Result<Vec<LogicalForm>, DecodeError> {
        self.default
            .iter()
            .chain(self.questions.values().flatten())
            .map(|t| parse(&t.sexpr).map_err(|e| DecodeError::Data(format!("`{}`: {e}", t.sexpr))))
            .collect()
    }
}

type Targets = Vec<(Vec<TokenId>, f64)>;

/// Mixture of noisy copies of target sequences.
///
/// Each target puts `1 - ε` on its next token and spreads `ε` evenly over
/// the rest, or is uniform once past its end. Components are weighted by
/// their prior weight times the likelihood of the prefix, so the next-token
/// row is the exact conditional of the mixture. A prefix no target explains
/// gets a uniform row.
#[derive(Debug, Clone)]
pub struct OracleMixtureScorer {
    epsilon: f64,
    size: usize,
    default: Targets,
    questions: HashMap<String, Targets>,
}

impl OracleMixtureScorer {
    pub fn new(targets: &OracleTargets, vocab: &Vocabulary) -> Result<Self, DecodeError> {
        if !(0.0..1.0).contains(&targets.epsilon) {
            return Err(DecodeError::Data(format!("epsilon must lie in [0, 1), got {}", targets.epsilon)));
        }
        let encode = |list: &[OracleTarget]| -> Result<Targets, DecodeError> {
            list.iter()
                .map(|t| {
                    if !(t.weight >= 0.0 && t.weight.is_finite()) {
                        return Err(DecodeError::Data(format!("bad weight {} for `{}`", t.weight, t.sexpr)));
                    }
                    let lf = parse(&t.sexpr).map_err(|e| DecodeError::Data(format!("`{}`: {e}", t.sexpr)))?;
                    let mut ids = vocab.encode_form(&lf)?;
                    ids.push(EOS);
                    Ok((ids, t.weight))
                })
                .collect()
        };
        Ok(OracleMixtureScorer {
            epsilon: targets.epsilon,
            size: vocab.len(),
            default: encode(&targets.default)?,
            questions: targets
                .questions
                .iter()
                .map(|(q, l)| Ok((q.clone(), encode(l)?)))
                .collect::<Result<_, DecodeError>>()?,
        })
    }

    /// A single target form for every question.
    pub fn single(lf: &LogicalForm, epsilon: f64, vocab: &Vocabulary) -> Result<Self, DecodeError> {
        let targets = OracleTargets {
            epsilon,
            default: vec![OracleTarget { sexpr: lf.to_string(), weight: 1.0 }],
            questions: HashMap::new(),
        };
        Self::new(&targets, vocab)
    }

    fn targets(&self, question: &str) -> &Targets {
        self.questions.get(question).unwrap_or(&self.default)
    }

    fn log_on(&self) -> f64 {
        (1.0 - self.epsilon).ln()
    }

    fn log_off(&self) -> f64 {
        (self.epsilon / (self.size as f64 - 1.0)).ln()
    }

    fn log_step(&self, target: &[TokenId], pos: usize, t: TokenId) -> f64 {
        match target.get(pos) {
            Some(&want) if want == t => self.log_on(),
            Some(_) => self.log_off(),
            None => -(self.size as f64).ln(),
        }
    }
}

impl TokenScorer for OracleMixtureScorer {
    fn vocab_size(&self) -> usize {
        self.size
    }

    fn next_log_probs(&self, ctx: &DecodeContext, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let v = self.size;
        let uniform = vec![-(v as f64).ln(); v];
        let targets = self.targets(&ctx.question);
        let log_w: Vec<f64> = targets
            .iter()
            .map(|(seq, w)| w.ln() + prefix.iter().enumerate().map(|(i, &t)| self.log_step(seq, i, t)).sum::<f64>())
            .collect();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(uniform);
        }
        let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let pos = prefix.len();
        let off = self.log_off().exp();
        let mut base = 0.0;
        let mut peaks: HashMap<TokenId, f64> = HashMap::new();
        for ((seq, _), wj) in targets.iter().zip(&w) {
            match seq.get(pos) {
                Some(&t) => {
                    base += wj * off;
                    *peaks.entry(t).or_default() += wj * (self.log_on().exp() - off);
                }
                None => base += wj / v as f64,
            }
        }
        let mut row = vec![(base / total).ln(); v];
        for (t, p) in peaks {
            row[t as usize] = ((base + p) / total).ln();
        }
        Ok(row)
    }
}
