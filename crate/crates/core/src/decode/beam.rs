use std::cmp::Ordering;

use super::grammar::{GrammarState, Grammar};
use super::scorers::{DecodeContext, TokenScorer};
use super::vocab::{TokenId, BOS, EOS};
use super::DecodeError;
use crate::retrieve::ScorerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Output tokens including the end token.
    pub max_len: usize,
    pub constrained: bool,
    /// Rank by mean instead of summed log-probability.
    pub length_normalize: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { beam_size: 10, max_len: 128, constrained: true, length_normalize: false }
    }
}

/// A finished beam entry; `tokens` ends with the end token.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub log_prob: f64,
    pub score: f64,
}

impl Hypothesis {
    /// Tokens without the end token.
    pub fn body(&self) -> &[TokenId] {
        self.tokens.strip_suffix(&[EOS]).unwrap_or(&self.tokens)
    }
}

struct Live {
    tokens: Vec<TokenId>,
    log_prob: f64,
    state: Option<GrammarState>,
}

fn score(log_prob: f64, len: usize, cfg: &BeamConfig) -> f64 {
    if cfg.length_normalize && len > 0 {
        log_prob / len as f64
    } else {
        log_prob
    }
}

/// Higher score first, then the smaller token sequence.
fn rank(a: (f64, &[TokenId]), b: (f64, &[TokenId])) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

fn checked_row(scorer: &dyn TokenScorer, ctx: &DecodeContext, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
    let row = scorer.next_log_probs(ctx, prefix)?;
    if row.len() != scorer.vocab_size() {
        return Err(ScorerError::Protocol(format!("row has {} entries for a vocabulary of {}", row.len(), scorer.vocab_size())));
    }
    if row.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(ScorerError::Protocol("row contains NaN or +inf".into()));
    }
    Ok(row)
}

/// Beam search returning at most `beam_size` finished hypotheses, best
/// first. Each step keeps the `beam_size` best expansions; those ending in
/// the end token retire. In constrained mode only tokens the grammar allows
/// are expanded, and only when the grammar can still finish within
/// `max_len`. An empty result means every hypothesis dead-ended.
pub fn beam_search(
    scorer: &dyn TokenScorer,
    ctx: &DecodeContext,
    grammar: Option<&Grammar>,
    cfg: &BeamConfig,
) -> Result<Vec<Hypothesis>, DecodeError> {
    let grammar = match (cfg.constrained, grammar) {
        (true, None) => return Err(DecodeError::MissingGrammar),
        (true, g) => g,
        (false, _) => None,
    };
    if cfg.beam_size == 0 || cfg.max_len == 0 {
        return Ok(Vec::new());
    }
    let vocab_size = scorer.vocab_size();
    let mut live = vec![Live { tokens: Vec::new(), log_prob: 0.0, state: grammar.map(Grammar::initial) }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    while !live.is_empty() {
        let mut cands: Vec<(usize, TokenId, f64, Option<GrammarState>)> = Vec::new();
        for (i, b) in live.iter().enumerate() {
            let row = checked_row(scorer, ctx, &b.tokens)?;
            let len = b.tokens.len() + 1;
            let allowed: Vec<TokenId> = match (grammar, &b.state) {
                (Some(g), Some(s)) => g.allowed(s),
                _ => (0..vocab_size as TokenId).filter(|&t| t != BOS).collect(),
            };
            for t in allowed {
                if t != EOS && len >= cfg.max_len {
                    continue;
                }
                let lp = *row.get(t as usize).ok_or_else(|| {
                    ScorerError::Protocol(format!("token {t} is outside the scorer's vocabulary of {vocab_size}"))
                })?;
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                let state = match (grammar, &b.state) {
                    (Some(g), Some(s)) => {
                        let next = g.next(s, t).expect("allowed tokens advance the grammar");
                        // room for the shortest completion and the end token
                        let needed = if t == EOS { 0 } else { g.min_completion(&next).saturating_add(1) };
                        if len.saturating_add(needed) > cfg.max_len {
                            continue;
                        }
                        Some(next)
                    }
                    _ => None,
                };
                cands.push((i, t, b.log_prob + lp, state));
            }
        }
        let len = |i: usize| live[i].tokens.len() + 1;
        cands.sort_by(|&(i, t, lp, _), &(j, u, mp, _)| {
            score(lp, len(i), cfg)
                .total_cmp(&score(mp, len(j), cfg))
                .reverse()
                .then_with(|| live[i].tokens.cmp(&live[j].tokens))
                .then_with(|| t.cmp(&u))
        });
        let mut next = Vec::new();
        for (i, t, lp, state) in cands.into_iter().take(cfg.beam_size) {
            let mut tokens = live[i].tokens.clone();
            tokens.push(t);
            if t == EOS {
                finished.push(Hypothesis { score: score(lp, tokens.len(), cfg), tokens, log_prob: lp });
            } else {
                next.push(Live { tokens, log_prob: lp, state });
            }
        }
        live = next;
        // log-probabilities only fall, so no live beam can overtake the k-th finished one
        if !cfg.length_normalize && finished.len() >= cfg.beam_size {
            finished.sort_by(|a, b| rank((a.score, &a.tokens), (b.score, &b.tokens)));
            let kth = finished[cfg.beam_size - 1].score;
            if live.iter().all(|b| b.log_prob < kth) {
                break;
            }
        }
    }
    finished.sort_by(|a, b| rank((a.score, &a.tokens), (b.score, &b.tokens)));
    finished.truncate(cfg.beam_size);
    Ok(finished)
}

/// Negative log-likelihood of `target` (ending with the end token) under
/// teacher forcing.
pub fn sequence_nll(scorer: &dyn TokenScorer, ctx: &DecodeContext, target: &[TokenId]) -> Result<f64, DecodeError> {
    if target.last() != Some(&EOS) {
        return Err(DecodeError::Data("target must end with the end token".into()));
    }
    let mut nll = 0.0;
    for i in 0..target.len() {
        let row = checked_row(scorer, ctx, &target[..i])?;
        let lp = *row
            .get(target[i] as usize)
            .ok_or_else(|| ScorerError::Protocol(format!("token {} is outside the scorer's vocabulary", target[i])))?;
        nll -= lp;
    }
    Ok(nll)
}
