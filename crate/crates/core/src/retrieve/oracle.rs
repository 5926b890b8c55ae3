use std::collections::HashMap;

use serde::Deserialize;

use super::{Question, Scorer, ScorerError};

/// Scores from a fixed table. A question-specific entry wins over a global
/// one; anything else gets the default.
///
/// File format (JSON):
/// `{"default": 0.0, "scores": {"<candidate>": 1.0}, "questions": {"<question>": {"<candidate>": 2.0}}}`
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextOracleScorer {
    #[serde(default)]
    pub default: f64,
    #[serde(default)]
    pub scores: HashMap<String, f64>,
    #[serde(default)]
    pub questions: HashMap<String, HashMap<String, f64>>,
}

impl TextOracleScorer {
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        TextOracleScorer { scores: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(), ..Default::default() }
    }

    pub fn with_question<S: Into<String>>(mut self, question: &str, pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        self.questions
            .entry(question.to_string())
            .or_default()
            .extend(pairs.into_iter().map(|(k, v)| (k.into(), v)));
        self
    }

    pub fn from_json(text: &str) -> Result<Self, ScorerError> {
        serde_json::from_str(text).map_err(|e| ScorerError::Data(e.to_string()))
    }
}

impl Scorer for TextOracleScorer {
    fn score(&self, question: &Question, candidate: &str) -> Result<f64, ScorerError> {
        Ok(self
            .questions
            .get(&question.text)
            .and_then(|m| m.get(candidate))
            .or_else(|| self.scores.get(candidate))
            .copied()
            .unwrap_or(self.default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_order() {
        let s = TextOracleScorer::from_json(r#"{"default": -1, "scores": {"a": 1}, "questions": {"q": {"a": 5}}}"#).unwrap();
        assert_eq!(s.score(&Question::new("q"), "a").unwrap(), 5.0);
        assert_eq!(s.score(&Question::new("other"), "a").unwrap(), 1.0);
        assert_eq!(s.score(&Question::new("q"), "b").unwrap(), -1.0);
        assert!(TextOracleScorer::from_json("{\"bogus\": 1}").is_err());
    }
}
