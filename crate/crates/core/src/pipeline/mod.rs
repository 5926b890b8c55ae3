//! End-to-end prediction: linking, enumeration and ranking of exemplary
//! forms, schema retrieval, context assembly, constrained generation and
//! execution-checked selection, plus evaluation metrics.
//!
//! The prediction is the first generated hypothesis, in beam order, that
//! parses, fits the schema and executes to a non-empty answer. When none
//! does, the ranked exemplary forms are scanned the same way.

mod context;
mod dataset;
mod metrics;

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::{beam_search, BeamConfig, DecodeContext, DecodeError, Grammar, TokenScorer, Vocabulary};
use crate::enumerate::{enumerate_elfs, EnumConfig, StartPoint};
use crate::exec::check_prediction;
use crate::kb::{Literal, TripleStore};
use crate::retrieve::{
    link_entities, rank_elfs, retrieve_schema, Question, RetrieveError, Scorer, ScorerError, MAX_MENTION_LEN,
};
use crate::sexpr::{parse, LogicalForm};

pub use context::{assemble_context, AssembledContext};
pub use dataset::{evaluate_dataset, mean_hits_at_1, read_jsonl, BucketStats, EvalReport, QaExample};
pub use metrics::{answer_f1, exact_match, hits_at_1, F1};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: {source}")]
    Scorer {
        stage: &'static str,
        #[source]
        source: ScorerError,
    },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    fn retrieve(stage: &'static str) -> impl FnOnce(RetrieveError) -> Self {
        move |e| match e {
            RetrieveError::Scorer(source) => PipelineError::Scorer { stage, source },
            other => PipelineError::Stage { stage, message: other.to_string() },
        }
    }

    fn scorer(stage: &'static str) -> impl FnOnce(ScorerError) -> Self {
        move |source| PipelineError::Scorer { stage, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Generated,
    ElfFallback,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub qid: String,
    pub question: String,
    /// Canonical print of the chosen form.
    pub logical_form: Option<String>,
    pub answers: Option<Vec<String>>,
    pub provenance: Provenance,
    /// Beam position of the chosen hypothesis, or ranked position of the
    /// chosen exemplary form.
    pub beam_rank: Option<usize>,
    /// Stage errors that were absorbed by a fallback.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

/// Milliseconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timing {
    pub link_ms: f64,
    pub enumerate_ms: f64,
    pub rank_ms: f64,
    pub schema_ms: f64,
    pub decode_ms: f64,
    pub validate_ms: f64,
    pub total_ms: f64,
}

/// Prediction plus what led to it.
#[derive(Debug, Clone)]
pub struct PredictOutput {
    pub prediction: Prediction,
    pub timing: Timing,
    pub context: AssembledContext,
    /// Decoded beam, best first.
    pub hypotheses: Vec<String>,
    /// All exemplary forms, best first.
    pub ranked_elfs: Vec<LogicalForm>,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub top_elf: usize,
    pub top_schema: usize,
    pub input_budget: usize,
    pub max_mention_len: usize,
    pub beam: BeamConfig,
    pub enumeration: EnumConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            top_elf: 5,
            top_schema: 10,
            input_budget: 1000,
            max_mention_len: MAX_MENTION_LEN,
            beam: BeamConfig::default(),
            enumeration: EnumConfig::default(),
        }
    }
}

pub struct Pipeline<'a> {
    store: &'a TripleStore,
    vocab: &'a Vocabulary,
    retriever: &'a dyn Scorer,
    generator: &'a dyn TokenScorer,
    grammar: Grammar,
    numbers: BTreeSet<Literal>,
    cfg: PipelineConfig,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

impl<'a> Pipeline<'a> {
    pub fn new(
        store: &'a TripleStore,
        vocab: &'a Vocabulary,
        retriever: &'a dyn Scorer,
        generator: &'a dyn TokenScorer,
        cfg: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        if generator.vocab_size() != vocab.len() {
            return Err(PipelineError::Data(format!(
                "generator vocabulary has {} tokens, tokenizer has {}",
                generator.vocab_size(),
                vocab.len()
            )));
        }
        let grammar = Grammar::for_store(vocab, store, []).map_err(|e| PipelineError::Data(e.to_string()))?;
        let numbers = store
            .triples()
            .iter()
            .filter_map(|t| t.object.as_literal())
            .filter(|l| l.is_numeric())
            .cloned()
            .collect();
        Ok(Pipeline { store, vocab, retriever, generator, grammar, numbers, cfg })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Stored numeric literals equal to numbers written in the question.
    pub fn literal_starts(&self, q: &Question) -> Vec<StartPoint> {
        let mut out = BTreeSet::new();
        for w in &q.tokens {
            let Ok(v) = w.text.parse::<f64>() else { continue };
            let Ok(probe) = Literal::float(v) else { continue };
            if let Some(stored) = self.numbers.get(&probe) {
                out.insert(stored.clone());
            }
        }
        out.into_iter().map(StartPoint::Literal).collect()
    }

    fn first_valid<'f>(&self, forms: impl Iterator<Item = (usize, &'f LogicalForm)>) -> Option<(usize, String, Vec<String>)> {
        forms.into_iter().find_map(|(i, lf)| {
            let answers = check_prediction(lf, self.store).ok()?;
            Some((i, lf.print_canonical(), answers.answer_strings().into_iter().collect()))
        })
    }

    pub fn predict(&self, qid: &str, question: &str) -> Result<PredictOutput, PipelineError> {
        let start = Instant::now();
        let mut timing = Timing::default();
        let q = Question::new(question);

        let t = Instant::now();
        let links = link_entities(&q, self.store, self.retriever, self.cfg.max_mention_len)
            .map_err(PipelineError::retrieve("entity linking"))?;
        timing.link_ms = ms(t);

        let t = Instant::now();
        let mut starts: Vec<StartPoint> = Vec::new();
        for l in &links {
            let s = StartPoint::Entity(l.entity.clone());
            if !starts.contains(&s) {
                starts.push(s);
            }
        }
        starts.extend(self.literal_starts(&q));
        let elfs = enumerate_elfs(&starts, self.store, &self.cfg.enumeration);
        timing.enumerate_ms = ms(t);

        let t = Instant::now();
        let ranked = rank_elfs(&q, &elfs, self.retriever, elfs.len()).map_err(PipelineError::scorer("form ranking"))?;
        timing.rank_ms = ms(t);

        let t = Instant::now();
        let schema = retrieve_schema(&q, self.store, self.retriever, self.cfg.top_schema)
            .map_err(PipelineError::scorer("schema retrieval"))?;
        timing.schema_ms = ms(t);

        let top = &ranked[..ranked.len().min(self.cfg.top_elf)];
        let context = assemble_context(question, self.store, &links, top, &schema, self.vocab, self.cfg.input_budget);

        let t = Instant::now();
        let mut errors = Vec::new();
        let grammar = self.grammar.with_entities(self.vocab, context.entities.iter().map(|(_, id)| id.as_str()));
        let dctx = DecodeContext::new(question, context.tokens.clone());
        let beam = match beam_search(self.generator, &dctx, Some(&grammar), &self.cfg.beam) {
            Ok(h) => h,
            Err(e @ DecodeError::Scorer(_)) => {
                log::warn!("{qid}: generation failed, using exemplary forms: {e}");
                errors.push(format!("generation: {e}"));
                Vec::new()
            }
            Err(e) => return Err(PipelineError::Stage { stage: "generation", message: e.to_string() }),
        };
        let hypotheses: Vec<String> = beam.iter().map(|h| self.vocab.decode(&h.tokens)).collect();
        timing.decode_ms = ms(t);

        let t = Instant::now();
        let parsed: Vec<(usize, LogicalForm)> =
            hypotheses.iter().enumerate().filter_map(|(i, h)| parse(h).ok().map(|lf| (i, lf))).collect();
        let mut prediction = Prediction {
            qid: qid.to_string(),
            question: question.to_string(),
            logical_form: None,
            answers: None,
            provenance: Provenance::None,
            beam_rank: None,
            errors,
        };
        let chosen = self
            .first_valid(parsed.iter().map(|(i, lf)| (*i, lf)))
            .map(|c| (Provenance::Generated, c))
            .or_else(|| self.first_valid(ranked.iter().map(|c| &c.candidate).enumerate()).map(|c| (Provenance::ElfFallback, c)));
        if let Some((provenance, (rank, form, answers))) = chosen {
            prediction.provenance = provenance;
            prediction.beam_rank = Some(rank);
            prediction.logical_form = Some(form);
            prediction.answers = Some(answers);
        }
        timing.validate_ms = ms(t);
        timing.total_ms = ms(start);

        Ok(PredictOutput {
            prediction,
            timing,
            context,
            hypotheses,
            ranked_elfs: ranked.into_iter().map(|c| c.candidate).collect(),
        })
    }

    /// Predictions in input order. Runs on the rayon pool unless a scorer is
    /// not reentrant.
    pub fn predict_all(&self, examples: &[QaExample]) -> Result<Vec<PredictOutput>, PipelineError> {
        let one = |ex: &QaExample| self.predict(&ex.qid, &ex.question);
        if self.retriever.is_reentrant() && self.generator.is_reentrant() {
            examples.par_iter().map(one).collect()
        } else {
            examples.iter().map(one).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::{OracleMixtureScorer, OracleTargets, UniformScorer};
    use crate::fixtures::toy_kb;
    use crate::retrieve::LexicalScorer;

    const CASE_ONE: &str = "name the system that has decimetre as a measurement unit";
    const CASE_ONE_FORM: &str = "(AND ms.system (JOIN ms.length_units e1))";

    #[test]
    fn oracle_generation_is_chosen_first() {
        let kb = toy_kb();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let lex = LexicalScorer::new(&kb);
        let gen = OracleMixtureScorer::single(&parse(CASE_ONE_FORM).unwrap(), 0.1, &v).unwrap();
        let p = Pipeline::new(&kb, &v, &lex, &gen, PipelineConfig::default()).unwrap();
        let out = p.predict("q1", CASE_ONE).unwrap();
        assert_eq!(out.prediction.provenance, Provenance::Generated);
        assert_eq!(out.prediction.beam_rank, Some(0));
        assert_eq!(out.prediction.answers.as_deref(), Some(&["sys1".to_string()][..]));
        assert_eq!(out.context.entities, [("decimetre".to_string(), "e1".to_string())]);
        assert!(!out.ranked_elfs.is_empty());
    }

    #[test]
    fn empty_denotations_fall_back_to_forms() {
        let kb = toy_kb();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let lex = LexicalScorer::new(&kb);
        // executes to nothing: decimetre is not an engine's oxidizer
        let bad = OracleTargets::from_json(r#"{"epsilon": 0.0, "default": [{"sexpr": "(JOIN sf.oxidizer e1)"}]}"#).unwrap();
        let gen = OracleMixtureScorer::new(&bad, &v).unwrap();
        let p = Pipeline::new(&kb, &v, &lex, &gen, PipelineConfig::default()).unwrap();
        let out = p.predict("q1", CASE_ONE).unwrap();
        assert_eq!(out.hypotheses, ["(JOIN sf.oxidizer e1)"]);
        assert_eq!(out.prediction.provenance, Provenance::ElfFallback);
        let first = &out.ranked_elfs[out.prediction.beam_rank.unwrap()];
        assert_eq!(out.prediction.logical_form.as_deref(), Some(first.print_canonical().as_str()));
        for earlier in &out.ranked_elfs[..out.prediction.beam_rank.unwrap()] {
            assert!(check_prediction(earlier, &kb).is_err());
        }
    }

    #[test]
    fn empty_store_predicts_nothing() {
        let kb = crate::kb::StoreBuilder::new().freeze();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let lex = LexicalScorer::new(&kb);
        let gen = UniformScorer::new(v.len());
        let cfg = PipelineConfig { beam: BeamConfig { max_len: 8, ..Default::default() }, ..Default::default() };
        let p = Pipeline::new(&kb, &v, &lex, &gen, cfg).unwrap();
        let out = p.predict("q", "anything at all").unwrap();
        assert_eq!(out.prediction.provenance, Provenance::None);
        assert!(out.prediction.logical_form.is_none());
    }

    #[test]
    fn numbers_in_questions_start_enumeration() {
        let kb = toy_kb();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let lex = LexicalScorer::new(&kb);
        let gen = UniformScorer::new(v.len());
        let p = Pipeline::new(&kb, &v, &lex, &gen, PipelineConfig::default()).unwrap();
        let starts = p.literal_starts(&Question::new("engines with pressure 100 or 257.0"));
        assert_eq!(starts, [StartPoint::Literal(Literal::parse("100.0^^float").unwrap())]);
    }

    #[test]
    fn vocabulary_mismatch_is_rejected() {
        let kb = toy_kb();
        let v = Vocabulary::for_store(&kb, []).unwrap();
        let lex = LexicalScorer::new(&kb);
        let gen = UniformScorer::new(3);
        assert!(matches!(Pipeline::new(&kb, &v, &lex, &gen, PipelineConfig::default()), Err(PipelineError::Data(_))));
    }
}
