use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::metrics::{answer_f1, exact_match, hits_at_1};
use super::{PipelineError, Prediction};
use crate::exec::evaluate;
use crate::kb::TripleStore;
use crate::sexpr::{parse, LogicalForm};

/// One dataset line: `{"qid", "question", "sexpr"?, "answers"?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaExample {
    pub qid: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sexpr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<Vec<String>>,
}

impl QaExample {
    pub fn gold_form(&self) -> Result<Option<LogicalForm>, PipelineError> {
        self.sexpr
            .as_deref()
            .map(|s| parse(s).map_err(|e| PipelineError::Data(format!("{}: gold form: {e}", self.qid))))
            .transpose()
    }

    /// Fills missing gold answers by executing the gold form.
    pub fn with_executed_answers(mut self, store: &TripleStore) -> Result<Self, PipelineError> {
        if self.answers.is_none() {
            if let Some(lf) = self.gold_form()? {
                let answers = evaluate(&lf, store).map_err(|e| PipelineError::Data(format!("{}: {e}", self.qid)))?;
                self.answers = Some(answers.answer_strings().into_iter().collect());
            }
        }
        Ok(self)
    }
}

/// Reads JSON lines; blank lines are skipped.
pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(reader: R) -> Result<Vec<T>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PipelineError::Data(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PipelineError::Data(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Percent scores over the examples that carry the needed gold data.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BucketStats {
    pub count: usize,
    pub em: Option<f64>,
    pub f1: Option<f64>,
    #[serde(skip)]
    em_sum: f64,
    #[serde(skip)]
    em_n: usize,
    #[serde(skip)]
    f1_sum: f64,
    #[serde(skip)]
    f1_n: usize,
}

impl BucketStats {
    fn add(&mut self, em: Option<bool>, f1: Option<f64>) {
        self.count += 1;
        if let Some(em) = em {
            self.em_sum += if em { 1.0 } else { 0.0 };
            self.em_n += 1;
            self.em = Some(100.0 * self.em_sum / self.em_n as f64);
        }
        if let Some(f1) = f1 {
            self.f1_sum += f1;
            self.f1_n += 1;
            self.f1 = Some(100.0 * self.f1_sum / self.f1_n as f64);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall: BucketStats,
    /// Keyed by the gold form's function class; `unknown` without one.
    pub by_function: BTreeMap<String, BucketStats>,
    /// Keyed by the gold form's relation count.
    pub by_relation_count: BTreeMap<usize, BucketStats>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table.
    pub fn to_text(&self) -> String {
        let mut rows = vec![("overall".to_string(), &self.overall)];
        rows.extend(self.by_function.iter().map(|(k, v)| (format!("function={k}"), v)));
        rows.extend(self.by_relation_count.iter().map(|(k, v)| (format!("relations={k}"), v)));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max("bucket".len());
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>6}  {:>7}  {:>7}", "bucket", "n", "EM", "F1");
        for (k, s) in rows {
            let _ = writeln!(out, "{:<width$}  {:>6}  {:>7}  {:>7}", k, s.count, pct(s.em), pct(s.f1));
        }
        out
    }
}

/// EM and F1 overall and per bucket; a missing prediction counts as an
/// empty one.
pub fn evaluate_dataset(examples: &[QaExample], predictions: &[Prediction]) -> Result<EvalReport, PipelineError> {
    let by_qid: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.qid.as_str(), p)).collect();
    let mut report = EvalReport::default();
    for ex in examples {
        let pred = by_qid.get(ex.qid.as_str());
        let gold = ex.gold_form()?;
        let pred_form = pred.and_then(|p| p.logical_form.as_deref()).and_then(|s| parse(s).ok());
        let em = gold.as_ref().map(|g| exact_match(pred_form.as_ref(), g));
        let f1 = ex.answers.as_ref().map(|gold_answers| {
            let gold_set: BTreeSet<String> = gold_answers.iter().cloned().collect();
            let pred_set: BTreeSet<String> = pred.and_then(|p| p.answers.clone()).unwrap_or_default().into_iter().collect();
            answer_f1(&pred_set, &gold_set).f1
        });
        report.overall.add(em, f1);
        let function = gold.as_ref().map_or("unknown".to_string(), |g| g.function_class().to_string());
        report.by_function.entry(function).or_default().add(em, f1);
        if let Some(g) = &gold {
            report.by_relation_count.entry(g.relation_count()).or_default().add(em, f1);
        }
    }
    Ok(report)
}

/// Mean hits@1 over examples with gold answers; `None` when there are none.
/// Example `i` draws with seed `seed + i`.
pub fn mean_hits_at_1(examples: &[QaExample], predictions: &[Prediction], trials: usize, seed: u64) -> Option<f64> {
    let by_qid: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.qid.as_str(), p)).collect();
    let scores: Vec<f64> = examples
        .iter()
        .enumerate()
        .filter_map(|(i, ex)| {
            let gold: BTreeSet<String> = ex.answers.as_ref()?.iter().cloned().collect();
            let pred: BTreeSet<String> = by_qid
                .get(ex.qid.as_str())
                .and_then(|p| p.answers.clone())
                .unwrap_or_default()
                .into_iter()
                .collect();
            Some(hits_at_1(&pred, &gold, trials, seed.wrapping_add(i as u64)))
        })
        .collect();
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}
