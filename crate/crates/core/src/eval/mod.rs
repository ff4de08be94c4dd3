//! Answer extraction, accuracy/diversity evaluation and report emission.

mod extract;
mod report;
mod run;

use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_answer, extract_answer_with, extract_role_answers, AnswerFormat, AnswerFormatKind};
pub use report::{emit_report, run_dir, scatter_svg, ReportPaths};
pub use run::generate_outputs;

use crate::diversity::{DiversityError, DiversityReport, DiversityScorer};
use crate::gateway::{split_think, CompletionResult, DEFAULT_DELIMITER};
use crate::pipeline::DatasetRecord;
use crate::reward::{accuracy_reward, GroundTruth, MergeMode, RewardError};
use crate::stats::{self, StatsError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid answer format: {0}")]
    InvalidFormat(String),
    #[error("no output for record {0:?}")]
    MissingOutput(String),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("zero variance: correlation undefined")]
    DegenerateVariance,
    #[error("{0}")]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Text region the diversity score is computed over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityScope {
    #[default]
    Full,
    ThinkOnly,
}

impl std::str::FromStr for DiversityScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "full" => Ok(Self::Full),
            "think_only" => Ok(Self::ThinkOnly),
            _ => Err(format!("unknown diversity scope {s:?}")),
        }
    }
}

impl DiversityScope {
    pub fn select(self, completion: &CompletionResult) -> &str {
        match self {
            DiversityScope::Full => &completion.text,
            DiversityScope::ThinkOnly => &completion.think_text,
        }
    }
}

/// The scoped region of a raw completion.
pub fn split_for_scope(text: &str, scope: DiversityScope, delimiter: &str) -> String {
    match scope {
        DiversityScope::Full => text.to_string(),
        DiversityScope::ThinkOnly => split_think(text, delimiter).0,
    }
}

/// One line of an outputs JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputLine {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub injected_continuations: u32,
}

impl OutputLine {
    pub fn into_completion(self, delimiter: &str) -> CompletionResult {
        let (think_text, answer_text) = split_think(&self.text, delimiter);
        CompletionResult {
            raw_segments: vec![self.text.clone()],
            text: self.text,
            think_text,
            answer_text,
            injected_continuations: self.injected_continuations,
            cache_hit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordResult {
    pub id: String,
    pub task: String,
    /// Extracted answers; `None` where no marker was found.
    pub answers: IndexMap<String, Option<String>>,
    pub accuracy: f64,
    pub diversity: DiversityReport,
    pub injected_continuations: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_record: Vec<RecordResult>,
    pub aggregate_accuracy: f64,
    /// Mean combined diversity.
    pub aggregate_diversity: f64,
    /// Mean length-normalized diversity.
    pub aggregate_norm: f64,
    /// Per-record accuracy vs combined diversity; `None` when either side
    /// has zero variance or fewer than two records exist.
    pub pearson_acc_div: Option<f64>,
}

impl EvalResult {
    pub fn from_records(per_record: Vec<RecordResult>) -> Self {
        let acc: Vec<f64> = per_record.iter().map(|r| r.accuracy).collect();
        let div: Vec<f64> = per_record.iter().map(|r| r.diversity.d_combined.unwrap_or(0.0)).collect();
        let norm: Vec<f64> = per_record.iter().map(|r| r.diversity.d_norm.unwrap_or(0.0)).collect();
        Self {
            aggregate_accuracy: stats::mean(&acc),
            aggregate_diversity: stats::mean(&div),
            aggregate_norm: stats::mean(&norm),
            pearson_acc_div: stats::pearson(&acc, &div).ok(),
            per_record,
        }
    }
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    stats::pearson(xs, ys).map_err(|e| match e {
        StatsError::DegenerateVariance => EvalError::DegenerateVariance,
        other => EvalError::Stats(other),
    })
}

/// Correlation between accuracy and diversity across settings (one
/// aggregate pair per setting), e.g. one point per decode strategy.
pub fn setting_correlation(settings: &[EvalResult]) -> Result<f64, EvalError> {
    let acc: Vec<f64> = settings.iter().map(|r| r.aggregate_accuracy).collect();
    let div: Vec<f64> = settings.iter().map(|r| r.aggregate_diversity).collect();
    pearson(&acc, &div)
}

/// Answers the accuracy rule needs: one `role: X` line per role of a
/// divergent truth, or the last answer marker (keyed `answer`) for a
/// convergent one.
pub fn answers_for_truth(
    text: &str,
    truth: &GroundTruth,
    format: &AnswerFormat,
    delimiter: &str,
) -> IndexMap<String, Option<String>> {
    match truth.mode {
        MergeMode::Divergent => {
            let roles: Vec<String> = truth.roles().into_iter().map(String::from).collect();
            extract_role_answers(text, &roles, format, delimiter)
        }
        MergeMode::Convergent => {
            let mut m = IndexMap::new();
            m.insert("answer".to_string(), extract_answer_with(text, format, delimiter));
            m
        }
    }
}

/// Absent answers become empty strings, which never match a gold token.
pub fn fill_absent(answers: &IndexMap<String, Option<String>>) -> IndexMap<String, String> {
    answers.iter().map(|(k, v)| (k.clone(), v.clone().unwrap_or_default())).collect()
}

#[derive(Debug, Clone)]
pub struct Evaluator {
    pub scorer: DiversityScorer,
    pub scope: DiversityScope,
    pub delimiter: String,
}

impl Default for Evaluator {
    fn default() -> Self {
        Self {
            scorer: DiversityScorer::default(),
            scope: DiversityScope::Full,
            delimiter: DEFAULT_DELIMITER.into(),
        }
    }
}

impl Evaluator {
    pub fn evaluate_record(
        &self,
        record: &DatasetRecord,
        output: &CompletionResult,
        format: &AnswerFormat,
    ) -> Result<RecordResult, EvalError> {
        let answers = answers_for_truth(&output.text, &record.ground_truth, format, &self.delimiter);
        let accuracy = accuracy_reward(&fill_absent(&answers), &record.ground_truth)?;
        let diversity = self.scorer.score_lenient(self.scope.select(output))?;
        Ok(RecordResult {
            id: record.id.clone(),
            task: record.task.clone(),
            answers,
            accuracy,
            diversity,
            injected_continuations: output.injected_continuations,
        })
    }

    pub fn evaluate(
        &self,
        dataset: &[DatasetRecord],
        outputs: &HashMap<String, CompletionResult>,
        format: &AnswerFormat,
    ) -> Result<EvalResult, EvalError> {
        format.validate()?;
        self.evaluate_with(dataset, outputs, |_| format.clone())
    }

    /// Like [`evaluate`](Self::evaluate) with a per-record answer format.
    pub fn evaluate_with(
        &self,
        dataset: &[DatasetRecord],
        outputs: &HashMap<String, CompletionResult>,
        format_of: impl Fn(&DatasetRecord) -> AnswerFormat + Sync,
    ) -> Result<EvalResult, EvalError> {
        if let Some(missing) = dataset.iter().find(|r| !outputs.contains_key(&r.id)) {
            return Err(EvalError::MissingOutput(missing.id.clone()));
        }
        let per_record = dataset
            .par_iter()
            .map(|r| self.evaluate_record(r, &outputs[&r.id], &format_of(r)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EvalResult::from_records(per_record))
    }
}

pub fn evaluate(
    dataset: &[DatasetRecord],
    outputs: &HashMap<String, CompletionResult>,
    format: &AnswerFormat,
) -> Result<EvalResult, EvalError> {
    Evaluator::default().evaluate(dataset, outputs, format)
}

/// Reads an outputs JSONL file into completions keyed by id.
pub fn read_outputs(path: &Path, delimiter: &str) -> Result<HashMap<String, CompletionResult>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: OutputLine = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let id = parsed.id.clone();
        if out.insert(id.clone(), parsed.into_completion(delimiter)).is_some() {
            return Err(EvalError::DuplicateId(id));
        }
    }
    Ok(out)
}
