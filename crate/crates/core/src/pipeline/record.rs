use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::eval::{AnswerFormat, AnswerFormatKind};
use crate::reward::{GroundTruth, MergeMode};

/// One question of an input JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub task: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    pub merge_mode: MergeMode,
    pub ground_truth: GroundTruth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset_roles: Option<Vec<String>>,
}

impl DatasetRecord {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| PipelineError::InvalidRecord(format!("{}: {m}", self.id));
        if self.id.is_empty() {
            return Err(PipelineError::InvalidRecord("empty id".into()));
        }
        if self.question.trim().is_empty() {
            return Err(bad("empty question".into()));
        }
        if self.options.as_ref().is_some_and(|o| o.is_empty()) {
            return Err(bad("options present but empty".into()));
        }
        self.ground_truth.validate().map_err(|e| bad(e.to_string()))?;
        if self.ground_truth.mode != self.merge_mode {
            return Err(bad(format!(
                "merge_mode {} disagrees with ground truth mode {}",
                self.merge_mode, self.ground_truth.mode
            )));
        }
        Ok(())
    }

    /// Options as a parenthesized-letter alphabet; Yes/No otherwise.
    pub fn answer_format(&self) -> AnswerFormat {
        match &self.options {
            Some(opts) if !opts.is_empty() => AnswerFormat {
                pattern_kind: AnswerFormatKind::BoldParen,
                alphabet: opts.clone(),
            },
            _ => AnswerFormat::with_default_alphabet(AnswerFormatKind::BoldWord),
        }
    }

    /// Roles fixed by the record: preset roles, else the roles of a divergent
    /// ground truth. Empty when roles must be generated.
    pub fn fixed_roles(&self) -> Vec<String> {
        if let Some(r) = self.preset_roles.as_ref().filter(|r| !r.is_empty()) {
            return r.clone();
        }
        self.ground_truth.roles().into_iter().map(String::from).collect()
    }
}
