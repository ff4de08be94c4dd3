//! Request/response contract of the reward-scoring service. Transport-free
//! so the HTTP server and the browser demo share one implementation.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diversity::DiversityScorer;
use crate::eval::{answers_for_truth, fill_absent, split_for_scope, AnswerFormat, DiversityScope};
use crate::gateway::DEFAULT_DELIMITER;
use crate::reward::{
    accuracy_reward, group_advantages, shaped_reward, GroundTruth, RewardBreakdown, RewardWeights,
    DEFAULT_SIGMA_FLOOR,
};

/// Which diversity score feeds the shaped reward.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityMetric {
    Combined,
    #[default]
    Norm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub completions: Vec<String>,
    pub ground_truth: GroundTruth,
    pub answer_format: AnswerFormat,
    #[serde(default)]
    pub alphas: RewardWeights,
    #[serde(default)]
    pub diversity_scope: DiversityScope,
    #[serde(default)]
    pub diversity_metric: DiversityMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub breakdowns: Vec<RewardBreakdown>,
    pub advantages: Vec<f64>,
    pub answers: Vec<IndexMap<String, Option<String>>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    /// The request is well-formed JSON but violates the contract.
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("malformed request body: {0}")]
    Malformed(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ScoreError {
    pub fn status(&self) -> u16 {
        match self {
            ScoreError::Invalid(_) | ScoreError::Malformed(_) => 400,
            ScoreError::Internal(_) => 500,
        }
    }
}

/// Rewards and group advantages for one rollout group.
pub fn serve_score(request: &ScoreRequest, scorer: &DiversityScorer) -> Result<ScoreResponse, ScoreError> {
    if request.completions.is_empty() {
        return Err(ScoreError::Invalid("completions must be non-empty".into()));
    }
    request.ground_truth.validate().map_err(|e| ScoreError::Invalid(e.to_string()))?;
    request.answer_format.validate().map_err(|e| ScoreError::Invalid(e.to_string()))?;
    request.alphas.validate().map_err(|e| ScoreError::Invalid(e.to_string()))?;

    let mut breakdowns = Vec::with_capacity(request.completions.len());
    let mut answers = Vec::with_capacity(request.completions.len());
    for text in &request.completions {
        let extracted = answers_for_truth(text, &request.ground_truth, &request.answer_format, DEFAULT_DELIMITER);
        let r_acc = accuracy_reward(&fill_absent(&extracted), &request.ground_truth)
            .map_err(|e| ScoreError::Internal(e.to_string()))?;
        let scope_text = split_for_scope(text, request.diversity_scope, DEFAULT_DELIMITER);
        let report = scorer
            .score_lenient(&scope_text)
            .map_err(|e| ScoreError::Internal(e.to_string()))?;
        let r_div = match request.diversity_metric {
            DiversityMetric::Combined => report.d_combined,
            DiversityMetric::Norm => report.d_norm,
        }
        .unwrap_or(0.0);
        breakdowns.push(shaped_reward(r_acc, r_div, request.alphas).map_err(|e| ScoreError::Internal(e.to_string()))?);
        answers.push(extracted);
    }
    let totals: Vec<f64> = breakdowns.iter().map(|b| b.r_total).collect();
    let advantages =
        group_advantages(&totals, DEFAULT_SIGMA_FLOOR).map_err(|e| ScoreError::Internal(e.to_string()))?;
    Ok(ScoreResponse {
        breakdowns,
        advantages,
        answers,
    })
}

/// Parses a JSON body and scores it.
pub fn serve_score_json(body: &[u8], scorer: &DiversityScorer) -> Result<ScoreResponse, ScoreError> {
    let request: ScoreRequest = serde_json::from_slice(body).map_err(|e| ScoreError::Malformed(e.to_string()))?;
    serve_score(&request, scorer)
}
