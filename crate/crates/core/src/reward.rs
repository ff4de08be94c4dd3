//! Accuracy rewards under divergent/convergent merging, the shaped
//! accuracy+diversity reward, and group-relative advantage normalization.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-12;

const ALPHA_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("no answer for role {0:?}")]
    MissingRoleAnswer(String),
    #[error("no answers given")]
    NoAnswers,
    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),
    #[error("invalid score: {0}")]
    InvalidScore(String),
    #[error("empty rollout group")]
    EmptyGroup,
    #[error("rollout group lists differ in length")]
    LengthMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    /// Each role is judged against its own ground truth.
    Divergent,
    /// Role answers are majority-voted into one consensus.
    Convergent,
}

impl std::fmt::Display for MergeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MergeMode::Divergent => "divergent",
            MergeMode::Convergent => "convergent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub mode: MergeMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_role_answers: Option<IndexMap<String, String>>,
}

impl GroundTruth {
    pub fn convergent(answer: impl Into<String>) -> Self {
        Self {
            mode: MergeMode::Convergent,
            scalar_answer: Some(answer.into()),
            per_role_answers: None,
        }
    }

    pub fn divergent<R: Into<String>, A: Into<String>>(roles: impl IntoIterator<Item = (R, A)>) -> Self {
        Self {
            mode: MergeMode::Divergent,
            scalar_answer: None,
            per_role_answers: Some(roles.into_iter().map(|(r, a)| (r.into(), a.into())).collect()),
        }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        match self.mode {
            MergeMode::Convergent if self.scalar_answer.is_none() => Err(RewardError::InvalidGroundTruth(
                "convergent mode requires scalar_answer".into(),
            )),
            MergeMode::Divergent if self.per_role_answers.as_ref().is_none_or(|m| m.is_empty()) => {
                Err(RewardError::InvalidGroundTruth(
                    "divergent mode requires non-empty per_role_answers".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Roles named by a divergent truth, in insertion order.
    pub fn roles(&self) -> Vec<&str> {
        self.per_role_answers
            .as_ref()
            .map(|m| m.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }
}

/// Most frequent value; ties go to the value that occurs first.
pub fn majority_vote<'a>(values: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    let mut tally: IndexMap<&str, usize> = IndexMap::new();
    for v in values {
        *tally.entry(v).or_insert(0) += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (v, c) in tally {
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}

/// Accuracy of one set of role answers against the ground truth.
///
/// Divergent truth scores the fraction of its roles answered correctly.
/// Convergent truth scores 1 when the majority answer (ties to the earliest
/// role) equals the scalar answer.
pub fn accuracy_reward(answers: &IndexMap<String, String>, truth: &GroundTruth) -> Result<f64, RewardError> {
    truth.validate()?;
    match truth.mode {
        MergeMode::Divergent => {
            let expected = truth.per_role_answers.as_ref().expect("validated");
            let mut hits = 0usize;
            for (role, gold) in expected {
                let got = answers
                    .get(role)
                    .ok_or_else(|| RewardError::MissingRoleAnswer(role.clone()))?;
                if got == gold {
                    hits += 1;
                }
            }
            Ok(hits as f64 / expected.len() as f64)
        }
        MergeMode::Convergent => {
            let majority = majority_vote(answers.values().map(String::as_str)).ok_or(RewardError::NoAnswers)?;
            let gold = truth.scalar_answer.as_deref().expect("validated");
            Ok(if majority == gold { 1.0 } else { 0.0 })
        }
    }
}

/// Mixing coefficients of the shaped reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub acc: f64,
    pub div: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { acc: 0.9, div: 0.1 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.acc.is_finite() && self.div.is_finite()) || self.acc < 0.0 || self.div < 0.0 {
            return Err(RewardError::InvalidScore(format!(
                "reward weights must be non-negative, got ({}, {})",
                self.acc, self.div
            )));
        }
        if (self.acc + self.div - 1.0).abs() > ALPHA_SUM_TOLERANCE {
            return Err(RewardError::InvalidScore(format!(
                "reward weights must sum to 1, got {}",
                self.acc + self.div
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    #[serde(rename = "acc")]
    pub r_acc: f64,
    #[serde(rename = "div")]
    pub r_div: f64,
    #[serde(rename = "total")]
    pub r_total: f64,
    pub alpha_acc: f64,
    pub alpha_div: f64,
}

fn check_unit(name: &str, v: f64) -> Result<(), RewardError> {
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        return Err(RewardError::InvalidScore(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// `total = alpha_acc * r_acc + alpha_div * r_div`.
pub fn shaped_reward(r_acc: f64, r_div: f64, weights: RewardWeights) -> Result<RewardBreakdown, RewardError> {
    check_unit("r_acc", r_acc)?;
    check_unit("r_div", r_div)?;
    weights.validate()?;
    Ok(RewardBreakdown {
        r_acc,
        r_div,
        r_total: weights.acc * r_acc + weights.div * r_div,
        alpha_acc: weights.acc,
        alpha_div: weights.div,
    })
}

/// Group-normalized advantages `(r - mean) / std` with the population std.
/// A group whose std is at or below `sigma_floor` gets all-zero advantages.
pub fn group_advantages(rewards: &[f64], sigma_floor: f64) -> Result<Vec<f64>, RewardError> {
    if rewards.is_empty() {
        return Err(RewardError::EmptyGroup);
    }
    if let Some(bad) = rewards.iter().find(|r| !r.is_finite()) {
        return Err(RewardError::InvalidScore(format!("non-finite reward {bad}")));
    }
    let mu = crate::stats::mean(rewards);
    let sigma = crate::stats::population_std(rewards);
    if sigma <= sigma_floor {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mu) / sigma).collect())
}

/// One sampled completion with the per-role answers extracted from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub answers: IndexMap<String, String>,
}

/// The G completions sampled for one prompt, with rewards and advantages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    completions: Vec<Completion>,
    rewards: Vec<RewardBreakdown>,
    advantages: Vec<f64>,
}

impl RolloutGroup {
    pub fn new(
        completions: Vec<Completion>,
        rewards: Vec<RewardBreakdown>,
        sigma_floor: f64,
    ) -> Result<Self, RewardError> {
        if completions.is_empty() {
            return Err(RewardError::EmptyGroup);
        }
        if completions.len() != rewards.len() {
            return Err(RewardError::LengthMismatch);
        }
        let totals: Vec<f64> = rewards.iter().map(|r| r.r_total).collect();
        let advantages = group_advantages(&totals, sigma_floor)?;
        Ok(Self {
            completions,
            rewards,
            advantages,
        })
    }

    pub fn completions(&self) -> &[Completion] {
        &self.completions
    }

    pub fn rewards(&self) -> &[RewardBreakdown] {
        &self.rewards
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }

    pub fn len(&self) -> usize {
        self.completions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completions.is_empty()
    }
}
