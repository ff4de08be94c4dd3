use std::collections::HashSet;
use std::sync::LazyLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::gateway::{cosine, DecodeStrategy, Gateway};
use crate::prompts;

pub const DEFAULT_LAMBDA: f64 = 0.5;

static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleCandidate {
    pub name: String,
    pub relevance: f64,
    pub mean_dissimilarity: f64,
    pub selection_probability: f64,
}

impl RoleCandidate {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            relevance: 0.0,
            mean_dissimilarity: 0.0,
            selection_probability: 0.0,
        }
    }
}

/// Names from the last bracketed list in `text`, deduplicated
/// case-insensitively (first spelling kept).
pub fn parse_role_list(text: &str) -> Option<Vec<String>> {
    let inner = BRACKETED.captures_iter(text).last()?.get(1)?.as_str();
    let mut seen = HashSet::new();
    let names: Vec<String> = inner
        .split(',')
        .map(|s| s.trim().trim_matches(|c| c == '"' || c == '\'').trim().to_string())
        .filter(|s| !s.is_empty())
        .filter(|s| seen.insert(s.to_lowercase()))
        .collect();
    (!names.is_empty()).then_some(names)
}

/// Asks the model for a role list. Lists longer than `n_range.1` keep their
/// first entries; shorter than `n_range.0` count as a failed attempt.
pub fn generate_roles(
    question: &str,
    gateway: &Gateway,
    n_range: (usize, usize),
    max_attempts: u32,
    sample_base: u64,
) -> Result<Vec<RoleCandidate>, PipelineError> {
    let (lo, hi) = n_range;
    if lo < 1 || lo > hi {
        return Err(PipelineError::InvalidConfig(format!("bad role range [{lo}, {hi}]")));
    }
    let prompt = prompts::role_generation(question);
    let strategy = DecodeStrategy::default();
    let mut last = String::new();
    for attempt in 0..max_attempts.max(1) {
        let out = gateway.complete_sample(&prompt, &strategy, sample_base.wrapping_add(attempt as u64))?;
        let parsed = parse_role_list(&out.answer_text).or_else(|| parse_role_list(&out.text));
        match parsed {
            Some(mut names) if names.len() >= lo => {
                names.truncate(hi);
                return Ok(names.into_iter().map(RoleCandidate::named).collect());
            }
            Some(names) => last = format!("{} role(s), need at least {lo}", names.len()),
            None => last = "no bracketed list".into(),
        }
        log::warn!("role generation attempt {} failed: {last}", attempt + 1);
    }
    Err(PipelineError::RoleParse(last))
}

/// Softmax of `relevance_i + lambda * mean_j(1 - sim_ij)`. Similarities are
/// clipped to `[0, 1]` so each dissimilarity stays in `[0, 1]`.
pub fn selection_probabilities(relevance: &[f64], embeddings: &[Vec<f64>], lambda: f64) -> Vec<(f64, f64)> {
    let n = relevance.len();
    let dissim: Vec<f64> = (0..n)
        .map(|i| {
            if n < 2 {
                return 0.0;
            }
            let total: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| 1.0 - cosine(&embeddings[i], &embeddings[j]).clamp(0.0, 1.0))
                .sum();
            total / (n - 1) as f64
        })
        .collect();
    let logits: Vec<f64> = relevance.iter().zip(&dissim).map(|(r, d)| r + lambda * d).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().zip(dissim).map(|(e, d)| (e / z, d)).collect()
}

/// Fills relevance, dissimilarity and selection probability of each candidate.
pub fn score_role_selection(
    question: &str,
    candidates: &[RoleCandidate],
    gateway: &Gateway,
    lambda: f64,
) -> Result<Vec<RoleCandidate>, PipelineError> {
    if candidates.len() < 2 {
        return Err(PipelineError::InsufficientRoles(candidates.len()));
    }
    let mut texts = vec![question.to_string()];
    texts.extend(candidates.iter().map(|c| format!("{} {question}", c.name)));
    texts.extend(candidates.iter().map(|c| c.name.clone()));
    let vecs = gateway.embed(&texts)?;
    let n = candidates.len();
    let q = &vecs[0];
    let relevance: Vec<f64> = vecs[1..=n].iter().map(|v| cosine(v, q)).collect();
    let probs = selection_probabilities(&relevance, &vecs[n + 1..], lambda);
    Ok(candidates
        .iter()
        .zip(relevance)
        .zip(probs)
        .map(|((c, rel), (p, d))| RoleCandidate {
            name: c.name.clone(),
            relevance: rel,
            mean_dissimilarity: d,
            selection_probability: p,
        })
        .collect())
}

/// Draws `count` distinct candidates, each draw proportional to the
/// remaining selection probabilities.
pub fn sample_roles<R: Rng>(candidates: &[RoleCandidate], count: usize, rng: &mut R) -> Vec<RoleCandidate> {
    let mut pool: Vec<&RoleCandidate> = candidates.iter().collect();
    let mut picked = Vec::new();
    while picked.len() < count && !pool.is_empty() {
        let total: f64 = pool.iter().map(|c| c.selection_probability.max(0.0)).sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = pool.len() - 1;
            for (i, c) in pool.iter().enumerate() {
                u -= c.selection_probability.max(0.0);
                if u < 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..pool.len())
        };
        picked.push(pool.remove(idx).clone());
    }
    picked
}
