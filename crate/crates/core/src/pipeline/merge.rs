use std::collections::HashSet;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetRecord, PipelineError, ReasoningTrace};
use crate::diversity::tokenize;
use crate::eval::AnswerFormat;
use crate::gateway::{DecodeStrategy, DEFAULT_DELIMITER, THINK_OPEN};
use crate::prompts;
use crate::reward::{majority_vote, MergeMode};

pub const OPENING_LINE: &str = "Okay, I will answer the question based on the perspectives of the following roles:";

/// One instruction-tuning example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftExample {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub ordering: Vec<String>,
    pub merge_mode: MergeMode,
}

fn factorial_capped(n: usize, cap: usize) -> usize {
    let mut f = 1usize;
    for i in 2..=n {
        f = f.saturating_mul(i);
        if f >= cap {
            return cap;
        }
    }
    f.min(cap)
}

fn render_output(
    ordering: &[String],
    filtered: &IndexMap<String, ReasoningTrace>,
    mode: MergeMode,
    format: &AnswerFormat,
) -> String {
    let continuation = DecodeStrategy::default();
    let mut out = format!("{THINK_OPEN}{OPENING_LINE} {}.\n\n", ordering.join(", "));
    for (i, role) in ordering.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
            out.push_str(&continuation.continuation(ordering, i));
            out.push(' ');
        }
        out.push_str(filtered[role].think_text.trim());
    }
    out.push('\n');
    out.push_str(DEFAULT_DELIMITER);
    out.push_str("\n\n");
    let lines: Vec<String> = ordering
        .iter()
        .map(|r| format!("{r}: {}", filtered[r].answer))
        .collect();
    out.push_str(&lines.join("\n"));
    if mode == MergeMode::Convergent {
        let winner = majority_vote(ordering.iter().map(|r| filtered[r].answer.as_str())).expect("non-empty ordering");
        out.push_str("\n\nFinal answer: ");
        out.push_str(&format.render(winner));
    }
    out
}

/// Concatenates the roles' think segments in `orderings` distinct random
/// orders (fewer when the roles admit fewer permutations).
pub fn merge_traces<R: Rng>(
    record: &DatasetRecord,
    filtered: &IndexMap<String, ReasoningTrace>,
    orderings: usize,
    format: &AnswerFormat,
    rng: &mut R,
) -> Result<Vec<SftExample>, PipelineError> {
    if filtered.len() < 2 {
        return Err(PipelineError::InsufficientRoles(filtered.len()));
    }
    let roles: Vec<String> = filtered.keys().cloned().collect();
    let want = factorial_capped(roles.len(), orderings.max(1));
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        let mut perm = roles.clone();
        perm.shuffle(rng);
        if !seen.insert(perm.clone()) {
            continue;
        }
        out.push(SftExample {
            instruction: prompts::SFT_INSTRUCTION.to_string(),
            input: prompts::question_block(&record.question, record.options.as_deref(), format),
            output: render_output(&perm, filtered, record.merge_mode, format),
            ordering: perm,
            merge_mode: record.merge_mode,
        });
    }
    Ok(out)
}

/// Exactly one delimiter and every role of the ordering named.
pub fn validate_example(example: &SftExample, delimiter: &str) -> bool {
    example.output.matches(delimiter).count() == 1
        && !example.ordering.is_empty()
        && example.ordering.iter().all(|r| example.output.contains(r.as_str()))
}

/// Inclusive length bounds: the values at 1-based ranks `c + 1` and `n - c`
/// of the sorted lengths, with `c = ceil(pct * n / 100)`.
pub fn percentile_bounds(lengths: &[usize], lower_pct: f64, upper_pct: f64) -> Option<(usize, usize)> {
    let n = lengths.len();
    if n == 0 {
        return None;
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let cut = |pct: f64| ((pct.clamp(0.0, 100.0) * n as f64 / 100.0).ceil() as usize).min(n - 1);
    let lo_rank = cut(lower_pct) + 1;
    let hi_rank = n - cut(upper_pct);
    Some((sorted[lo_rank - 1], sorted[hi_rank.max(1) - 1]))
}

/// Drops malformed examples, then length outliers beyond the given
/// percentiles. Length filtering needs at least 3 well-formed examples.
pub fn filter_sft_dataset(
    examples: Vec<SftExample>,
    lower_pct: f64,
    upper_pct: f64,
    delimiter: &str,
) -> Vec<SftExample> {
    let valid: Vec<SftExample> = examples.into_iter().filter(|e| validate_example(e, delimiter)).collect();
    if valid.len() < 3 {
        return valid;
    }
    let lengths: Vec<usize> = valid
        .iter()
        .map(|e| tokenize(&e.output).map(|t| t.len()).unwrap_or(0))
        .collect();
    let (lo, hi) = percentile_bounds(&lengths, lower_pct, upper_pct).expect("non-empty");
    valid
        .into_iter()
        .zip(lengths)
        .filter(|(_, len)| *len >= lo && *len <= hi)
        .map(|(e, _)| e)
        .collect()
}
