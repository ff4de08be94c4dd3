use serde::{Deserialize, Serialize};

use super::{DatasetRecord, PipelineError};
use crate::eval::{extract_answer_with, AnswerFormat};
use crate::gateway::{DecodeStrategy, Gateway};
use crate::prompts;
use crate::reward::majority_vote;

/// Sampling temperature for candidate reasoning paths.
pub const PATH_TEMPERATURE: f64 = 1.0;

/// One role's sampled reasoning path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub role: String,
    pub think_text: String,
    pub answer: String,
    pub sample_index: u64,
    pub temperature: f64,
}

/// Draws `k` paths for `role` at temperature 1.0. Paths without an
/// extractable answer or with an empty think segment are dropped.
pub fn sample_paths(
    record: &DatasetRecord,
    role: &str,
    gateway: &Gateway,
    k: usize,
    strategy: &DecodeStrategy,
    format: &AnswerFormat,
    sample_base: u64,
) -> Result<Vec<ReasoningTrace>, PipelineError> {
    if k == 0 {
        return Err(PipelineError::InvalidConfig("k must be >= 1".into()));
    }
    let strategy = DecodeStrategy {
        temperature: PATH_TEMPERATURE,
        ..strategy.clone()
    };
    let prompt = prompts::role_reasoning(&record.question, record.options.as_deref(), format, role);
    let mut traces = Vec::with_capacity(k);
    let mut dropped = 0usize;
    for j in 0..k as u64 {
        let sample_index = sample_base.wrapping_add(j);
        let out = gateway.complete_sample(&prompt, &strategy, sample_index)?;
        match extract_answer_with(&out.text, format, &strategy.delimiter) {
            Some(answer) if !out.think_text.is_empty() => traces.push(ReasoningTrace {
                role: role.to_string(),
                think_text: out.think_text,
                answer,
                sample_index,
                temperature: PATH_TEMPERATURE,
            }),
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("record {} role {role:?}: dropped {dropped}/{k} paths without a usable answer", record.id);
    }
    if traces.is_empty() {
        return Err(PipelineError::NoValidPaths(role.to_string()));
    }
    Ok(traces)
}

/// Earliest path whose answer is the majority answer; ties go to the answer
/// seen first.
pub fn self_consistency_filter(paths: &[ReasoningTrace]) -> Result<&ReasoningTrace, PipelineError> {
    let winner = majority_vote(paths.iter().map(|p| p.answer.as_str())).ok_or(PipelineError::EmptyGroup)?;
    Ok(paths.iter().find(|p| p.answer == winner).expect("winner comes from paths"))
}

/// Earliest path agreeing with the gold answer, if any.
pub fn ground_truth_hinted_filter<'a>(paths: &'a [ReasoningTrace], gold: &str) -> Option<&'a ReasoningTrace> {
    paths.iter().find(|p| p.answer == gold)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::eval::AnswerFormatKind;
    use crate::gateway::{EndpointConfig, MockTransport};
    use crate::reward::GroundTruth;

    fn record() -> DatasetRecord {
        DatasetRecord {
            id: "r".into(),
            task: "bbq".into(),
            question: "Who was late?".into(),
            options: Some(vec!["A".into(), "B".into(), "C".into()]),
            merge_mode: crate::reward::MergeMode::Convergent,
            ground_truth: GroundTruth::convergent("A"),
            preset_roles: None,
        }
    }

    fn trace(answer: &str, i: u64) -> ReasoningTrace {
        ReasoningTrace {
            role: "r".into(),
            think_text: format!("t{i}"),
            answer: answer.into(),
            sample_index: i,
            temperature: 1.0,
        }
    }

    fn gw(script: Vec<String>) -> (Gateway, Arc<MockTransport>) {
        let mock = Arc::new(MockTransport::scripted(script));
        (Gateway::new(EndpointConfig::default(), mock.clone()).unwrap(), mock)
    }

    #[test]
    fn scripted_answers_come_back_in_order() {
        let script: Vec<String> = ["A", "A", "A", "B", "C"].iter().map(|a| format!("hmm</think>**({a})**")).collect();
        let (g, mock) = gw(script);
        let f = record().answer_format();
        let t = sample_paths(&record(), "Nurse", &g, 5, &DecodeStrategy::default(), &f, 0).unwrap();
        let answers: Vec<_> = t.iter().map(|t| t.answer.as_str()).collect();
        assert_eq!(answers, ["A", "A", "A", "B", "C"]);
        assert!(mock.requests().iter().all(|r| r.temperature == 1.0));
        assert!(mock.requests()[0].user_prompt().contains("perspective of Nurse"));
    }

    #[test]
    fn no_markers_means_no_valid_paths() {
        let (g, _) = gw(vec!["hmm</think>dunno".into()]);
        let f = AnswerFormat::with_default_alphabet(AnswerFormatKind::BoldParen);
        assert!(matches!(
            sample_paths(&record(), "Nurse", &g, 3, &DecodeStrategy::default(), &f, 0),
            Err(PipelineError::NoValidPaths(_))
        ));
    }

    #[test]
    fn filter_examples() {
        let t = [trace("A", 0), trace("A", 1), trace("B", 2)];
        assert_eq!(self_consistency_filter(&t).unwrap().sample_index, 0);
        let t = [trace("B", 0), trace("A", 1), trace("A", 2)];
        assert_eq!(self_consistency_filter(&t).unwrap().sample_index, 1);
        let t = [trace("A", 0), trace("B", 1), trace("C", 2)];
        assert_eq!(self_consistency_filter(&t).unwrap().answer, "A");
        assert_eq!(self_consistency_filter(&t[1..2]).unwrap().answer, "B");
        assert!(matches!(self_consistency_filter(&[]), Err(PipelineError::EmptyGroup)));
    }

    #[test]
    fn hinted_filter_picks_gold() {
        let t = [trace("A", 0), trace("C", 1), trace("C", 2)];
        assert_eq!(ground_truth_hinted_filter(&t, "C").unwrap().sample_index, 1);
        assert!(ground_truth_hinted_filter(&t, "B").is_none());
    }

    /// Exhaustive check against a counting oracle over every sequence of
    /// length 1..=7 from {A, B, C}.
    #[test]
    fn agrees_with_brute_force_vote() {
        let alphabet = ["A", "B", "C"];
        for len in 1..=7u32 {
            for code in 0..3usize.pow(len) {
                let mut c = code;
                let answers: Vec<&str> = (0..len)
                    .map(|_| {
                        let a = alphabet[c % 3];
                        c /= 3;
                        a
                    })
                    .collect();
                let paths: Vec<_> = answers.iter().enumerate().map(|(i, a)| trace(a, i as u64)).collect();
                let counts: Vec<usize> = alphabet.iter().map(|x| answers.iter().filter(|a| *a == x).count()).collect();
                let top = *counts.iter().max().unwrap();
                let first_pos = |x: &str| answers.iter().position(|a| *a == x).unwrap_or(usize::MAX);
                let expected = alphabet
                    .iter()
                    .zip(&counts)
                    .filter(|(_, &n)| n == top)
                    .min_by_key(|(x, _)| first_pos(x))
                    .map(|(x, _)| *x)
                    .unwrap();
                let got = self_consistency_filter(&paths).unwrap();
                assert_eq!(got.answer, expected, "{answers:?}");
                assert_eq!(got.sample_index as usize, first_pos(expected));
            }
        }
    }
}
