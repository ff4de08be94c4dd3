use std::collections::HashMap;

use rayon::prelude::*;

use super::AnswerFormat;
use crate::gateway::{CompletionResult, DecodeMode, DecodeStrategy, Gateway, GatewayError};
use crate::pipeline::DatasetRecord;
use crate::prompts;
use crate::reward::MergeMode;

/// Runs each record's evaluation prompt through the gateway. Under
/// `MoreThink` the continuations name the record's fixed roles when there
/// are enough of them, and are bare otherwise.
pub fn generate_outputs(
    dataset: &[DatasetRecord],
    gateway: &Gateway,
    strategy: &DecodeStrategy,
    format_override: Option<&AnswerFormat>,
) -> Result<HashMap<String, CompletionResult>, GatewayError> {
    dataset
        .par_iter()
        .map(|record| {
            let format = format_override.cloned().unwrap_or_else(|| record.answer_format());
            let roles = record.fixed_roles();
            let listed = (record.merge_mode == MergeMode::Divergent).then_some(roles.as_slice());
            let prompt = prompts::evaluation(&record.question, record.options.as_deref(), &format, listed);
            let result = if strategy.mode == DecodeMode::MoreThink {
                let named: &[String] = if roles.len() >= strategy.wait_count as usize { &roles } else { &[] };
                gateway.budget_forced_sample(&prompt, named, strategy, 0)?
            } else {
                gateway.complete(&prompt, strategy)?
            };
            Ok((record.id.clone(), result))
        })
        .collect()
}
