use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    filter_sft_dataset, generate_roles, ground_truth_hinted_filter, merge_traces, sample_paths, sample_roles,
    score_role_selection, self_consistency_filter, DatasetRecord, PipelineError, ReasoningTrace, SftExample,
    DEFAULT_LAMBDA,
};
use crate::eval::AnswerFormat;
use crate::gateway::{DecodeStrategy, Gateway};
use crate::reward::MergeMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    #[default]
    SelfConsistency,
    /// Keep the earliest path matching the ground truth.
    GroundTruthHinted,
}

impl std::str::FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "self-consistency" => Ok(Self::SelfConsistency),
            "ground-truth-hinted" => Ok(Self::GroundTruthHinted),
            _ => Err(format!("unknown filter {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub n_range: (usize, usize),
    pub role_attempts: u32,
    pub lambda: f64,
    /// Roles kept per record after selection.
    pub roles_per_record: usize,
    pub samples_per_role: usize,
    pub orderings: usize,
    pub filter: FilterKind,
    pub lower_pct: f64,
    pub upper_pct: f64,
    pub strategy: DecodeStrategy,
    /// Overrides the format derived from each record's options.
    pub format: Option<AnswerFormat>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_range: (2, 4),
            role_attempts: 3,
            lambda: DEFAULT_LAMBDA,
            roles_per_record: 3,
            samples_per_role: 5,
            orderings: 1,
            filter: FilterKind::SelfConsistency,
            lower_pct: 10.0,
            upper_pct: 10.0,
            strategy: DecodeStrategy::default(),
            format: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.into()));
        if self.n_range.0 < 2 || self.n_range.0 > self.n_range.1 {
            return bad("n_range must satisfy 2 <= min <= max");
        }
        if self.samples_per_role == 0 {
            return bad("samples_per_role must be >= 1");
        }
        if self.roles_per_record < 2 {
            return bad("roles_per_record must be >= 2");
        }
        if self.orderings == 0 {
            return bad("orderings must be >= 1");
        }
        if !(0.0..50.0).contains(&self.lower_pct) || !(0.0..50.0).contains(&self.upper_pct) {
            return bad("percentiles must lie in [0, 50)");
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite");
        }
        self.strategy.validate().map_err(PipelineError::from)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub records: usize,
    pub skipped_records: usize,
    pub dropped_roles: usize,
    pub merged_examples: usize,
    pub kept_examples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutput {
    pub examples: Vec<SftExample>,
    pub stats: BuildStats,
}

fn record_seed(seed: u64, id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize().into()
}

struct RecordOutcome {
    examples: Vec<SftExample>,
    dropped_roles: usize,
}

fn process_record(
    record: &DatasetRecord,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<RecordOutcome, PipelineError> {
    record.validate()?;
    let mut rng = ChaCha8Rng::from_seed(record_seed(config.seed, &record.id));
    // distinct requests per seed so a different seed draws different data
    let sample_base = config.seed.wrapping_mul(1_000_003);
    let format = config.format.clone().unwrap_or_else(|| record.answer_format());

    let roles: Vec<String> = match record.fixed_roles() {
        fixed if !fixed.is_empty() => fixed,
        _ => {
            let candidates =
                generate_roles(&record.question, gateway, config.n_range, config.role_attempts, sample_base)?;
            let scored = score_role_selection(&record.question, &candidates, gateway, config.lambda)?;
            sample_roles(&scored, config.roles_per_record, &mut rng)
                .into_iter()
                .map(|c| c.name)
                .collect()
        }
    };

    let mut filtered: IndexMap<String, ReasoningTrace> = IndexMap::new();
    let mut dropped_roles = 0;
    for role in &roles {
        let paths = match sample_paths(
            record,
            role,
            gateway,
            config.samples_per_role,
            &config.strategy,
            &format,
            sample_base,
        ) {
            Ok(p) => p,
            Err(PipelineError::NoValidPaths(_)) => {
                dropped_roles += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let chosen = match config.filter {
            FilterKind::SelfConsistency => Some(self_consistency_filter(&paths)?),
            FilterKind::GroundTruthHinted => {
                let gold = match record.merge_mode {
                    MergeMode::Convergent => record.ground_truth.scalar_answer.as_deref(),
                    MergeMode::Divergent => record
                        .ground_truth
                        .per_role_answers
                        .as_ref()
                        .and_then(|m| m.get(role))
                        .map(String::as_str),
                };
                gold.and_then(|g| ground_truth_hinted_filter(&paths, g))
            }
        };
        match chosen {
            Some(t) => {
                filtered.insert(role.clone(), t.clone());
            }
            None => dropped_roles += 1,
        }
    }
    let examples = merge_traces(record, &filtered, config.orderings, &format, &mut rng)?;
    Ok(RecordOutcome { examples, dropped_roles })
}

/// Runs every record through role selection, sampling, filtering and
/// merging, then applies the dataset filters. Records that end up with
/// fewer than two usable roles, or whose role list cannot be parsed, are
/// skipped; transport failures abort the build. Output order follows input
/// order regardless of parallelism.
pub fn build_dataset(
    records: &[DatasetRecord],
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<BuildOutput, PipelineError> {
    config.validate()?;
    let outcomes: Vec<Result<RecordOutcome, PipelineError>> =
        records.par_iter().map(|r| process_record(r, gateway, config)).collect();
    let mut stats = BuildStats {
        records: records.len(),
        ..BuildStats::default()
    };
    let mut merged = Vec::new();
    for (record, outcome) in records.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                stats.dropped_roles += o.dropped_roles;
                merged.extend(o.examples);
            }
            Err(
                e @ (PipelineError::RoleParse(_)
                | PipelineError::InsufficientRoles(_)
                | PipelineError::NoValidPaths(_)),
            ) => {
                log::warn!("skipping record {}: {e}", record.id);
                stats.skipped_records += 1;
            }
            Err(e) => return Err(e),
        }
    }
    stats.merged_examples = merged.len();
    let examples = filter_sft_dataset(merged, config.lower_pct, config.upper_pct, &config.strategy.delimiter);
    stats.kept_examples = examples.len();
    Ok(BuildOutput { examples, stats })
}

/// Parses a JSONL file of records, rejecting duplicate ids.
pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: DatasetRecord = serde_json::from_str(line).map_err(|e| PipelineError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        r.validate()?;
        if !seen.insert(r.id.clone()) {
            return Err(PipelineError::InvalidRecord(format!("duplicate id {:?}", r.id)));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn write_examples(path: &Path, examples: &[SftExample]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in examples {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
