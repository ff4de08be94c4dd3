//! Multi-role SFT data construction: role generation and selection,
//! multi-path sampling with consistency filtering, ordered merging and
//! dataset-level filters.

mod build;
mod merge;
mod record;
mod roles;
mod sampling;

use thiserror::Error;

pub use build::{build_dataset, read_records, write_examples, BuildOutput, BuildStats, FilterKind, PipelineConfig};
pub use merge::{filter_sft_dataset, merge_traces, percentile_bounds, validate_example, SftExample, OPENING_LINE};
pub use record::DatasetRecord;
pub use roles::{
    generate_roles, parse_role_list, sample_roles, score_role_selection, selection_probabilities, RoleCandidate,
    DEFAULT_LAMBDA,
};
pub use sampling::{ground_truth_hinted_filter, sample_paths, self_consistency_filter, ReasoningTrace, PATH_TEMPERATURE};

use crate::gateway::GatewayError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("could not parse a role list: {0}")]
    RoleParse(String),
    #[error("no valid reasoning path for role {0:?}")]
    NoValidPaths(String),
    #[error("empty trace group")]
    EmptyGroup,
    #[error("need at least 2 roles, got {0}")]
    InsufficientRoles(usize),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
