//! Diversity-aware reward and data-construction toolkit for multi-role
//! reasoning traces.
//!
//! - [`diversity`]: eight-signal text diversity scoring and weight calibration
//! - [`reward`]: accuracy rewards, shaped rewards and group advantages
//! - [`gateway`]: OpenAI-compatible client with budget-forced decoding
//! - [`pipeline`]: multi-role SFT data construction
//! - [`eval`]: answer extraction, accuracy/diversity evaluation and reports
//! - [`scoring`]: request/response contract of the reward-scoring service

pub mod diversity;
pub mod lexicon;
pub mod reward;
pub mod stats;
pub mod eval;
pub mod gateway;
pub mod pipeline;
pub mod prompts;
pub mod scoring;
