//! Composite lexical/structural diversity scoring of generated text.
//!
//! Eight sub-scores, each bounded to `[0, 1]`, are combined into a single
//! weighted score and optionally discounted for short outputs.

mod calibrate;
mod metrics;
mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calibrate::{calibrate_weights, calibrate_weights_scored, Calibration, GRID_STEPS};
pub use metrics::{compute_sub_scores, sub_scores_from_tokens};
pub use tokenize::{is_word_token, segment_sentences, tokenize, SentenceSegmentation, TokenSequence};

use crate::lexicon::FunctionWordLexicon;

/// Default saturation length for [`length_normalized_diversity`], in tokens.
pub const DEFAULT_LENGTH_SCALE: f64 = 100.0;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiversityError {
    #[error("text contains no tokens")]
    EmptyText,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sub-scores not set on report")]
    MissingSubScores,
    #[error("ratings have zero variance")]
    DegenerateRatings,
    #[error("need at least 3 samples, got {0}")]
    InsufficientData(usize),
    #[error("every candidate weighting gives constant combined scores")]
    DegenerateScores,
    #[error("function-word lexicon is empty")]
    EmptyLexicon,
    #[error("io: {0}")]
    Io(String),
}

/// Canonical order of the sub-scores, used by weight vectors and the grid search.
pub const SUB_SCORE_NAMES: [&str; 8] = ["lex", "ent", "len", "pat", "adj", "yule", "bi", "func"];

/// Per-signal weights of the combined score. Must lie on the unit simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityWeights {
    pub lex: f64,
    pub ent: f64,
    pub len: f64,
    pub pat: f64,
    pub adj: f64,
    pub yule: f64,
    pub bi: f64,
    pub func: f64,
}

impl Default for DiversityWeights {
    fn default() -> Self {
        Self {
            lex: 0.15,
            ent: 0.15,
            pat: 0.15,
            bi: 0.15,
            len: 0.10,
            adj: 0.10,
            yule: 0.10,
            func: 0.10,
        }
    }
}

impl DiversityWeights {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.lex, self.ent, self.len, self.pat, self.adj, self.yule, self.bi, self.func,
        ]
    }

    pub fn from_array(w: [f64; 8]) -> Result<Self, DiversityError> {
        let weights = Self {
            lex: w[0],
            ent: w[1],
            len: w[2],
            pat: w[3],
            adj: w[4],
            yule: w[5],
            bi: w[6],
            func: w[7],
        };
        weights.validate()?;
        Ok(weights)
    }

    pub fn validate(&self) -> Result<(), DiversityError> {
        let w = self.to_array();
        for (name, v) in SUB_SCORE_NAMES.iter().zip(w) {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(DiversityError::InvalidWeights(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(DiversityError::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Diversity sub-scores of one text, plus the combined and length-normalized
/// scores once they have been computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    #[serde(rename = "lex")]
    pub d_lex: f64,
    #[serde(rename = "ent")]
    pub d_ent: f64,
    #[serde(rename = "len")]
    pub d_len: f64,
    #[serde(rename = "pat")]
    pub d_pat: f64,
    #[serde(rename = "adj")]
    pub d_adj: f64,
    #[serde(rename = "yule")]
    pub d_yule: f64,
    #[serde(rename = "bi")]
    pub d_bi: f64,
    #[serde(rename = "func")]
    pub d_func: f64,
    #[serde(rename = "combined")]
    pub d_combined: Option<f64>,
    #[serde(rename = "norm")]
    pub d_norm: Option<f64>,
    pub token_count: usize,
}

impl DiversityReport {
    /// Report for text with no tokens: every score zero.
    pub fn empty() -> Self {
        Self::from_sub_scores([0.0; 8], 0)
    }

    pub fn from_sub_scores(d: [f64; 8], token_count: usize) -> Self {
        Self {
            d_lex: d[0],
            d_ent: d[1],
            d_len: d[2],
            d_pat: d[3],
            d_adj: d[4],
            d_yule: d[5],
            d_bi: d[6],
            d_func: d[7],
            d_combined: None,
            d_norm: None,
            token_count,
        }
    }

    pub fn sub_scores(&self) -> [f64; 8] {
        [
            self.d_lex, self.d_ent, self.d_len, self.d_pat, self.d_adj, self.d_yule, self.d_bi,
            self.d_func,
        ]
    }
}

/// Weighted sum of the eight sub-scores.
pub fn combined_diversity(
    report: &DiversityReport,
    weights: &DiversityWeights,
) -> Result<f64, DiversityError> {
    weights.validate()?;
    let d = report.sub_scores();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(DiversityError::MissingSubScores);
    }
    let total: f64 = d.iter().zip(weights.to_array()).map(|(d, w)| d * w).sum();
    Ok(total.clamp(0.0, 1.0))
}

/// Discounts a combined score by the saturating factor `n / (n + length_scale)`.
pub fn length_normalized_diversity(
    combined: f64,
    token_count: usize,
    length_scale: f64,
) -> Result<f64, DiversityError> {
    if !length_scale.is_finite() || length_scale <= 0.0 {
        return Err(DiversityError::InvalidParameter(format!(
            "length scale must be positive, got {length_scale}"
        )));
    }
    if !(0.0..=1.0).contains(&combined) {
        return Err(DiversityError::InvalidParameter(format!(
            "combined score {combined} outside [0, 1]"
        )));
    }
    let n = token_count as f64;
    Ok(combined * n / (n + length_scale))
}

/// Bundles lexicon, weights and length scale for one-call scoring.
#[derive(Debug, Clone)]
pub struct DiversityScorer {
    pub lexicon: FunctionWordLexicon,
    pub weights: DiversityWeights,
    pub length_scale: f64,
}

impl Default for DiversityScorer {
    fn default() -> Self {
        Self {
            lexicon: FunctionWordLexicon::builtin(),
            weights: DiversityWeights::default(),
            length_scale: DEFAULT_LENGTH_SCALE,
        }
    }
}

impl DiversityScorer {
    pub fn new(
        lexicon: FunctionWordLexicon,
        weights: DiversityWeights,
        length_scale: f64,
    ) -> Result<Self, DiversityError> {
        weights.validate()?;
        length_normalized_diversity(0.0, 1, length_scale)?;
        Ok(Self {
            lexicon,
            weights,
            length_scale,
        })
    }

    /// Full report with combined and normalized scores set.
    pub fn score(&self, text: &str) -> Result<DiversityReport, DiversityError> {
        let report = compute_sub_scores(text, &self.lexicon)?;
        self.finish(report)
    }

    /// Like [`score`](Self::score) but maps text without tokens to an
    /// all-zero report instead of an error.
    pub fn score_lenient(&self, text: &str) -> Result<DiversityReport, DiversityError> {
        match self.score(text) {
            Err(DiversityError::EmptyText) => self.finish(DiversityReport::empty()),
            other => other,
        }
    }

    pub fn finish(&self, mut report: DiversityReport) -> Result<DiversityReport, DiversityError> {
        let combined = combined_diversity(&report, &self.weights)?;
        report.d_combined = Some(combined);
        report.d_norm = Some(length_normalized_diversity(
            combined,
            report.token_count,
            self.length_scale,
        )?);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(v: f64) -> DiversityReport {
        DiversityReport::from_sub_scores([v; 8], 10)
    }

    #[test]
    fn default_weights_match_published_split() {
        let w = DiversityWeights::default();
        assert_eq!([w.lex, w.ent, w.pat, w.bi], [0.15; 4]);
        assert_eq!([w.len, w.adj, w.yule, w.func], [0.10; 4]);
        w.validate().unwrap();
    }

    #[test]
    fn combined_examples() {
        let w = DiversityWeights::default();
        assert_eq!(combined_diversity(&uniform(1.0), &w).unwrap(), 1.0);
        assert!((combined_diversity(&uniform(0.5), &w).unwrap() - 0.5).abs() < 1e-12);

        // 0.15 * (0.8 + 0.9 + 0.6 + 0.8) + 0.10 * (0.7 + 0.9 + 0.4 + 0.9)
        let r = DiversityReport::from_sub_scores([0.8, 0.9, 0.7, 0.6, 0.9, 0.4, 0.8, 0.9], 10);
        assert!((combined_diversity(&r, &w).unwrap() - 0.755).abs() < 1e-12);
    }

    #[test]
    fn invalid_weights_rejected() {
        let w = DiversityWeights {
            lex: 0.5,
            ..DiversityWeights::default()
        };
        assert!(matches!(
            combined_diversity(&uniform(1.0), &w),
            Err(DiversityError::InvalidWeights(_))
        ));
        assert!(DiversityWeights::from_array([-0.1, 0.3, 0.2, 0.2, 0.1, 0.1, 0.1, 0.1]).is_err());
    }

    #[test]
    fn length_normalization_examples() {
        assert!((length_normalized_diversity(0.8, 100, 100.0).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(length_normalized_diversity(0.0, 5000, 100.0).unwrap(), 0.0);
        let far = length_normalized_diversity(0.8, 10_000_000, 100.0).unwrap();
        assert!((far - 0.8).abs() < 1e-5 && far < 0.8);
        assert!(matches!(
            length_normalized_diversity(0.8, 10, 0.0),
            Err(DiversityError::InvalidParameter(_))
        ));
        assert!(length_normalized_diversity(0.8, 10, -3.0).is_err());
    }

    #[test]
    fn length_normalization_is_monotone() {
        let mut prev = 0.0;
        for n in 1..500 {
            let v = length_normalized_diversity(0.7, n, 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn report_serializes_flat() {
        let scorer = DiversityScorer::default();
        let report = scorer.score("The cat sat. The dog ran!").unwrap();
        let v = serde_json::to_value(&report).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "lex", "ent", "len", "pat", "adj", "yule", "bi", "func", "combined", "norm",
            "token_count",
        ] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(keys.len(), 11);
        let back: DiversityReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn lenient_scoring_of_blank_text() {
        let r = DiversityScorer::default().score_lenient("  ").unwrap();
        assert_eq!(r.d_combined, Some(0.0));
        assert_eq!(r.token_count, 0);
    }
}
