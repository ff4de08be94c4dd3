//! WebAssembly bindings for the browser demo. Every export takes and returns
//! plain strings (JSON where structured); the `*_json` functions hold the
//! logic so they can be tested natively.

use divr_core::diversity::{
    length_normalized_diversity, DiversityScorer, DiversityWeights, DEFAULT_LENGTH_SCALE, SUB_SCORE_NAMES,
};
use divr_core::scoring::serve_score_json;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct SubScore {
    name: &'static str,
    value: f64,
    weight: f64,
}

#[derive(Serialize)]
struct Report {
    sub_scores: Vec<SubScore>,
    combined: f64,
    norm: f64,
    token_count: usize,
}

pub fn diversity_report_json(text: &str, length_scale: f64) -> Result<String, String> {
    let base = DiversityScorer::default();
    let scorer = DiversityScorer::new(base.lexicon, base.weights, length_scale).map_err(|e| e.to_string())?;
    let r = scorer.score(text).map_err(|e| e.to_string())?;
    let weights = DiversityWeights::default().to_array();
    let sub_scores = SUB_SCORE_NAMES
        .iter()
        .zip(r.sub_scores())
        .zip(weights)
        .map(|((&name, value), weight)| SubScore { name, value, weight })
        .collect();
    let report = Report {
        sub_scores,
        combined: r.d_combined.unwrap_or(0.0),
        norm: r.d_norm.unwrap_or(0.0),
        token_count: r.token_count,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// `[[n, norm(n)], ...]` for `n` in `0..=max_tokens` (at most 200 points).
pub fn length_curve_json(combined: f64, length_scale: f64, max_tokens: usize) -> Result<String, String> {
    let step = (max_tokens / 200).max(1);
    let points = (0..=max_tokens)
        .step_by(step)
        .map(|n| length_normalized_diversity(combined, n, length_scale).map(|v| (n, v)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

pub fn score_group_json(request: &str) -> Result<String, String> {
    let resp = serve_score_json(request.as_bytes(), &DiversityScorer::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&resp).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn diversity_report(text: &str, length_scale: f64) -> Result<String, JsError> {
    diversity_report_json(text, length_scale).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn length_curve(combined: f64, length_scale: f64, max_tokens: usize) -> Result<String, JsError> {
    length_curve_json(combined, length_scale, max_tokens).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn score_group(request: &str) -> Result<String, JsError> {
    score_group_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn default_length_scale() -> f64 {
    DEFAULT_LENGTH_SCALE
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn report_lists_eight_weighted_scores() {
        let v: Value = serde_json::from_str(&diversity_report_json("a a a a", 100.0).unwrap()).unwrap();
        assert_eq!(v["sub_scores"].as_array().unwrap().len(), 8);
        assert_eq!(v["sub_scores"][0]["value"], 0.25);
        assert_eq!(v["token_count"], 4);
    }

    #[test]
    fn empty_text_and_bad_scale_are_errors() {
        assert!(diversity_report_json("   ", 100.0).is_err());
        assert!(diversity_report_json("hello", 0.0).is_err());
    }

    #[test]
    fn curve_hits_half_at_the_scale() {
        let pts: Vec<(usize, f64)> = serde_json::from_str(&length_curve_json(0.8, 100.0, 200).unwrap()).unwrap();
        assert_eq!(pts[0], (0, 0.0));
        assert!(pts.contains(&(100, 0.4)));
        assert_eq!(pts.len(), 201);
    }

    #[test]
    fn group_scoring_round_trips() {
        let body = r#"{"completions":["**A. x**","**B. y**"],"ground_truth":{"mode":"convergent","scalar_answer":"A"},
            "answer_format":{"pattern_kind":"bold_letter","alphabet":["A","B"]}}"#;
        let v: Value = serde_json::from_str(&score_group_json(body).unwrap()).unwrap();
        let adv: Vec<f64> = serde_json::from_value(v["advantages"].clone()).unwrap();
        assert!(adv[0] > 0.0 && adv[1] < 0.0);
        assert!(score_group_json("[").is_err());
    }
}
