use std::collections::{BTreeMap, BTreeSet};

use super::tokenize::{is_word_token, segment_sentences, tokenize, TokenSequence};
use super::{DiversityError, DiversityReport};
use crate::lexicon::FunctionWordLexicon;

/// Scale of the `exp(-K / scale)` mapping of Yule's K onto `[0, 1]`.
const YULE_SCALE: f64 = 200.0;

pub fn compute_sub_scores(
    text: &str,
    lexicon: &FunctionWordLexicon,
) -> Result<DiversityReport, DiversityError> {
    let tokens = tokenize(text)?;
    Ok(sub_scores_from_tokens(&tokens, lexicon))
}

pub fn sub_scores_from_tokens(tokens: &TokenSequence, lexicon: &FunctionWordLexicon) -> DiversityReport {
    let toks = tokens.tokens();
    let counts = frequencies(toks.iter().map(String::as_str));
    let sentences = segment_sentences(tokens).sentences;

    let scores = [
        lexical(&counts, toks.len()),
        normalized_entropy(counts.values().copied()),
        sentence_length(&sentences),
        sentence_pattern(&sentences),
        adjacent_overlap(&sentences),
        yule(&counts, toks.len()),
        distinct_bigrams(toks),
        function_words(toks, lexicon),
    ];
    DiversityReport::from_sub_scores(scores.map(|s| s.clamp(0.0, 1.0)), toks.len())
}

// BTreeMap keeps summation order fixed so reports are bitwise reproducible.
fn frequencies<'a>(items: impl Iterator<Item = &'a str>) -> BTreeMap<&'a str, usize> {
    let mut counts = BTreeMap::new();
    for it in items {
        *counts.entry(it).or_insert(0) += 1;
    }
    counts
}

fn lexical(counts: &BTreeMap<&str, usize>, n: usize) -> f64 {
    counts.len() as f64 / n as f64
}

/// Shannon entropy divided by `ln(support size)`; zero for a single outcome.
fn normalized_entropy(counts: impl Iterator<Item = usize>) -> f64 {
    let counts: Vec<usize> = counts.filter(|&c| c > 0).collect();
    if counts.len() <= 1 {
        return 0.0;
    }
    let total: usize = counts.iter().sum();
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    h / (counts.len() as f64).ln()
}

fn sentence_length(sentences: &[Vec<String>]) -> f64 {
    if sentences.len() < 2 {
        return 0.0;
    }
    let lens: Vec<f64> = sentences.iter().map(|s| s.len() as f64).collect();
    let mean = crate::stats::mean(&lens);
    let cv = crate::stats::population_std(&lens) / mean;
    cv / (1.0 + cv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SentenceClass {
    Declarative,
    Interrogative,
    Exclamatory,
    Fragment,
}

fn classify(sentence: &[String]) -> SentenceClass {
    match sentence.last().map(String::as_str) {
        Some(".") => SentenceClass::Declarative,
        Some("?") => SentenceClass::Interrogative,
        Some("!") => SentenceClass::Exclamatory,
        _ => SentenceClass::Fragment,
    }
}

fn sentence_pattern(sentences: &[Vec<String>]) -> f64 {
    let mut counts: BTreeMap<SentenceClass, usize> = BTreeMap::new();
    for s in sentences {
        *counts.entry(classify(s)).or_insert(0) += 1;
    }
    normalized_entropy(counts.into_values())
}

/// Mean Jaccard distance between the word sets of consecutive sentences.
/// Punctuation is excluded from the sets; two empty sets are at distance 0.
fn adjacent_overlap(sentences: &[Vec<String>]) -> f64 {
    if sentences.len() < 2 {
        return 0.0;
    }
    let sets: Vec<BTreeSet<&str>> = sentences
        .iter()
        .map(|s| {
            s.iter()
                .map(String::as_str)
                .filter(|t| is_word_token(t))
                .collect()
        })
        .collect();
    let distances: Vec<f64> = sets
        .windows(2)
        .map(|pair| {
            let union = pair[0].union(&pair[1]).count();
            if union == 0 {
                return 0.0;
            }
            let inter = pair[0].intersection(&pair[1]).count();
            1.0 - inter as f64 / union as f64
        })
        .collect();
    crate::stats::mean(&distances)
}

/// Yule's K = 10^4 (sum_m m^2 V(m) - N) / N^2, mapped through `exp(-K / 200)`.
pub(crate) fn yules_k(counts: &BTreeMap<&str, usize>, n: usize) -> f64 {
    let n = n as f64;
    // sum over types of freq^2 equals sum_m m^2 V(m)
    let s2: f64 = counts.values().map(|&c| (c * c) as f64).sum();
    1e4 * (s2 - n) / (n * n)
}

fn yule(counts: &BTreeMap<&str, usize>, n: usize) -> f64 {
    (-yules_k(counts, n) / YULE_SCALE).exp()
}

fn distinct_bigrams(toks: &[String]) -> f64 {
    if toks.len() < 2 {
        return 1.0;
    }
    let bigrams: BTreeSet<(&str, &str)> =
        toks.windows(2).map(|w| (w[0].as_str(), w[1].as_str())).collect();
    bigrams.len() as f64 / (toks.len() - 1) as f64
}

fn function_words(toks: &[String], lexicon: &FunctionWordLexicon) -> f64 {
    let counts = frequencies(toks.iter().map(String::as_str).filter(|t| lexicon.contains(t)));
    normalized_entropy(counts.into_values())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(text: &str) -> DiversityReport {
        compute_sub_scores(text, &FunctionWordLexicon::builtin()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn single_type_degenerate_case() {
        let r = report("a a a a");
        assert!(close(r.d_lex, 0.25));
        assert_eq!(r.d_ent, 0.0);
        assert!(close(r.d_bi, 1.0 / 3.0));
        assert_eq!(r.token_count, 4);
    }

    #[test]
    fn yule_hand_computed() {
        let toks = tokenize("a a a a").unwrap();
        let counts = frequencies(toks.tokens().iter().map(String::as_str));
        // V(4) = 1: 10^4 (16 - 4) / 16
        assert!(close(yules_k(&counts, 4), 7500.0));
        assert!(close(report("a a a a").d_yule, (-37.5f64).exp()));
        // all-distinct text has K = 0
        assert_eq!(report("one two three four").d_yule, 1.0);
    }

    #[test]
    fn adjacent_jaccard_hand_computed() {
        // {the, cat, sat} vs {the, dog, ran}: 1 - 1/5
        assert!(close(report("the cat sat . the dog ran .").d_adj, 0.8));
        assert_eq!(report("one sentence only.").d_adj, 0.0);
        assert_eq!(report("same words. same words.").d_adj, 0.0);
    }

    #[test]
    fn sentence_length_cv() {
        // lengths 3 and 2: mean 2.5, population std 0.5, cv 0.2
        assert!(close(report("a b . c .").d_len, 0.2 / 1.2));
        assert_eq!(report("a b c d.").d_len, 0.0);
        assert_eq!(report("a b . c d .").d_len, 0.0);
    }

    #[test]
    fn sentence_pattern_entropy() {
        assert!(close(report("a . b ?").d_pat, 1.0));
        assert_eq!(report("a . b .").d_pat, 0.0);
        let expected = -(2.0 / 3.0 * (2.0f64 / 3.0).ln() + 1.0 / 3.0 * (1.0f64 / 3.0).ln()) / 2f64.ln();
        assert!(close(report("a . b . c ?").d_pat, expected));
        // four classes, one each
        assert!(close(report("a . b ? c ! d").d_pat, 1.0));
    }

    #[test]
    fn function_word_entropy() {
        let expected = -(2.0 / 3.0 * (2.0f64 / 3.0).ln() + 1.0 / 3.0 * (1.0f64 / 3.0).ln()) / 2f64.ln();
        assert!(close(report("the cat and the dog").d_func, expected));
        assert_eq!(report("the cat the dog").d_func, 0.0);
        assert_eq!(report("cats dogs").d_func, 0.0);
    }

    #[test]
    fn bigrams_of_single_token() {
        assert_eq!(report("word").d_bi, 1.0);
        assert!(close(report("a b a b").d_bi, 2.0 / 3.0));
    }

    #[test]
    fn entropy_uniform_is_one() {
        assert!(close(report("a b c d").d_ent, 1.0));
    }

    #[test]
    fn reports_are_bitwise_deterministic() {
        let text = "Why would the parent object? The educator insists, and the student waits!";
        let a = report(text);
        let b = report(text);
        assert_eq!(a.sub_scores().map(f64::to_bits), b.sub_scores().map(f64::to_bits));
    }
}
