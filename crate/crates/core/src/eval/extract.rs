use std::str::FromStr;
use std::sync::LazyLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::gateway::DEFAULT_DELIMITER;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerFormatKind {
    /// `**X. answer**`
    BoldLetter,
    /// `**(X) answer**`
    BoldParen,
    /// `**Yes**` / `**No**`
    BoldWord,
    /// `**X**`
    BoldBare,
}

impl FromStr for AnswerFormatKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bold_letter" => Ok(Self::BoldLetter),
            "bold_paren" => Ok(Self::BoldParen),
            "bold_word" => Ok(Self::BoldWord),
            "bold_bare" => Ok(Self::BoldBare),
            _ => Err(EvalError::InvalidFormat(format!("unknown answer format {s:?}"))),
        }
    }
}

static BOLD_LETTER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\*\*\s*([A-Za-z0-9]+)\s*\.[^*]*\*\*").unwrap());
static BOLD_PAREN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\*\*\s*\(\s*([A-Za-z0-9]+)\s*\)[^*]*\*\*").unwrap());
static BOLD_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*\*\s*([A-Za-z]+)\s*[.!]?\s*\*\*").unwrap());
static BOLD_BARE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*\*\s*([A-Za-z0-9]+)\s*\*\*").unwrap());
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9]+").unwrap());

impl AnswerFormatKind {
    fn pattern(self) -> &'static Regex {
        match self {
            Self::BoldLetter => &BOLD_LETTER,
            Self::BoldParen => &BOLD_PAREN,
            Self::BoldWord => &BOLD_WORD,
            Self::BoldBare => &BOLD_BARE,
        }
    }

    pub fn default_alphabet(self) -> Vec<String> {
        let v: &[&str] = match self {
            Self::BoldLetter => &["A", "B", "C"],
            Self::BoldParen => &["A", "B", "C", "D", "E"],
            Self::BoldWord => &["Yes", "No"],
            Self::BoldBare => &["E", "N", "C"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }
}

/// Marker convention the model is asked to answer in, plus the allowed tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerFormat {
    pub pattern_kind: AnswerFormatKind,
    pub alphabet: Vec<String>,
}

impl AnswerFormat {
    pub fn new(pattern_kind: AnswerFormatKind, alphabet: Vec<String>) -> Result<Self, EvalError> {
        let f = Self { pattern_kind, alphabet };
        f.validate()?;
        Ok(f)
    }

    pub fn with_default_alphabet(pattern_kind: AnswerFormatKind) -> Self {
        Self {
            pattern_kind,
            alphabet: pattern_kind.default_alphabet(),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.alphabet.is_empty() || self.alphabet.iter().any(|t| t.trim().is_empty()) {
            return Err(EvalError::InvalidFormat("answer alphabet must be non-empty".into()));
        }
        Ok(())
    }

    /// Canonical alphabet entry for `raw`, compared case-insensitively.
    pub fn normalize(&self, raw: &str) -> Option<String> {
        let raw = raw.trim();
        self.alphabet
            .iter()
            .find(|a| a.eq_ignore_ascii_case(raw))
            .cloned()
    }

    /// Marker text for `token`, which [`extract_answer`] maps back to `token`.
    pub fn render(&self, token: &str) -> String {
        match self.pattern_kind {
            AnswerFormatKind::BoldLetter => format!("**{token}.**"),
            AnswerFormatKind::BoldParen => format!("**({token})**"),
            AnswerFormatKind::BoldWord | AnswerFormatKind::BoldBare => format!("**{token}**"),
        }
    }

    /// Prompt sentence asking for this format.
    pub fn instruction(&self) -> String {
        let quoted: Vec<String> = self.alphabet.iter().map(|a| format!("\"{a}\"")).collect();
        match self.pattern_kind {
            AnswerFormatKind::BoldLetter => format!(
                "Your answer should be in the format **X. answer** where X is {}.",
                join_or(&quoted)
            ),
            AnswerFormatKind::BoldParen => format!(
                "Your answer should be in the format **(X) answer** where X is {}.",
                quoted.join(", ")
            ),
            AnswerFormatKind::BoldWord => {
                let bold: Vec<String> = self.alphabet.iter().map(|a| format!("**{a}**")).collect();
                format!("Please answer with {}.", join_or(&bold))
            }
            AnswerFormatKind::BoldBare => format!(
                "Format your answer as **X** where X is {}.",
                join_or(&self.alphabet)
            ),
        }
    }
}

fn join_or(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} or {b}"),
        [init @ .., last] => format!("{}, or {last}", init.join(", ")),
    }
}

fn after_delimiter<'a>(text: &'a str, delimiter: &str) -> Option<&'a str> {
    text.rfind(delimiter).map(|p| &text[p + delimiter.len()..])
}

fn last_match(region: &str, format: &AnswerFormat) -> Option<String> {
    format
        .pattern_kind
        .pattern()
        .captures_iter(region)
        .filter_map(|c| format.normalize(&c[1]))
        .last()
}

/// Last well-formed answer marker after the end-of-thinking delimiter,
/// falling back to the whole text.
pub fn extract_answer(text: &str, format: &AnswerFormat) -> Option<String> {
    extract_answer_with(text, format, DEFAULT_DELIMITER)
}

pub fn extract_answer_with(text: &str, format: &AnswerFormat, delimiter: &str) -> Option<String> {
    after_delimiter(text, delimiter)
        .and_then(|region| last_match(region, format))
        .or_else(|| last_match(text, format))
}

/// Per-role answers from lines of the form `role: X`. Roles without such a
/// line map to `None`.
pub fn extract_role_answers(
    text: &str,
    roles: &[String],
    format: &AnswerFormat,
    delimiter: &str,
) -> IndexMap<String, Option<String>> {
    let scan = |region: &str, role: &str| -> Option<String> {
        let needle = format!("{}:", role.to_lowercase());
        region
            .lines()
            .rev()
            .filter_map(|line| {
                let trimmed = line.trim_start_matches(|c: char| c.is_whitespace() || c == '-' || c == '*');
                let lower = trimmed.to_lowercase();
                if !lower.starts_with(&needle) {
                    return None;
                }
                // lowercasing can shift byte offsets for non-ASCII names
                let rest = trimmed.get(needle.len()..).unwrap_or("");
                last_match(rest, format).or_else(|| {
                    WORD.find_iter(rest)
                        .find_map(|m| format.normalize(m.as_str()))
                })
            })
            .next()
    };
    roles
        .iter()
        .map(|role| {
            let found = after_delimiter(text, delimiter)
                .and_then(|region| scan(region, role))
                .or_else(|| scan(text, role));
            (role.clone(), found)
        })
        .collect()
}
