use serde::{Deserialize, Serialize};

use super::DiversityError;

/// Lowercased word and punctuation tokens of one text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    /// Wraps pre-split tokens. Callers are responsible for the tokenizer's
    /// conventions (lowercase, single-character punctuation).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, DiversityError> {
        if tokens.is_empty() {
            return Err(DiversityError::EmptyText);
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token-level concatenation.
    pub fn concat(&self, other: &TokenSequence) -> TokenSequence {
        let mut tokens = self.tokens.clone();
        tokens.extend(other.tokens.iter().cloned());
        TokenSequence { tokens }
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// True for tokens made of word characters (as opposed to punctuation).
pub fn is_word_token(token: &str) -> bool {
    token.chars().next().is_some_and(is_word_char)
}

/// Splits text into lowercased word runs and single-character punctuation
/// tokens. Whitespace separates tokens and is dropped.
pub fn tokenize(text: &str) -> Result<TokenSequence, DiversityError> {
    // Lowercase first: some lowercase mappings expand into several chars and
    // classification must see the final form for re-tokenization to be stable.
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in lowered.chars() {
        if is_word_char(c) {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    TokenSequence::from_tokens(tokens)
}

/// Sentences of a token sequence, split after `.`, `!` or `?`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSegmentation {
    pub sentences: Vec<Vec<String>>,
    /// Start index of each sentence in the parent sequence.
    pub boundaries: Vec<usize>,
}

pub(crate) fn is_terminal(token: &str) -> bool {
    matches!(token, "." | "!" | "?")
}

pub fn segment_sentences(tokens: &TokenSequence) -> SentenceSegmentation {
    let mut sentences = Vec::new();
    let mut boundaries = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for (i, tok) in tokens.tokens().iter().enumerate() {
        if current.is_empty() {
            boundaries.push(i);
        }
        current.push(tok.clone());
        if is_terminal(tok) {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    SentenceSegmentation {
        sentences,
        boundaries,
    }
}
