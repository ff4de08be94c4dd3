use std::sync::LazyLock;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use sha2::{Digest, Sha256};

use super::transport::{ChatRequest, ChatResponse, EmbeddingRequest, Transport, TransportFailure};
use super::DEFAULT_DELIMITER;
use crate::eval::{AnswerFormat, AnswerFormatKind};
use crate::prompts::{ROLES_LINE_PREFIX, ROLE_LINES_MARKER, ROLE_LIST_MARKER};

const ROLE_POOL: &[&str] = &[
    "Emergency room doctor",
    "Police officer",
    "Accident analyst",
    "Educator",
    "Parent",
    "Student",
    "Economist",
    "Ethicist",
    "Sociologist",
    "Historian",
    "Local resident",
    "Journalist",
    "Judge",
    "Nurse",
    "Small business owner",
    "Environmental activist",
    "Software engineer",
    "Religious leader",
    "Psychologist",
    "Tourist",
];

const OPENERS: &[&str] = &[
    "First, I should consider what the question is really asking",
    "Let me look at the situation from this angle",
    "The key detail here is the context given",
    "Someone in this position would notice the practical consequences",
    "There is an assumption hidden in the wording",
    "I need to weigh the evidence before deciding",
];

const MIDDLES: &[&str] = &[
    "the people involved may not share the same priorities",
    "fairness matters more than convenience in this case",
    "the stated facts do not support a stereotype",
    "experience suggests a cautious reading",
    "the most direct interpretation is usually right",
    "cultural background could change the expected answer",
    "risks and benefits both deserve attention",
    "nothing in the context settles it definitively",
];

const CLOSERS: &[&str] = &[
    "so the answer follows from that",
    "which points toward one option",
    "and that changes my view slightly",
    "therefore I will commit to a choice",
    "although another reading is possible",
];

static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"]+)""#).unwrap());
static BOLD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*\*([^*]+)\*\*").unwrap());

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

fn rng_for(parts: &[&[u8]]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(digest(parts))
}

/// Deterministic unit vector derived from the text's hash.
pub(crate) fn hashed_unit_vector(text: &str, dim: usize) -> Vec<f64> {
    let mut rng = rng_for(&[b"embed", text.as_bytes()]);
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        return e;
    }
    v.into_iter().map(|x| x / norm).collect()
}

/// Offline stand-in for a reasoning model.
///
/// Output is a pure function of the request: role-generation prompts get a
/// bracketed role list, reasoning prompts get a short think segment closed by
/// `</think>` and an answer in whatever marker format the prompt asks for.
/// Sampled requests (temperature > 0) deviate from the prompt's preferred
/// answer about a quarter of the time.
#[derive(Debug, Clone)]
pub struct SyntheticModel {
    pub embedding_dim: usize,
    pub delimiter: String,
}

impl Default for SyntheticModel {
    fn default() -> Self {
        Self {
            embedding_dim: 32,
            delimiter: DEFAULT_DELIMITER.into(),
        }
    }
}

fn detect_format(prompt: &str) -> AnswerFormat {
    let sentence_after = |marker: &str| -> Option<&str> {
        let start = prompt.find(marker)?;
        let rest = &prompt[start..];
        Some(rest.split('\n').next().unwrap_or(rest))
    };
    let quoted = |s: &str| -> Vec<String> { QUOTED.captures_iter(s).map(|c| c[1].to_string()).collect() };
    let candidates = [
        ("format **X. answer** where X is", AnswerFormatKind::BoldLetter),
        ("format **(X) answer** where X is", AnswerFormatKind::BoldParen),
    ];
    for (marker, kind) in candidates {
        if let Some(s) = sentence_after(marker) {
            let alphabet = quoted(s);
            if !alphabet.is_empty() {
                return AnswerFormat { pattern_kind: kind, alphabet };
            }
        }
    }
    if let Some(s) = sentence_after("Please answer with **") {
        let alphabet: Vec<String> = BOLD.captures_iter(s).map(|c| c[1].to_string()).collect();
        if !alphabet.is_empty() {
            return AnswerFormat {
                pattern_kind: AnswerFormatKind::BoldWord,
                alphabet,
            };
        }
    }
    if let Some(s) = sentence_after("Format your answer as **X** where X is ") {
        let list = s["Format your answer as **X** where X is ".len()..].trim_end_matches('.');
        let alphabet: Vec<String> = list
            .split(',')
            .flat_map(|p| p.split(" or "))
            .map(str::trim)
            .filter(|t| !t.is_empty() && *t != "or")
            .map(|t| t.trim_start_matches("or ").to_string())
            .collect();
        if !alphabet.is_empty() {
            return AnswerFormat {
                pattern_kind: AnswerFormatKind::BoldBare,
                alphabet,
            };
        }
    }
    AnswerFormat {
        pattern_kind: AnswerFormatKind::BoldBare,
        alphabet: vec!["A".into(), "B".into()],
    }
}

impl SyntheticModel {
    fn choose(&self, alphabet: &[String], preferred_key: &[&[u8]], rng: &mut ChaCha8Rng, sampled: bool) -> String {
        let preferred = digest(preferred_key)[0] as usize % alphabet.len();
        if sampled && rng.random_bool(0.25) {
            return alphabet.choose(rng).expect("non-empty alphabet").clone();
        }
        alphabet[preferred].clone()
    }

    fn think(&self, rng: &mut ChaCha8Rng) -> String {
        let n = rng.random_range(2..=6);
        (0..n)
            .map(|_| {
                let punct = if rng.random_bool(0.15) { "?" } else { "." };
                format!(
                    "{}, {} {}{punct}",
                    OPENERS.choose(rng).unwrap(),
                    MIDDLES.choose(rng).unwrap(),
                    CLOSERS.choose(rng).unwrap()
                )
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn respond(&self, request: &ChatRequest) -> String {
        let user = request.user_prompt();
        let prefill = request.prefill().unwrap_or("");
        let seed = request.seed.unwrap_or(0);
        let sampled = request.temperature > 0.0;
        let temp_bits = request.temperature.to_bits().to_le_bytes();
        let seed_bytes = seed.to_le_bytes();
        let mut rng = rng_for(&[
            request.model.as_bytes(),
            user.as_bytes(),
            prefill.as_bytes(),
            &temp_bits,
            &seed_bytes,
        ]);

        let closed = prefill.contains(self.delimiter.as_str());
        let mut out = String::new();
        if !closed {
            out.push(' ');
            out.push_str(&self.think(&mut rng));
            out.push('\n');
            out.push_str(&self.delimiter);
            out.push_str("\n\n");
        }

        if user.contains(ROLE_LIST_MARKER) {
            let n = rng.random_range(2..=4);
            let roles: Vec<&str> = ROLE_POOL.choose_multiple(&mut rng, n).copied().collect();
            out.push_str(&format!("[{}]", roles.join(", ")));
            return out;
        }

        let format = detect_format(user);
        if user.contains(ROLE_LINES_MARKER) {
            let roles: Vec<&str> = user
                .lines()
                .find_map(|l| l.strip_prefix(ROLES_LINE_PREFIX))
                .map(|l| l.split("; ").map(str::trim).filter(|r| !r.is_empty()).collect())
                .unwrap_or_default();
            let lines: Vec<String> = roles
                .iter()
                .map(|role| {
                    let token = self.choose(&format.alphabet, &[user.as_bytes(), role.as_bytes()], &mut rng, sampled);
                    format!("{role}: {token}")
                })
                .collect();
            out.push_str(&lines.join("\n"));
            return out;
        }

        let token = self.choose(&format.alphabet, &[user.as_bytes()], &mut rng, sampled);
        out.push_str(&format!("Final answer: {}", format.render(&token)));
        out
    }
}

impl Transport for SyntheticModel {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, TransportFailure> {
        Ok(ChatResponse {
            text: self.respond(request),
            finish_reason: Some("stop".into()),
        })
    }

    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, TransportFailure> {
        Ok(request
            .input
            .iter()
            .map(|t| hashed_unit_vector(t, self.embedding_dim))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::extract_answer;
    use crate::gateway::ChatMessage;
    use crate::prompts;

    fn request(prompt: &str, prefill: &str, seed: u64) -> ChatRequest {
        ChatRequest {
            model: "synthetic".into(),
            messages: vec![ChatMessage::user(prompt), ChatMessage::assistant(prefill)],
            temperature: 1.0,
            top_p: 0.95,
            max_tokens: 512,
            seed: Some(seed),
        }
    }

    #[test]
    fn detects_every_format() {
        for kind in [
            AnswerFormatKind::BoldLetter,
            AnswerFormatKind::BoldParen,
            AnswerFormatKind::BoldWord,
            AnswerFormatKind::BoldBare,
        ] {
            let f = AnswerFormat::with_default_alphabet(kind);
            let prompt = prompts::evaluation("Q?", None, &f, None);
            assert_eq!(detect_format(&prompt), f, "{kind:?}");
        }
    }

    #[test]
    fn answers_in_requested_format() {
        let model = SyntheticModel::default();
        let f = AnswerFormat::with_default_alphabet(AnswerFormatKind::BoldParen);
        let prompt = prompts::evaluation("Where from?", None, &f, None);
        let text = model.respond(&request(&prompt, "<think>", 0));
        assert_eq!(text.matches(DEFAULT_DELIMITER).count(), 1);
        assert!(extract_answer(&text, &f).is_some(), "{text}");
        // deterministic
        assert_eq!(text, model.respond(&request(&prompt, "<think>", 0)));
    }

    #[test]
    fn role_lists_parse() {
        let text = SyntheticModel::default().respond(&request(&prompts::role_generation("Q?"), "<think>", 1));
        let list = text.rsplit_once(DEFAULT_DELIMITER).unwrap().1.trim();
        assert!(list.starts_with('[') && list.ends_with(']'), "{list}");
    }

    #[test]
    fn embeddings_are_unit_and_deterministic() {
        let a = hashed_unit_vector("educator", 16);
        assert_eq!(a, hashed_unit_vector("educator", 16));
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
