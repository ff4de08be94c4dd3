use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// One chat-completions call. When the last message is an assistant turn the
/// server is asked to continue it rather than open a new turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn user_prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }

    /// Assistant text the completion continues from, if any.
    pub fn prefill(&self) -> Option<&str> {
        self.messages
            .last()
            .filter(|m| m.role == "assistant")
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub model: String,
    pub input: Vec<String>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransportFailure {
    /// Timeouts, connection resets, 429 and 5xx: worth retrying.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Wire-level access to a chat/embedding model.
pub trait Transport: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, TransportFailure>;
    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, TransportFailure>;
}

/// Extracts `choices[0].message.content` from an OpenAI-style body.
pub fn parse_chat_body(body: &serde_json::Value) -> Result<ChatResponse, TransportFailure> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| TransportFailure::Malformed("missing choices[0]".into()))?;
    let text = choice
        .get("message")
        .and_then(|m| m.get("content"))
        .or_else(|| choice.get("text"))
        .and_then(|t| t.as_str())
        .ok_or_else(|| TransportFailure::Malformed("missing message content".into()))?;
    Ok(ChatResponse {
        text: text.to_string(),
        finish_reason: choice
            .get("finish_reason")
            .and_then(|f| f.as_str())
            .map(str::to_string),
    })
}

pub fn parse_embedding_body(body: &serde_json::Value, expected: usize) -> Result<Vec<Vec<f64>>, TransportFailure> {
    let data = body
        .get("data")
        .and_then(|d| d.as_array())
        .ok_or_else(|| TransportFailure::Malformed("missing data array".into()))?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
    for (pos, item) in data.iter().enumerate() {
        let index = item
            .get("index")
            .and_then(|i| i.as_u64())
            .map(|i| i as usize)
            .unwrap_or(pos);
        let vector = item
            .get("embedding")
            .and_then(|e| e.as_array())
            .ok_or_else(|| TransportFailure::Malformed("missing embedding".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| TransportFailure::Malformed("non-numeric embedding".into())))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((index, vector));
    }
    rows.sort_by_key(|(i, _)| *i);
    if rows.len() != expected {
        return Err(TransportFailure::Malformed(format!(
            "expected {expected} embeddings, got {}",
            rows.len()
        )));
    }
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn parses_chat_body() {
        let body = json!({"choices":[{"message":{"role":"assistant","content":"hi"},"finish_reason":"stop"}]});
        let r = parse_chat_body(&body).unwrap();
        assert_eq!(r.text, "hi");
        assert_eq!(r.finish_reason.as_deref(), Some("stop"));
        assert!(matches!(parse_chat_body(&json!({"x":1})), Err(TransportFailure::Malformed(_))));
    }

    #[test]
    fn embeddings_sorted_by_index() {
        let body = json!({"data":[{"index":1,"embedding":[0.0,1.0]},{"index":0,"embedding":[1.0,0.0]}]});
        let v = parse_embedding_body(&body, 2).unwrap();
        assert_eq!(v, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(parse_embedding_body(&body, 3).is_err());
    }
}
