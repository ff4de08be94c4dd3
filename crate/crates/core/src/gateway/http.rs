use std::time::Duration;

use serde_json::{json, Value};

use super::transport::{
    parse_chat_body, parse_embedding_body, ChatRequest, ChatResponse, EmbeddingRequest, Transport,
    TransportFailure,
};
use super::EndpointConfig;

/// Blocking OpenAI-compatible transport (`/chat/completions`, `/embeddings`).
pub struct HttpTransport {
    agent: ureq::Agent,
    base_url: String,
    api_key: String,
}

impl HttpTransport {
    pub fn new(config: &EndpointConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            base_url: config.base_url.trim_end_matches('/').to_string(),
            api_key: config.api_key.clone(),
        }
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, TransportFailure> {
        let url = format!("{}/{path}", self.base_url);
        let mut request = self.agent.post(&url).header("Content-Type", "application/json");
        if !self.api_key.is_empty() {
            request = request.header("Authorization", &format!("Bearer {}", self.api_key));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| TransportFailure::Transient(format!("{url}: {e}")))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportFailure::Transient(format!("{url}: reading body: {e}")))?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| TransportFailure::Malformed(format!("{url}: {e}"))),
            408 | 429 | 500..=599 => Err(TransportFailure::Transient(format!("{url}: HTTP {status}: {text}"))),
            _ => Err(TransportFailure::Fatal(format!("{url}: HTTP {status}: {text}"))),
        }
    }
}

pub(crate) fn chat_body(request: &ChatRequest) -> Value {
    let mut body = json!({
        "model": request.model,
        "messages": request.messages,
        "temperature": request.temperature,
        "top_p": request.top_p,
        "max_tokens": request.max_tokens,
    });
    if let Some(seed) = request.seed {
        body["seed"] = json!(seed);
    }
    if request.prefill().is_some() {
        // vLLM / SGLang convention for continuing a partial assistant turn
        body["continue_final_message"] = json!(true);
        body["add_generation_prompt"] = json!(false);
    }
    body
}

impl Transport for HttpTransport {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, TransportFailure> {
        let body = self.post("chat/completions", &chat_body(request))?;
        parse_chat_body(&body)
    }

    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, TransportFailure> {
        let body = self.post("embeddings", &json!({"model": request.model, "input": request.input}))?;
        parse_embedding_body(&body, request.input.len())
    }
}
