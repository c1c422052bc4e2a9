//! The chat-completion wire format and the retrying request loop.
//!
//! Requests go to `POST {base_url}/chat/completions` with an OpenAI-style
//! body; first-token option probabilities come back through
//! `choices[0].logprobs.content[0].top_logprobs`.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ClientError, DecodingParams, ModelEndpoint, Result, RetryPolicy};

/// What a completed call yields before interpretation.
pub struct RawReply {
    pub content: Option<String>,
    pub top_logprobs: Vec<(String, f64)>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: Option<ChatMessage>,
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    content: Option<Vec<TokenLogprobs>>,
}

#[derive(Deserialize)]
struct TokenLogprobs {
    top_logprobs: Option<Vec<TopLogprob>>,
}

#[derive(Deserialize)]
struct TopLogprob {
    token: String,
    logprob: f64,
}

pub fn chat_completion(
    http: &reqwest::blocking::Client,
    endpoint: &ModelEndpoint,
    prompt: &str,
    params: &DecodingParams,
    retry: &RetryPolicy,
) -> Result<RawReply> {
    let url = format!("{}/chat/completions", endpoint.base_url.trim_end_matches('/'));
    let mut body = json!({
        "model": endpoint.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
    });
    if params.top_logprobs > 0 {
        body["logprobs"] = json!(true);
        body["top_logprobs"] = json!(params.top_logprobs);
    }
    let token = match &endpoint.auth_token_env {
        Some(var) => {
            Some(std::env::var(var).map_err(|_| ClientError::AuthTokenMissing(var.clone()))?)
        }
        None => None,
    };

    let mut last_failure = String::new();
    let attempts = retry.max_attempts.max(1);
    for attempt in 1..=attempts {
        if attempt > 1 {
            // Bounded exponential backoff: base * 2^(attempt-2).
            let delay = retry.base_delay_ms.saturating_mul(1 << (attempt - 2).min(16));
            std::thread::sleep(Duration::from_millis(delay));
        }
        let mut request = http
            .post(&url)
            .timeout(Duration::from_secs(endpoint.request_timeout_secs))
            .json(&body);
        if let Some(token) = &token {
            request = request.bearer_auth(token);
        }
        match request.send() {
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    let parsed: ChatResponse = response
                        .json()
                        .map_err(|e| ClientError::MalformedReply(e.to_string()))?;
                    return interpret(parsed);
                }
                let body_text = response.text().unwrap_or_default();
                if status.is_server_error() {
                    // Transient: retry.
                    last_failure = format!("HTTP {status}: {body_text}");
                } else {
                    return Err(ClientError::Http { status: status.as_u16(), body: body_text });
                }
            }
            Err(e) => {
                last_failure = e.to_string();
            }
        }
    }
    Err(ClientError::Network { url, attempts, message: last_failure })
}

fn interpret(parsed: ChatResponse) -> Result<RawReply> {
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ClientError::MalformedReply("reply has no choices".into()))?;
    let content = choice.message.and_then(|m| m.content);
    let top_logprobs = choice
        .logprobs
        .and_then(|l| l.content)
        .and_then(|tokens| tokens.into_iter().next())
        .and_then(|first| first.top_logprobs)
        .map(|tops| tops.into_iter().map(|t| (t.token, t.logprob)).collect())
        .unwrap_or_default();
    Ok(RawReply { content, top_logprobs })
}
