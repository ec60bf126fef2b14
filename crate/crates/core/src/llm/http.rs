use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatClient, ChatRequest, ChatResponse, LlmError, Usage, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on every further retry.
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_backoff: Duration::from_millis(500) }
    }
}

/// OpenAI-compatible chat-completions client.
///
/// Transport failures, timeouts, HTTP 429 and 5xx responses are retried with
/// exponential backoff. Authentication failures and other 4xx responses are
/// returned immediately. Content is never inspected here; schema problems
/// are the validators' business.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    endpoint: String,
    api_key: Option<String>,
    default_model: Option<String>,
    retry: RetryPolicy,
    http: reqwest::blocking::Client,
}

enum Attempt {
    Done(Result<ChatResponse, LlmError>),
    Retry(LlmError),
}

impl HttpChatClient {
    /// `endpoint` is either a base URL (`…/v1`) or the full
    /// `…/chat/completions` URL.
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        let mut endpoint = endpoint.into().trim_end_matches('/').to_string();
        if !endpoint.ends_with("/chat/completions") {
            endpoint.push_str("/chat/completions");
        }
        Self {
            endpoint,
            api_key,
            default_model: None,
            retry: RetryPolicy::default(),
            http: reqwest::blocking::Client::new(),
        }
    }

    /// Reads `DECOR_LLM_ENDPOINT`, `DECOR_LLM_API_KEY` and `DECOR_LLM_MODEL`.
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENV_ENDPOINT).map_err(|_| LlmError::NotConfigured(format!("{ENV_ENDPOINT} is not set")))?;
        let mut client = Self::new(endpoint, std::env::var(ENV_API_KEY).ok());
        client.default_model = std::env::var(ENV_MODEL).ok();
        Ok(client)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.default_model = Some(model.into());
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn default_model(&self) -> Option<&str> {
        self.default_model.as_deref()
    }

    fn body(&self, req: &ChatRequest) -> Value {
        let model = if req.model.is_empty() { self.default_model.clone().unwrap_or_default() } else { req.model.clone() };
        let mut body = json!({
            "model": model,
            "messages": req.messages,
            "temperature": req.temperature,
        });
        if let Ok(schema) = serde_json::from_str::<Value>(&req.response_schema) {
            let name = schema.get("title").and_then(Value::as_str).unwrap_or("response").to_string();
            body["response_format"] = json!({
                "type": "json_schema",
                "json_schema": { "name": name, "schema": schema, "strict": false }
            });
        }
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, req: &ChatRequest, body: &Value, attempts: u32) -> Attempt {
        let mut call = self
            .http
            .post(&self.endpoint)
            .timeout(Duration::from_secs_f64(req.timeout_s))
            .json(body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = match call.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::Timeout { attempts }),
            Err(e) => return Attempt::Retry(LlmError::Transport { attempts, message: e.to_string() }),
        };
        let status = resp.status().as_u16();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::Timeout { attempts }),
            Err(e) => return Attempt::Retry(LlmError::Transport { attempts, message: e.to_string() }),
        };
        match status {
            200..=299 => Attempt::Done(parse_completion(&text)),
            401 | 403 => Attempt::Done(Err(LlmError::Authentication { status })),
            429 | 500..=599 => Attempt::Retry(LlmError::Transport { attempts, message: format!("HTTP {status}: {text}") }),
            _ => Attempt::Done(Err(LlmError::Http { status, body: text })),
        }
    }
}

fn parse_completion(text: &str) -> Result<ChatResponse, LlmError> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| LlmError::Transport { attempts: 1, message: format!("unreadable completion body: {e}") })?;
    let choice = &v["choices"][0];
    let content = choice["message"]["content"].as_str().unwrap_or_default().to_string();
    if content.is_empty() {
        return Err(LlmError::EmptyResponse);
    }
    Ok(ChatResponse {
        content,
        finish_reason: choice["finish_reason"].as_str().unwrap_or("stop").to_string(),
        usage: Usage {
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        },
    })
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let body = self.body(request);
        let mut last = None;
        for attempt in 0..=self.retry.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.retry.base_backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(request, &body, attempt + 1) {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) => {
                    log::debug!("chat completion attempt {} failed: {err}", attempt + 1);
                    last = Some(err);
                }
            }
        }
        Err(last.unwrap_or(LlmError::Transport { attempts: 0, message: "no attempt made".into() }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_is_normalised() {
        assert_eq!(HttpChatClient::new("http://x/v1/", None).endpoint(), "http://x/v1/chat/completions");
        assert_eq!(HttpChatClient::new("http://x/v1/chat/completions", None).endpoint(), "http://x/v1/chat/completions");
    }

    #[test]
    fn completion_body_is_parsed() {
        let text = r#"{"choices":[{"message":{"role":"assistant","content":"{\"a\":1}"},"finish_reason":"stop"}],"usage":{"prompt_tokens":5,"completion_tokens":3}}"#;
        let r = parse_completion(text).unwrap();
        assert_eq!(r.content, "{\"a\":1}");
        assert_eq!(r.usage, Usage { prompt_tokens: 5, completion_tokens: 3 });
    }

    #[test]
    fn empty_content_is_an_error() {
        let text = r#"{"choices":[{"message":{"role":"assistant","content":""},"finish_reason":"stop"}]}"#;
        assert_eq!(parse_completion(text), Err(LlmError::EmptyResponse));
    }

    #[test]
    fn request_body_includes_schema_and_seed() {
        let c = HttpChatClient::new("http://x", None).with_model("m");
        let req = ChatRequest {
            model: String::new(),
            messages: vec![super::super::ChatMessage::user("hi")],
            response_schema: r#"{"title":"asset_proposal","type":"object"}"#.into(),
            temperature: 0.2,
            seed: Some(7),
            timeout_s: 5.0,
        };
        let body = c.body(&req);
        assert_eq!(body["model"], "m");
        assert_eq!(body["seed"], 7);
        assert_eq!(body["response_format"]["json_schema"]["name"], "asset_proposal");
    }
}
