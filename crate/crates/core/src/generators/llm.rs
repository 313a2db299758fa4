//! Blocking chat-completion client.
//!
//! Every sample is a fresh HTTP request with temperature > 0, so successive
//! generations share no sampling state on the client side.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{GeneratorError, GeneratorSample, SampleSource, Verifier};

fn default_max_tokens() -> u32 {
    64
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_api_key_env() -> String {
    "CCI_API_KEY".to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Full URL of the chat-completions route.
    pub url: String,
    pub model: String,
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Extra attempts after the first one for transient failures.
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Delay before retry `k` (0-based) is `backoff_base_ms · 2^k`.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub system_prompt: Option<String>,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>, temperature: f64) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            temperature,
            max_tokens: default_max_tokens(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            backoff_base_ms: default_backoff_ms(),
            api_key_env: default_api_key_env(),
            system_prompt: None,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            // Greedy decoding makes repeated samples identical, which breaks
            // the i.i.d. assumption behind the confidence sequence.
            return Err(GeneratorError::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if self.url.is_empty() {
            return Err(GeneratorError::Config("endpoint url is empty".into()));
        }
        if self.timeout_ms == 0 {
            return Err(GeneratorError::Config("timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct ChatClient {
    config: EndpointConfig,
    token: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

enum Attempt {
    Done(String),
    Retry(GeneratorError),
    Fatal(GeneratorError),
}

impl ChatClient {
    /// Validates `config` and reads the bearer token from the environment.
    pub fn new(config: EndpointConfig) -> Result<Self, GeneratorError> {
        config.validate()?;
        let token = std::env::var(&config.api_key_env)
            .map_err(|_| GeneratorError::Config(format!("environment variable {} is not set", config.api_key_env)))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, token, agent })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &self.config.system_prompt {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt}));
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }

    /// Issues one completion request, retrying 429, 5xx and transport errors
    /// with exponential backoff. Returns the first choice's text.
    pub fn complete(&self, prompt: &str) -> Result<String, GeneratorError> {
        let body = self.request_body(prompt);
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.attempt(&body, attempt) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) if attempt > self.config.retries => return Err(e),
                Attempt::Retry(_) => {
                    let shift = (attempt - 1).min(16);
                    std::thread::sleep(Duration::from_millis(self.config.backoff_base_ms << shift));
                }
            }
        }
    }

    fn attempt(&self, body: &Value, attempts: u32) -> Attempt {
        let response = self
            .agent
            .post(&self.config.url)
            .header("Authorization", &format!("Bearer {}", self.token))
            .send_json(body);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry(GeneratorError::Transport {
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry(GeneratorError::Transport {
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        if !(200..300).contains(&status) {
            let err = GeneratorError::Http {
                status,
                attempts,
                body: text.chars().take(200).collect(),
            };
            return if status == 429 || status >= 500 {
                Attempt::Retry(err)
            } else {
                Attempt::Fatal(err)
            };
        }
        match extract_text(&text) {
            Ok(t) => Attempt::Done(t),
            Err(e) => Attempt::Fatal(e),
        }
    }
}

/// Pulls `choices[0].message.content` (or the legacy `choices[0].text`) out
/// of a response body.
pub(crate) fn extract_text(body: &str) -> Result<String, GeneratorError> {
    let value: Value = serde_json::from_str(body).map_err(|e| GeneratorError::Decode(e.to_string()))?;
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| GeneratorError::Decode("response has no choices[0]".into()))?;
    choice
        .get("message")
        .and_then(|m| m.get("content"))
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| GeneratorError::Decode("choices[0] carries no text".into()))
}

/// A live generator: one prompt, answered repeatedly, each answer verified.
#[derive(Debug)]
pub struct LlmSource {
    client: ChatClient,
    prompt: String,
    verifier: Verifier,
}

impl LlmSource {
    pub fn new(client: ChatClient, prompt: impl Into<String>, verifier: Verifier) -> Self {
        Self {
            client,
            prompt: prompt.into(),
            verifier,
        }
    }
}

impl SampleSource for LlmSource {
    fn next_sample(&mut self) -> Result<GeneratorSample, GeneratorError> {
        let text = self.client.complete(&self.prompt)?;
        let violation = self.verifier.verify(&text);
        Ok(GeneratorSample::new(text, None, violation))
    }
}
