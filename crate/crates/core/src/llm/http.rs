use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Backend, GenRequest, LlmError, Result};

pub const DEFAULT_API_KEY_ENV: &str = "GENQR_API_KEY";

fn default_response_path() -> String {
    "choices.0.text".into()
}

fn default_api_key_env() -> Option<String> {
    Some(DEFAULT_API_KEY_ENV.into())
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_max_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Dot-separated path to the completion string in the response body;
    /// numeric segments index arrays (`choices.0.text`).
    #[serde(default = "default_response_path")]
    pub response_path: String,
    /// Environment variable holding a bearer token, if any.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            response_path: default_response_path(),
            api_key_env: default_api_key_env(),
            timeout_secs: default_timeout_secs(),
            max_attempts: default_max_attempts(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    top_p: f64,
    top_k: u32,
    repetition_penalty: f64,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// JSON completion client. Transport errors, 429 and 5xx responses are
/// retried with exponential backoff up to `max_attempts`.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn attempt(&self, body: &WireRequest<'_>) -> std::result::Result<String, (bool, String)> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(var) = &self.config.api_key_env {
            if let Ok(key) = std::env::var(var) {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
        }
        let mut resp = req.send_json(body).map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let retriable = status == 429 || status >= 500;
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err((retriable, format!("status {status}: {}", text.trim())));
        }
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| (false, format!("invalid JSON body: {e}")))?;
        extract(&value, &self.config.response_path)
            .map(str::to_string)
            .ok_or_else(|| {
                (
                    false,
                    format!("response has no string at `{}`", self.config.response_path),
                )
            })
    }
}

/// Follows a dot path such as `choices.0.text` into a JSON value.
pub(crate) fn extract<'a>(value: &'a Value, path: &str) -> Option<&'a str> {
    let mut cur = value;
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        cur = match cur {
            Value::Array(items) => items.get(seg.parse::<usize>().ok()?)?,
            Value::Object(map) => map.get(seg)?,
            _ => return None,
        };
    }
    cur.as_str()
}

impl Backend for HttpBackend {
    fn identity(&self) -> String {
        format!("http:{}", self.config.endpoint)
    }

    fn model(&self) -> &str {
        &self.config.model
    }

    fn generate(&self, request: &GenRequest) -> Result<String> {
        let body = WireRequest {
            model: &self.config.model,
            prompt: &request.prompt,
            top_p: request.sampling.top_p,
            top_k: request.sampling.top_k,
            repetition_penalty: request.sampling.repetition_penalty,
            temperature: request.sampling.temperature,
            max_tokens: request.max_new_tokens,
            seed: request.seed,
        };
        let max = self.config.max_attempts.max(1);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retriable, message)) => {
                    if !retriable || attempts >= max {
                        return Err(LlmError::Http { attempts, message });
                    }
                    log::warn!("generation attempt {attempts} failed: {message}; retrying");
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn extracts_nested_fields() {
        let v = json!({"choices": [{"text": "a b"}], "out": {"text": "c"}});
        assert_eq!(extract(&v, "choices.0.text"), Some("a b"));
        assert_eq!(extract(&v, "out.text"), Some("c"));
        assert_eq!(extract(&v, "choices.1.text"), None);
        assert_eq!(extract(&v, "choices"), None);
    }

    #[test]
    fn wire_request_omits_missing_seed() {
        let body = WireRequest {
            model: "m",
            prompt: "p",
            top_p: 0.92,
            top_k: 200,
            repetition_penalty: 1.2,
            temperature: 1.0,
            max_tokens: 64,
            seed: None,
        };
        let v = serde_json::to_value(&body).unwrap();
        assert_eq!(
            v,
            json!({"model": "m", "prompt": "p", "top_p": 0.92, "top_k": 200,
                   "repetition_penalty": 1.2, "temperature": 1.0, "max_tokens": 64})
        );
    }
}
