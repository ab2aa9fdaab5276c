//! Minimal blocking client for OpenAI-compatible JSON endpoints.

use std::time::Duration;

use crate::error::BackendError;

#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    /// Base URL including any version prefix, e.g. `http://localhost:11434/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    agent: ureq::Agent,
}

impl HttpEndpoint {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
            timeout,
            agent,
        }
    }

    /// POST `body` to `{base_url}/{path}` and return the response text.
    /// 429 and 5xx map to retryable transport errors, other non-2xx to
    /// protocol errors.
    pub fn post_json(&self, path: &str, body: &serde_json::Value) -> Result<String, BackendError> {
        let url = format!("{}/{}", self.base_url, path.trim_start_matches('/'));
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| BackendError::Transport(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(format!("{url}: reading body: {e}")))?;
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err(BackendError::Transport(format!("{url}: HTTP {status}"))),
            _ => Err(BackendError::Protocol(format!("{url}: HTTP {status}: {text}"))),
        }
    }
}
