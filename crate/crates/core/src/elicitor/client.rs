//! Completion-service clients: the behavior contract, a closure-backed test
//! client, and an HTTP client for OpenAI-style chat completion endpoints.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CompletionError {
    /// Worth retrying: rate limits, 5xx, transport hiccups.
    #[error("transient service error: {0}")]
    Transient(String),
    /// Not worth retrying: bad credentials, malformed request.
    #[error("fatal service error: {0}")]
    Fatal(String),
}

impl CompletionError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, CompletionError::Transient(_))
    }
}

/// A generative completion service: prompt in, completion out.
///
/// Implementations may fail transiently; callers own the retry policy.
pub trait CompletionClient: Send + Sync {
    /// Identifier recorded in rationale provenance.
    fn id(&self) -> &str;

    fn complete(&self, prompt: &str, max_tokens: usize) -> Result<String, CompletionError>;
}

/// Closure-backed client for tests and scripted behaviors.
pub struct FnClient<F> {
    id: String,
    f: F,
}

impl<F> FnClient<F>
where
    F: Fn(&str) -> Result<String, CompletionError> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FnClient { id: id.into(), f }
    }
}

impl<F> CompletionClient for FnClient<F>
where
    F: Fn(&str) -> Result<String, CompletionError> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str, _max_tokens: usize) -> Result<String, CompletionError> {
        (self.f)(prompt)
    }
}

/// HTTP client for chat-completion endpoints speaking the OpenAI wire format.
///
/// Credentials come from an environment variable (configurable, default
/// `STANCE_LLM_API_KEY`); the endpoint URL and model name come from
/// configuration. Decoding defaults to temperature 0 for reproducibility.
pub struct HttpCompletionClient {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    agent: ureq::Agent,
}

impl HttpCompletionClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpCompletionClient {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            temperature: 0.0,
            agent: ureq::Agent::new_with_defaults(),
        }
    }

    /// Read the API key from the named environment variable.
    pub fn with_key_from_env(mut self, var: &str) -> Result<Self, CompletionError> {
        match std::env::var(var) {
            Ok(key) if !key.trim().is_empty() => {
                self.api_key = Some(key);
                Ok(self)
            }
            _ => Err(CompletionError::Fatal(format!(
                "missing API credentials in environment variable {var}"
            ))),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }
}

impl CompletionClient for HttpCompletionClient {
    fn id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str, max_tokens: usize) -> Result<String, CompletionError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": max_tokens,
        });
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|err| match &err {
            ureq::Error::StatusCode(code) if *code == 429 || *code >= 500 => {
                CompletionError::Transient(err.to_string())
            }
            ureq::Error::StatusCode(_) => CompletionError::Fatal(err.to_string()),
            _ => CompletionError::Transient(err.to_string()),
        })?;
        let value: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| CompletionError::Fatal(format!("unreadable response body: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                CompletionError::Fatal("response carried no completion text".to_string())
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fn_client_delegates() {
        let client = FnClient::new("echo", |prompt: &str| Ok(prompt.to_uppercase()));
        assert_eq!(client.id(), "echo");
        assert_eq!(client.complete("hi", 16).unwrap(), "HI");
    }

    #[test]
    fn missing_credentials_are_fatal() {
        let err = HttpCompletionClient::new("http://localhost/v1", "m")
            .with_key_from_env("STANCE_TEST_NO_SUCH_VAR")
            .err()
            .unwrap();
        assert!(!err.is_retryable());
    }
}
