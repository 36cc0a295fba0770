//! Live zoo backed by chat-completions HTTP endpoints.
//!
//! Each model is reached at `{base_url}/chat/completions`. The reply is scored
//! against the request's reference text, and energy comes from the model's
//! affine profile applied to the reported (or locally counted) token usage.

use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::metrics::Scorer;
use crate::zoo::{
    energy_estimate, validate_zoo, whitespace_token_count, ModelOutcome, ModelProfile, TraceRecord,
    ZooBackend,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    /// Environment variable holding the bearer token; no auth header if unset.
    pub api_key_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_max_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            api_key_env: None,
            timeout_secs: 60.0,
            max_retries: 3,
            backoff_initial_ms: 250,
            backoff_max_ms: 8000,
        }
    }
}

impl EndpointConfig {
    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(
            self.backoff_initial_ms
                .saturating_mul(factor)
                .min(self.backoff_max_ms),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveModel {
    pub profile: ModelProfile,
    /// Model identifier sent in the request body; defaults to the profile name.
    #[serde(default)]
    pub remote_name: Option<String>,
    /// Output length assumed when estimating energy before the call.
    pub expected_output_tokens: u64,
    /// Per-model endpoint; falls back to the shared one.
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfig {
    #[serde(default)]
    pub endpoint: EndpointConfig,
    /// Listed by ascending size rank.
    pub models: Vec<LiveModel>,
    #[serde(default)]
    pub scorer: Scorer,
    /// Fan exploration queries out across threads.
    #[serde(default = "default_true")]
    pub concurrent: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChatUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

/// Sends one chat-completions request, retrying transport failures, non-2xx
/// statuses and unparsable bodies with exponential backoff.
pub fn chat_completion(
    endpoint: &EndpointConfig,
    model_index: usize,
    model: &str,
    prompt: &str,
) -> Result<Completion> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(endpoint.timeout_secs)))
        .build()
        .into();
    let url = format!(
        "{}/chat/completions",
        endpoint.base_url.trim_end_matches('/')
    );
    let token = match &endpoint.api_key_env {
        Some(var) => Some(std::env::var(var).map_err(|_| Error::Transport {
            model: model_index,
            message: format!("environment variable `{var}` is not set"),
        })?),
        None => None,
    };
    let body = json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
    });

    let mut last_error = String::new();
    for attempt in 0..=endpoint.max_retries {
        if attempt > 0 {
            thread::sleep(endpoint.backoff(attempt - 1));
        }
        let mut req = agent.post(&url);
        if let Some(t) = &token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let parsed = req
            .send_json(&body)
            .map_err(|e| e.to_string())
            .and_then(|mut resp| {
                resp.body_mut()
                    .read_json::<ChatResponse>()
                    .map_err(|e| format!("unparsable body: {e}"))
            });
        match parsed {
            Ok(resp) => {
                let Some(choice) = resp.choices.into_iter().next() else {
                    last_error = "response has no choices".into();
                    continue;
                };
                return Ok(Completion {
                    text: choice.message.content.unwrap_or_default(),
                    prompt_tokens: resp.usage.as_ref().and_then(|u| u.prompt_tokens),
                    completion_tokens: resp.usage.as_ref().and_then(|u| u.completion_tokens),
                });
            }
            Err(e) => last_error = e,
        }
    }
    Err(Error::Transport {
        model: model_index,
        message: format!(
            "{} attempts failed; last error: {last_error}",
            endpoint.max_retries + 1
        ),
    })
}

/// Queries one model and turns the reply into an accuracy/energy/latency
/// outcome.
pub fn live_query(
    endpoint: &EndpointConfig,
    model_index: usize,
    model: &LiveModel,
    prompt: &str,
    reference: Option<&str>,
    scorer: Scorer,
) -> Result<ModelOutcome> {
    let reference = reference.ok_or_else(|| {
        Error::Scoring(format!(
            "request for model {model_index} has no reference text to score against"
        ))
    })?;
    let name = model.remote_name.as_deref().unwrap_or(&model.profile.name);
    let started = Instant::now();
    let completion = chat_completion(endpoint, model_index, name, prompt)?;
    let latency_seconds = started.elapsed().as_secs_f64();

    let input_tokens = completion
        .prompt_tokens
        .unwrap_or_else(|| whitespace_token_count(prompt));
    let output_tokens = completion
        .completion_tokens
        .unwrap_or_else(|| whitespace_token_count(&completion.text));
    Ok(ModelOutcome {
        accuracy: scorer.score(&completion.text, reference),
        energy_joules: energy_estimate(&model.profile, input_tokens, output_tokens),
        latency_seconds,
        output_text: Some(completion.text),
    })
}

#[derive(Debug, Clone)]
pub struct LiveBackend {
    config: LiveConfig,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self> {
        let profiles: Vec<ModelProfile> = config.models.iter().map(|m| m.profile.clone()).collect();
        validate_zoo(&profiles)?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    fn model(&self, m: usize) -> Result<&LiveModel> {
        self.config
            .models
            .get(m)
            .ok_or_else(|| Error::invalid(format!("model index {m} out of range")))
    }
}

impl ZooBackend for LiveBackend {
    fn num_models(&self) -> usize {
        self.config.models.len()
    }

    fn expected_energy(&self, model: usize, request: &TraceRecord) -> Result<f64> {
        let m = self.model(model)?;
        Ok(energy_estimate(
            &m.profile,
            whitespace_token_count(&request.text),
            m.expected_output_tokens,
        ))
    }

    fn query(&self, model: usize, request: &TraceRecord) -> Result<ModelOutcome> {
        let m = self.model(model)?;
        let endpoint = m.endpoint.as_ref().unwrap_or(&self.config.endpoint);
        live_query(
            endpoint,
            model,
            m,
            &request.text,
            request.reference.as_deref(),
            self.config.scorer,
        )
    }

    fn concurrent(&self) -> bool {
        self.config.concurrent
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let e = EndpointConfig {
            backoff_initial_ms: 100,
            backoff_max_ms: 500,
            ..Default::default()
        };
        assert_eq!(e.backoff(0), Duration::from_millis(100));
        assert_eq!(e.backoff(1), Duration::from_millis(200));
        assert_eq!(e.backoff(2), Duration::from_millis(400));
        assert_eq!(e.backoff(3), Duration::from_millis(500));
        assert_eq!(e.backoff(80), Duration::from_millis(500));
    }

    #[test]
    fn missing_reference_is_scoring_error() {
        let model = LiveModel {
            profile: ModelProfile {
                name: "m".into(),
                size_rank: 0,
                energy_base: 0.0,
                energy_per_input_token: 0.0,
                energy_per_output_token: 0.0,
            },
            remote_name: None,
            expected_output_tokens: 10,
            endpoint: None,
        };
        let r = live_query(
            &EndpointConfig::default(),
            0,
            &model,
            "hi",
            None,
            Scorer::Bleu1,
        );
        assert!(matches!(r, Err(Error::Scoring(_))));
    }
}
