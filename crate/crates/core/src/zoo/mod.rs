//! The model zoo: what a model costs, how it answers, and where the answers
//! come from (a recorded trace, a synthetic generator, or live endpoints).

mod energy;
pub mod live;
pub mod synth;
mod trace;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use energy::{energy_estimate, fit_energy_profile, whitespace_token_count};
pub use live::{
    chat_completion, live_query, Completion, EndpointConfig, LiveBackend, LiveConfig, LiveModel,
};
pub use synth::{
    synth_trace, AccuracyCurve, DifficultyDistribution, SynthConfig, SynthModel, TextSettings,
};
pub use trace::{load_trace, parse_trace, write_trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelProfile {
    pub name: String,
    /// 0 is the smallest model in the zoo.
    pub size_rank: usize,
    pub energy_base: f64,
    pub energy_per_input_token: f64,
    pub energy_per_output_token: f64,
}

impl ModelProfile {
    pub fn validate(&self) -> Result<()> {
        let coeffs = [
            self.energy_base,
            self.energy_per_input_token,
            self.energy_per_output_token,
        ];
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Config(format!(
                "model `{}`: energy coefficients must be finite and >= 0",
                self.name
            )));
        }
        Ok(())
    }
}

/// Size ranks must be exactly `0..n` in listed order.
pub fn validate_zoo(profiles: &[ModelProfile]) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::Config("the zoo needs at least one model".into()));
    }
    for (i, p) in profiles.iter().enumerate() {
        p.validate()?;
        if p.size_rank != i {
            return Err(Error::Config(format!(
                "model `{}` has size_rank {} at position {i}; models must be listed by contiguous size rank from 0",
                p.name, p.size_rank
            )));
        }
    }
    Ok(())
}

/// One model's recorded behaviour on one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelResult {
    pub name: String,
    pub accuracy: f64,
    pub energy_joules: f64,
    pub latency_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub request_id: String,
    pub text: String,
    pub reference: Option<String>,
    #[serde(rename = "models")]
    pub per_model: Vec<ModelResult>,
}

impl TraceRecord {
    /// A bare request with no recorded model results, for live backends.
    pub fn request(
        id: impl Into<String>,
        text: impl Into<String>,
        reference: Option<String>,
    ) -> Self {
        Self {
            request_id: id.into(),
            text: text.into(),
            reference,
            per_model: Vec::new(),
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.per_model.iter().map(|m| m.accuracy).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.per_model.iter().map(|m| m.energy_joules).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub accuracy: f64,
    pub energy_joules: f64,
    pub latency_seconds: f64,
    pub output_text: Option<String>,
}

impl From<&ModelResult> for ModelOutcome {
    fn from(r: &ModelResult) -> Self {
        Self {
            accuracy: r.accuracy,
            energy_joules: r.energy_joules,
            latency_seconds: r.latency_seconds,
            output_text: r.output_text.clone(),
        }
    }
}

/// Anything that can answer a request with a given zoo model.
pub trait ZooBackend: Sync {
    fn num_models(&self) -> usize;

    /// Energy `E_m(t)` the controller uses before the model runs.
    fn expected_energy(&self, model: usize, request: &TraceRecord) -> Result<f64>;

    fn query(&self, model: usize, request: &TraceRecord) -> Result<ModelOutcome>;

    /// Whether [`query_all`] should fan out across threads.
    fn concurrent(&self) -> bool {
        false
    }

    fn expected_energies(&self, request: &TraceRecord) -> Result<Vec<f64>> {
        (0..self.num_models())
            .map(|m| self.expected_energy(m, request))
            .collect()
    }
}

/// Replays the per-model results stored in each record.
#[derive(Debug, Clone, Copy)]
pub struct TraceBackend {
    num_models: usize,
}

impl TraceBackend {
    pub fn new(num_models: usize) -> Self {
        Self { num_models }
    }

    fn entry<'a>(&self, model: usize, request: &'a TraceRecord) -> Result<&'a ModelResult> {
        if request.per_model.len() != self.num_models {
            return Err(Error::Config(format!(
                "record `{}` has {} models, zoo has {}",
                request.request_id,
                request.per_model.len(),
                self.num_models
            )));
        }
        request.per_model.get(model).ok_or_else(|| {
            Error::invalid(format!(
                "model index {model} out of range for {} models",
                self.num_models
            ))
        })
    }
}

impl ZooBackend for TraceBackend {
    fn num_models(&self) -> usize {
        self.num_models
    }

    fn expected_energy(&self, model: usize, request: &TraceRecord) -> Result<f64> {
        Ok(self.entry(model, request)?.energy_joules)
    }

    fn query(&self, model: usize, request: &TraceRecord) -> Result<ModelOutcome> {
        Ok(self.entry(model, request)?.into())
    }
}

/// Every model's answer to one request, plus the cost of getting them.
#[derive(Debug, Clone, PartialEq)]
pub struct ZooQuery {
    pub outcomes: Vec<ModelOutcome>,
    /// Energy charged for the step: the sum over all models.
    pub total_energy_joules: f64,
    /// Sequential interpretation: models queried one after another.
    pub summed_latency_seconds: f64,
    /// Parallel interpretation: models queried at once.
    pub max_latency_seconds: f64,
    /// Measured time spent inside this call.
    pub wall_clock_seconds: f64,
}

impl ZooQuery {
    pub fn accuracies(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.accuracy).collect()
    }
}

pub fn query_all(backend: &dyn ZooBackend, record: &TraceRecord) -> Result<ZooQuery> {
    let n = backend.num_models();
    let started = Instant::now();
    let outcomes: Vec<ModelOutcome> = if backend.concurrent() && n > 1 {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..n)
                .map(|m| s.spawn(move || backend.query(m, record)))
                .collect();
            handles
                .into_iter()
                .enumerate()
                .map(|(m, h)| {
                    h.join().unwrap_or_else(|_| {
                        Err(Error::Transport {
                            model: m,
                            message: "query thread panicked".into(),
                        })
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        (0..n)
            .map(|m| backend.query(m, record))
            .collect::<Result<Vec<_>>>()?
    };
    let wall_clock_seconds = started.elapsed().as_secs_f64();

    Ok(ZooQuery {
        total_energy_joules: outcomes.iter().map(|o| o.energy_joules).sum(),
        summed_latency_seconds: outcomes.iter().map(|o| o.latency_seconds).sum(),
        max_latency_seconds: outcomes
            .iter()
            .map(|o| o.latency_seconds)
            .fold(0.0, f64::max),
        wall_clock_seconds,
        outcomes,
    })
}
