use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::harness::policy::{calibrate_random_constrained, Policy};
use crate::harness::runner::RunSpec;
use crate::metrics::Scorer;
use crate::predictor::PredictorSettings;
use crate::zoo::{load_trace, synth_trace, LiveConfig, SynthConfig, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthPreset {
    Wmt14,
    CnnDailymail,
}

impl SynthPreset {
    pub fn config(self, requests: usize) -> SynthConfig {
        match self {
            SynthPreset::Wmt14 => SynthConfig::wmt14_two_model(requests),
            SynthPreset::CnnDailymail => SynthConfig::cnn_dailymail_two_model(requests),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSource {
    /// Start from a preset; `config` takes precedence when both are given.
    pub preset: Option<SynthPreset>,
    pub config: Option<SynthConfig>,
    /// Overrides the request count of the preset or config.
    pub requests: Option<usize>,
    /// Fixed generator seed. When unset, each run seed generates its own trace.
    pub seed: Option<u64>,
}

impl Default for SynthSource {
    fn default() -> Self {
        Self {
            preset: Some(SynthPreset::Wmt14),
            config: None,
            requests: Some(20_000),
            seed: None,
        }
    }
}

impl SynthSource {
    pub fn resolve(&self) -> Result<SynthConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(c), _) => c.clone(),
            (None, Some(p)) => p.config(0),
            (None, None) => {
                return Err(Error::Config(
                    "synthetic trace needs a preset or a config".into(),
                ))
            }
        };
        if let Some(n) = self.requests {
            cfg.requests = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Where requests come from: a trace file or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSource {
    pub path: Option<PathBuf>,
    pub synth: Option<SynthSource>,
}

impl Default for TraceSource {
    fn default() -> Self {
        Self {
            path: None,
            synth: Some(SynthSource::default()),
        }
    }
}

impl TraceSource {
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        Self {
            path: Some(path.into()),
            synth: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.path, &self.synth) {
            (Some(_), Some(_)) => Err(Error::Config(
                "trace: give either `path` or `synth`, not both".into(),
            )),
            (None, None) => Err(Error::Config(
                "trace: one of `path` or `synth` is required".into(),
            )),
            (None, Some(s)) => s.resolve().map(|_| ()),
            (Some(_), None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub v_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    /// Records held out of each c-sweep run to measure predictor loss.
    pub held_out: usize,
    /// Record predictor loss every this many exploration steps.
    pub loss_every: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            v_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            c_grid: vec![1.0, 3.0, 5.0, 10.0],
            held_out: 200,
            loss_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Controller parameters. `alpha` and `seed` here are overwritten from
    /// `alpha_sla + alpha_margin` and the run seed.
    pub controller: ControllerConfig,
    pub predictor: PredictorSettings,
    pub policy: Policy,
    /// Contracted accuracy floor.
    pub alpha_sla: f64,
    /// Safety margin added to `alpha_sla` for the controller's internal target.
    pub alpha_margin: f64,
    pub scorer: Scorer,
    pub trace: TraceSource,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub sweeps: SweepSettings,
    /// Use only the first N records when estimating mean accuracies for
    /// `random_constrained` on trace files; the whole trace otherwise.
    pub calibration_prefix: Option<usize>,
    pub live: Option<LiveConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            predictor: PredictorSettings::default(),
            policy: Policy::MessPlus,
            alpha_sla: 0.52,
            alpha_margin: 0.0,
            scorer: Scorer::Bleu1,
            trace: TraceSource::default(),
            output_dir: PathBuf::from("runs"),
            seeds: vec![0],
            sweeps: SweepSettings::default(),
            calibration_prefix: None,
            live: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Accuracy target the controller enforces.
    pub fn internal_alpha(&self) -> f64 {
        self.alpha_sla + self.alpha_margin
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(0.0..=1.0).contains(&self.internal_alpha()) || !(0.0..=1.0).contains(&self.alpha_sla) {
            return Err(Error::Config(format!(
                "alpha_sla {} + alpha_margin {} must stay within [0, 1]",
                self.alpha_sla, self.alpha_margin
            )));
        }
        self.controller_for(self.seeds[0], self.controller.num_models)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.trace.validate()
    }

    /// Fully resolved spec for one run seed.
    pub fn run_spec(&self, provider: &TraceProvider, seed: u64) -> Result<RunSpec> {
        let num_models = provider.num_models();
        let policy = provider.resolve_policy(self.policy, self.internal_alpha())?;
        policy.validate(num_models)?;
        let controller = self.controller_for(seed, num_models);
        controller
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(RunSpec {
            policy,
            controller,
            predictor: self.predictor.clone(),
            sla_alpha: self.alpha_sla,
        })
    }

    pub fn controller_for(&self, seed: u64, num_models: usize) -> ControllerConfig {
        ControllerConfig {
            alpha: self.internal_alpha(),
            seed,
            num_models,
            ..self.controller.clone()
        }
    }
}

/// Resolves traces per run seed, generating or loading each only once.
#[derive(Debug, Clone)]
pub enum TraceProvider {
    Fixed {
        records: Vec<TraceRecord>,
        calibration_means: Vec<f64>,
    },
    Synth {
        config: SynthConfig,
        fixed_seed: Option<u64>,
    },
}

impl TraceProvider {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.trace.validate()?;
        if let Some(path) = &cfg.trace.path {
            let records = load_trace(path)?;
            let calibration_means = trace_means(&records, cfg.calibration_prefix);
            return Ok(TraceProvider::Fixed {
                records,
                calibration_means,
            });
        }
        let synth = cfg.trace.synth.as_ref().expect("validated");
        Ok(TraceProvider::Synth {
            config: synth.resolve()?,
            fixed_seed: synth.seed,
        })
    }

    pub fn from_records(records: Vec<TraceRecord>) -> Self {
        let calibration_means = trace_means(&records, None);
        TraceProvider::Fixed {
            records,
            calibration_means,
        }
    }

    /// Trace for one run seed, with `extra` additional synthetic records
    /// appended (ignored for fixed traces).
    pub fn trace_for(&self, seed: u64, extra: usize) -> Result<Vec<TraceRecord>> {
        match self {
            TraceProvider::Fixed { records, .. } => Ok(records.clone()),
            TraceProvider::Synth { config, fixed_seed } => {
                let mut c = config.clone();
                c.requests += extra;
                synth_trace(&c, fixed_seed.unwrap_or(seed))
            }
        }
    }

    pub fn num_models(&self) -> usize {
        match self {
            TraceProvider::Fixed { records, .. } => {
                records.first().map(|r| r.per_model.len()).unwrap_or(0)
            }
            TraceProvider::Synth { config, .. } => config.models.len(),
        }
    }

    /// Mean accuracies the random baseline calibrates against: the
    /// generator's expectations, or the (prefix of the) trace file.
    pub fn calibration_means(&self) -> Vec<f64> {
        match self {
            TraceProvider::Fixed {
                calibration_means, ..
            } => calibration_means.clone(),
            TraceProvider::Synth { config, .. } => config.expected_mean_accuracies(),
        }
    }

    /// Resolves `q_large` for a random baseline without an explicit one.
    pub fn resolve_policy(&self, policy: Policy, alpha: f64) -> Result<Policy> {
        match policy {
            Policy::RandomConstrained { q_large: None } => Ok(Policy::RandomConstrained {
                q_large: Some(calibrate_random_constrained(
                    &self.calibration_means(),
                    alpha,
                )?),
            }),
            p => Ok(p),
        }
    }
}

fn trace_means(records: &[TraceRecord], prefix: Option<usize>) -> Vec<f64> {
    let n = prefix.unwrap_or(records.len()).min(records.len());
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let mut sums = vec![0.0; first.per_model.len()];
    for r in &records[..n] {
        for (s, m) in sums.iter_mut().zip(&r.per_model) {
            *s += m.accuracy;
        }
    }
    sums.into_iter().map(|s| s / n.max(1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            alpha_sla = 0.315
            seeds = [1, 2]
            policy = { kind = "random_constrained" }

            [controller]
            v = 0.5

            [trace.synth]
            preset = "cnn_dailymail"
            requests = 100
            "#,
        )
        .unwrap();
        assert_eq!(cfg.controller.v, 0.5);
        assert_eq!(cfg.controller.c, 3.0);
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.policy, Policy::RandomConstrained { q_large: None });
        cfg.validate().unwrap();
        let provider = TraceProvider::from_config(&cfg).unwrap();
        assert_eq!(provider.trace_for(1, 0).unwrap().len(), 100);
        assert_eq!(provider.trace_for(1, 5).unwrap().len(), 105);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("[controller]\nvv = 1").is_err());
    }

    #[test]
    fn trace_source_exclusive() {
        let mut cfg = ExperimentConfig::default();
        cfg.trace.path = Some("x.jsonl".into());
        assert!(cfg.validate().is_err());
        cfg.trace.synth = None;
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn margin_shifts_internal_alpha() {
        let cfg = ExperimentConfig {
            alpha_sla: 0.5,
            alpha_margin: 0.01,
            ..Default::default()
        };
        assert!((cfg.controller_for(3, 2).alpha - 0.51).abs() < 1e-12);
        assert_eq!(cfg.controller_for(3, 2).seed, 3);
    }
}
