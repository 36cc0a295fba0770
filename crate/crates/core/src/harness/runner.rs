use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerConfig, Decision};
use crate::error::{Error, Result};
use crate::harness::policy::Policy;
use crate::metrics::{RunReport, StepRecord};
use crate::predictor::{FeatureVector, PredictorBank, PredictorSettings};
use crate::zoo::{query_all, TraceBackend, TraceRecord, ZooBackend};

const PREDICTOR_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const BASELINE_SALT: u64 = 0xd1b5_4a32_d192_ed03;

/// Everything needed for one run over one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// Must be resolved: `RandomConstrained` needs `q_large` set.
    pub policy: Policy,
    pub controller: ControllerConfig,
    pub predictor: PredictorSettings,
    /// SLA the report is checked against.
    pub sla_alpha: f64,
}

/// Predictor loss on held-out records after `explorations` training steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub explorations: u64,
    pub t: u64,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LossProbe {
    features: Vec<FeatureVector>,
    labels: Vec<Vec<f64>>,
    every: u64,
    curve: Vec<LossPoint>,
}

/// What one call to [`Session::process`] produced.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub step: StepRecord,
    /// `None` for baseline policies.
    pub decision: Option<Decision>,
    pub output_text: Option<String>,
    /// Wall-clock time spent querying the zoo.
    pub wall_clock_seconds: f64,
}

/// Incremental run state: controller, predictors and the report so far.
#[derive(Debug, Clone)]
pub struct Session {
    policy: Policy,
    controller: Controller,
    predictors: Option<PredictorBank>,
    report: RunReport,
    rng: ChaCha8Rng,
    probe: Option<LossProbe>,
    wall_clock_seconds: f64,
}

impl Session {
    pub fn new(spec: &RunSpec) -> Result<Self> {
        let m = spec.controller.num_models;
        spec.policy.validate(m)?;
        if let Policy::RandomConstrained { q_large: None } = spec.policy {
            return Err(Error::Config(
                "random_constrained needs a resolved q_large".into(),
            ));
        }
        let controller = Controller::new(spec.controller.clone())?;
        let predictors = match spec.policy {
            Policy::MessPlus => Some(PredictorBank::new(
                m,
                &spec.predictor,
                spec.controller.seed ^ PREDICTOR_SALT,
            )?),
            _ => None,
        };
        Ok(Self {
            policy: spec.policy,
            report: RunReport::new(
                spec.policy.name(),
                m,
                spec.sla_alpha,
                spec.controller.q_init,
            ),
            controller,
            predictors,
            rng: ChaCha8Rng::seed_from_u64(spec.controller.seed ^ BASELINE_SALT),
            probe: None,
            wall_clock_seconds: 0.0,
        })
    }

    /// Records held-out predictor loss before the first request and after
    /// every `every`-th exploration step.
    pub fn with_loss_probe(mut self, held_out: &[TraceRecord], every: u64) -> Result<Self> {
        let Some(bank) = &self.predictors else {
            return Err(Error::Config(
                "loss probes need the mess_plus policy".into(),
            ));
        };
        if every == 0 {
            return Err(Error::invalid("loss probe interval must be >= 1"));
        }
        let features = held_out
            .iter()
            .map(|r| bank.featurize(&r.text))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<Vec<f64>> = held_out.iter().map(|r| r.accuracies()).collect();
        let losses = bank.held_out_losses(&features, &labels)?;
        self.probe = Some(LossProbe {
            features,
            labels,
            every,
            curve: vec![LossPoint {
                explorations: 0,
                t: 0,
                losses,
            }],
        });
        Ok(self)
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn predictors(&self) -> Option<&PredictorBank> {
        self.predictors.as_ref()
    }

    pub fn loss_curve(&self) -> &[LossPoint] {
        self.probe
            .as_ref()
            .map(|p| p.curve.as_slice())
            .unwrap_or(&[])
    }

    /// Total wall-clock time spent inside zoo queries.
    pub fn wall_clock_seconds(&self) -> f64 {
        self.wall_clock_seconds
    }

    pub fn process(
        &mut self,
        backend: &dyn ZooBackend,
        record: &TraceRecord,
    ) -> Result<StepOutcome> {
        let m = self.controller.config().num_models;
        if backend.num_models() != m {
            return Err(Error::Config(format!(
                "zoo has {} models, controller expects {m}",
                backend.num_models()
            )));
        }
        let t = self.controller.state().t;
        let outcome = match self.policy {
            Policy::MessPlus => self.mess_plus_step(backend, record)?,
            _ => self.baseline_step(backend, record)?,
        };
        self.wall_clock_seconds += outcome.wall_clock_seconds;
        self.report.update(&outcome.step)?;
        debug_assert_eq!(outcome.step.t, t);
        Ok(outcome)
    }

    fn mess_plus_step(
        &mut self,
        backend: &dyn ZooBackend,
        record: &TraceRecord,
    ) -> Result<StepOutcome> {
        let bank = self
            .predictors
            .as_mut()
            .expect("mess_plus sessions own predictors");
        let features = bank.featurize(&record.text)?;
        let predicted = bank.predict_all(&features)?;
        let energies = backend.expected_energies(record)?;
        let t = self.controller.state().t;
        let mut decision = self.controller.step(&energies, &predicted)?;

        let (accuracy, energy, latency, parallel, overhead, text, wall) = if decision.explored {
            let q = query_all(backend, record)?;
            let accuracies = q.accuracies();
            bank.update_all(&features, &accuracies, self.controller.config().eta)?;
            let served = decision
                .finalize_exploration(self.controller.config().exploration_choice, &accuracies)?;
            let o = &q.outcomes[served];
            (
                o.accuracy,
                q.total_energy_joules,
                q.summed_latency_seconds,
                q.max_latency_seconds,
                q.total_energy_joules - o.energy_joules,
                o.output_text.clone(),
                q.wall_clock_seconds,
            )
        } else {
            let started = std::time::Instant::now();
            let o = backend.query(decision.chosen_model, record)?;
            let wall = started.elapsed().as_secs_f64();
            (
                o.accuracy,
                o.energy_joules,
                o.latency_seconds,
                o.latency_seconds,
                0.0,
                o.output_text,
                wall,
            )
        };

        let queue = self.controller.observe(accuracy)?;
        if decision.explored {
            if let Some(probe) = &mut self.probe {
                let k = self.controller.state().explorations;
                if k.is_multiple_of(probe.every) {
                    let losses = bank.held_out_losses(&probe.features, &probe.labels)?;
                    probe.curve.push(LossPoint {
                        explorations: k,
                        t,
                        losses,
                    });
                }
            }
        }
        Ok(StepOutcome {
            step: StepRecord {
                t,
                p_t: decision.p_t,
                explored: decision.explored,
                chosen_model: decision.chosen_model,
                accuracy,
                energy_joules: energy,
                queue,
                latency_seconds: latency,
                parallel_latency_seconds: parallel,
                exploration_overhead_joules: overhead,
            },
            decision: Some(decision),
            output_text: text,
            wall_clock_seconds: wall,
        })
    }

    fn baseline_step(
        &mut self,
        backend: &dyn ZooBackend,
        record: &TraceRecord,
    ) -> Result<StepOutcome> {
        let m = self.controller.config().num_models;
        let chosen = match self.policy {
            Policy::SmallestOnly => 0,
            Policy::LargestOnly => m - 1,
            Policy::Fixed { model } => model,
            Policy::RandomConstrained { q_large } => {
                if self.rng.random::<f64>() < q_large.unwrap_or(0.0) {
                    m - 1
                } else {
                    0
                }
            }
            Policy::MessPlus => unreachable!("handled by mess_plus_step"),
        };
        let t = self.controller.state().t;
        let started = std::time::Instant::now();
        let o = backend.query(chosen, record)?;
        let wall = started.elapsed().as_secs_f64();
        // The queue is tracked for diagnostics only; it never steers a baseline.
        let queue = self.controller.observe(o.accuracy)?;
        Ok(StepOutcome {
            step: StepRecord {
                t,
                p_t: 0.0,
                explored: false,
                chosen_model: chosen,
                accuracy: o.accuracy,
                energy_joules: o.energy_joules,
                queue,
                latency_seconds: o.latency_seconds,
                parallel_latency_seconds: o.latency_seconds,
                exploration_overhead_joules: 0.0,
            },
            decision: None,
            output_text: o.output_text,
            wall_clock_seconds: wall,
        })
    }
}

/// Report, per-step records and (if probed) the predictor loss curve.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub steps: Vec<StepRecord>,
    pub loss_curve: Vec<LossPoint>,
    pub wall_clock_seconds: f64,
}

/// Runs one policy over a stored trace.
pub fn run_policy(spec: &RunSpec, trace: &[TraceRecord]) -> Result<RunOutcome> {
    run_policy_with(
        spec,
        trace,
        &TraceBackend::new(spec.controller.num_models),
        None,
    )
}

/// Runs one policy against an arbitrary backend, optionally probing
/// predictor loss on `held_out` every `every` explorations.
pub fn run_policy_with(
    spec: &RunSpec,
    trace: &[TraceRecord],
    backend: &dyn ZooBackend,
    probe: Option<(&[TraceRecord], u64)>,
) -> Result<RunOutcome> {
    if trace.is_empty() {
        return Err(Error::invalid("trace is empty"));
    }
    let mut session = Session::new(spec)?;
    if let Some((held_out, every)) = probe {
        session = session.with_loss_probe(held_out, every)?;
    }
    let mut steps = Vec::with_capacity(trace.len());
    for record in trace {
        let out = session
            .process(backend, record)
            .map_err(|e| e.context(format!("request `{}`", record.request_id)))?;
        steps.push(out.step);
    }
    Ok(RunOutcome {
        loss_curve: session.loss_curve().to_vec(),
        wall_clock_seconds: session.wall_clock_seconds(),
        report: session.report,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{synth_trace, SynthConfig};

    fn spec(policy: Policy, seed: u64) -> RunSpec {
        RunSpec {
            policy,
            controller: ControllerConfig {
                seed,
                ..Default::default()
            },
            predictor: PredictorSettings {
                dim: 1 << 12,
                ..Default::default()
            },
            sla_alpha: 0.52,
        }
    }

    #[test]
    fn baselines_pick_expected_models() {
        let trace = synth_trace(&SynthConfig::wmt14_two_model(300), 1).unwrap();
        let small = run_policy(&spec(Policy::SmallestOnly, 0), &trace).unwrap();
        assert_eq!(small.report.per_model_selection_counts, vec![300, 0]);
        let large = run_policy(&spec(Policy::LargestOnly, 0), &trace).unwrap();
        assert_eq!(large.report.per_model_selection_counts, vec![0, 300]);
        let e: f64 = trace.iter().map(|r| r.per_model[1].energy_joules).sum();
        assert!((large.report.total_energy_joules - e).abs() < 1e-6 * e);
        let mix = run_policy(
            &spec(Policy::RandomConstrained { q_large: Some(0.5) }, 0),
            &trace,
        )
        .unwrap();
        let big = mix.report.per_model_selection_counts[1];
        assert!((100..200).contains(&big), "{big}");
    }

    #[test]
    fn exploration_charges_all_models() {
        let trace = synth_trace(&SynthConfig::wmt14_two_model(50), 2).unwrap();
        let out = run_policy(&spec(Policy::MessPlus, 3), &trace).unwrap();
        for (s, r) in out.steps.iter().zip(&trace) {
            if s.explored {
                let total: f64 = r.energies().iter().sum();
                assert!((s.energy_joules - total).abs() < 1e-9);
                assert_eq!(
                    s.chosen_model,
                    if r.per_model[0].accuracy > r.per_model[1].accuracy {
                        0
                    } else {
                        1
                    }
                );
            } else {
                assert_eq!(s.energy_joules, r.per_model[s.chosen_model].energy_joules);
            }
        }
        // p_1 = 1
        assert!(out.steps[0].explored);
        assert_eq!(out.report.t, 50);
    }

    #[test]
    fn unresolved_random_policy_rejected() {
        assert!(Session::new(&spec(Policy::RandomConstrained { q_large: None }, 0)).is_err());
        assert!(run_policy(&spec(Policy::MessPlus, 0), &[]).is_err());
    }

    #[test]
    fn loss_probe_records_curve() {
        let trace = synth_trace(&SynthConfig::wmt14_two_model(400), 5).unwrap();
        let (train, held) = trace.split_at(300);
        let s = spec(Policy::MessPlus, 1);
        let out = run_policy_with(&s, train, &TraceBackend::new(2), Some((held, 10))).unwrap();
        assert_eq!(out.loss_curve[0].explorations, 0);
        assert!(out.loss_curve.len() > 2);
        assert!(out
            .loss_curve
            .windows(2)
            .all(|w| w[1].explorations == w[0].explorations + 10));
    }
}
