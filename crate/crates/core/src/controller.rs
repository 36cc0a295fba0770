//! Per-request decision core: exploration sampling, the drift-plus-penalty
//! objective, model selection and the virtual queue.
//!
//! A [`Controller`] is driven in two phases per request:
//!
//! 1. [`Controller::step`] decides whether to explore and, if not, which
//!    model minimizes `V·E_m + Q·(α − Â_m)`.
//! 2. Once the accuracy of the model whose output is served is known, the
//!    caller reports it through [`Controller::observe`], which applies the
//!    queue update and advances the request counter.
//!
//! The controller never touches the predictors or the zoo; the harness owns
//! that wiring.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_V: f64 = 0.1;
pub const DEFAULT_C: f64 = 3.0;
pub const DEFAULT_ETA: f64 = 1.0;

/// Which model's output is served on an exploration step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationChoice {
    /// Serve the model with the highest observed accuracy (ties go to the
    /// larger model).
    #[default]
    ArgmaxAccuracy,
    /// Always serve the largest model.
    LargestModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Energy-priority weight.
    pub v: f64,
    /// Accuracy floor the time average must stay above.
    pub alpha: f64,
    /// Exploration scale in `p_t = min(1, c / t^(1/3))`.
    pub c: f64,
    /// Predictor learning rate.
    pub eta: f64,
    pub num_models: usize,
    pub seed: u64,
    /// Initial queue length `Q(1)`.
    pub q_init: f64,
    pub exploration_choice: ExplorationChoice,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            v: DEFAULT_V,
            alpha: 0.52,
            c: DEFAULT_C,
            eta: DEFAULT_ETA,
            num_models: 2,
            seed: 0,
            q_init: 0.0,
            exploration_choice: ExplorationChoice::ArgmaxAccuracy,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.v, self.alpha, self.c, self.eta, self.q_init]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("controller parameters must be finite"));
        }
        if self.v < 0.0 {
            return Err(Error::invalid(format!("V must be >= 0, got {}", self.v)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.c <= 0.0 {
            return Err(Error::invalid(format!("c must be > 0, got {}", self.c)));
        }
        if self.eta <= 0.0 {
            return Err(Error::invalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.num_models == 0 {
            return Err(Error::invalid("num_models must be >= 1"));
        }
        if self.q_init < 0.0 {
            return Err(Error::invalid(format!(
                "q_init must be >= 0, got {}",
                self.q_init
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Virtual queue length `Q(t)`.
    pub q: f64,
    /// Index of the request about to be processed, starting at 1.
    pub t: u64,
    /// Exploration steps taken so far (`K`).
    pub explorations: u64,
    rng: ChaCha8Rng,
}

impl ControllerState {
    pub fn new(seed: u64, q_init: f64) -> Self {
        Self {
            q: q_init,
            t: 1,
            explorations: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Draws `X_t ~ Bernoulli(p)` from the state's stream.
    pub fn sample_exploration(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "exploration probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(self.rng.random::<f64>() < p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub chosen_model: usize,
    pub explored: bool,
    pub p_t: f64,
    /// Per-model objective values; empty on exploration steps.
    pub objectives: Vec<f64>,
    /// Clamped predictions the objective saw; empty on exploration steps.
    pub predicted_accuracies: Vec<f64>,
}

impl Decision {
    /// Fixes the served model of an exploration step once every model's true
    /// accuracy is known. No-op for exploitation steps.
    pub fn finalize_exploration(
        &mut self,
        choice: ExplorationChoice,
        accuracies: &[f64],
    ) -> Result<usize> {
        if self.explored {
            self.chosen_model = exploration_pick(choice, accuracies)?;
        }
        Ok(self.chosen_model)
    }
}

pub fn exploration_probability(t: u64, c: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("request index t must be >= 1"));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("c must be finite and > 0, got {c}")));
    }
    Ok((c / (t as f64).cbrt()).min(1.0))
}

/// `V·energy + q·(alpha − a_hat)`.
pub fn per_request_objective(v: f64, energy: f64, q: f64, alpha: f64, a_hat: f64) -> Result<f64> {
    if ![v, energy, q, alpha, a_hat].iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("objective inputs must be finite"));
    }
    Ok(v * energy + q * (alpha - a_hat))
}

/// Index of the smallest objective. Exact ties go to the lower-energy model,
/// then to the lower index. Pass an empty `energies` slice to break ties by
/// index only.
pub fn select_model(objectives: &[f64], energies: &[f64]) -> Result<usize> {
    if objectives.is_empty() {
        return Err(Error::invalid("cannot select from an empty objective list"));
    }
    if !energies.is_empty() && energies.len() != objectives.len() {
        return Err(Error::invalid(format!(
            "{} objectives but {} energies",
            objectives.len(),
            energies.len()
        )));
    }
    if objectives.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("objectives must be finite"));
    }
    let energy = |m: usize| energies.get(m).copied().unwrap_or(0.0);
    let mut best = 0;
    for m in 1..objectives.len() {
        let (o, b) = (objectives[m], objectives[best]);
        if o < b || (o == b && energy(m) < energy(best)) {
            best = m;
        }
    }
    Ok(best)
}

/// `max(0, q + alpha − accuracy)`.
pub fn queue_update(q: f64, alpha: f64, accuracy: f64) -> Result<f64> {
    if q < 0.0 || !q.is_finite() {
        return Err(Error::invalid(format!(
            "queue length must be >= 0, got {q}"
        )));
    }
    if !alpha.is_finite() || !accuracy.is_finite() {
        return Err(Error::invalid("alpha and accuracy must be finite"));
    }
    Ok((q + alpha - accuracy).max(0.0))
}

/// Model served on an exploration step. Models are indexed by ascending size.
pub fn exploration_pick(choice: ExplorationChoice, accuracies: &[f64]) -> Result<usize> {
    if accuracies.is_empty() {
        return Err(Error::invalid("no accuracies to pick from"));
    }
    Ok(match choice {
        ExplorationChoice::LargestModel => accuracies.len() - 1,
        ExplorationChoice::ArgmaxAccuracy => {
            let mut best = 0;
            for (m, &a) in accuracies.iter().enumerate() {
                if a >= accuracies[best] {
                    best = m;
                }
            }
            best
        }
    })
}

fn clamp_prediction(a: f64) -> f64 {
    if a.is_nan() {
        0.0
    } else {
        a.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    state: ControllerState,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Result<Self> {
        config.validate()?;
        let state = ControllerState::new(config.seed, config.q_init);
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn queue(&self) -> f64 {
        self.state.q
    }

    /// Decides request `t`. On exploration steps the returned decision still
    /// needs [`Decision::finalize_exploration`]; its provisional choice is the
    /// largest model.
    pub fn step(&mut self, energies: &[f64], predicted_accuracies: &[f64]) -> Result<Decision> {
        let m = self.config.num_models;
        if energies.len() != m || predicted_accuracies.len() != m {
            return Err(Error::invalid(format!(
                "expected {m} energies and predictions, got {} and {}",
                energies.len(),
                predicted_accuracies.len()
            )));
        }
        if energies.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid("energies must be finite and >= 0"));
        }

        let p_t = exploration_probability(self.state.t, self.config.c)?;
        if self.state.sample_exploration(p_t)? {
            self.state.explorations += 1;
            return Ok(Decision {
                chosen_model: m - 1,
                explored: true,
                p_t,
                objectives: Vec::new(),
                predicted_accuracies: Vec::new(),
            });
        }

        let predicted: Vec<f64> = predicted_accuracies
            .iter()
            .map(|&a| clamp_prediction(a))
            .collect();
        let objectives = energies
            .iter()
            .zip(&predicted)
            .map(|(&e, &a)| {
                per_request_objective(self.config.v, e, self.state.q, self.config.alpha, a)
            })
            .collect::<Result<Vec<_>>>()?;
        let chosen_model = select_model(&objectives, energies)?;
        Ok(Decision {
            chosen_model,
            explored: false,
            p_t,
            objectives,
            predicted_accuracies: predicted,
        })
    }

    /// Applies the queue update with the served model's realized accuracy and
    /// moves on to the next request. Returns `Q(t+1)`.
    pub fn observe(&mut self, accuracy: f64) -> Result<f64> {
        self.state.q = queue_update(self.state.q, self.config.alpha, accuracy)?;
        self.state.t += 1;
        Ok(self.state.q)
    }
}
