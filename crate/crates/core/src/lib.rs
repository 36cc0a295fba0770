//! Online model selection that trades inference energy against a
//! time-averaged accuracy requirement.
//!
//! For each request a [`Controller`] either explores (queries every model in
//! the zoo and trains per-model accuracy predictors) or picks the model that
//! minimizes `V·energy + Q·(alpha − predicted accuracy)`, where `Q` is a
//! virtual queue tracking accumulated accuracy shortfall.
//!
//! ```
//! use mess_plus::harness::{run_policy, Policy, RunSpec};
//! use mess_plus::controller::ControllerConfig;
//! use mess_plus::predictor::PredictorSettings;
//! use mess_plus::zoo::{synth_trace, SynthConfig};
//!
//! let trace = synth_trace(&SynthConfig::wmt14_two_model(200), 7).unwrap();
//! let spec = RunSpec {
//!     policy: Policy::MessPlus,
//!     controller: ControllerConfig { alpha: 0.52, ..Default::default() },
//!     predictor: PredictorSettings { dim: 1 << 12, ..Default::default() },
//!     sla_alpha: 0.52,
//! };
//! let out = run_policy(&spec, &trace).unwrap();
//! assert_eq!(out.report.t, 200);
//! ```

pub mod controller;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod predictor;
pub mod zoo;

pub use controller::{Controller, ControllerConfig, Decision, ExplorationChoice};
pub use error::{Error, Result};
pub use metrics::{RunReport, StepRecord};
pub use predictor::{PredictorBank, PredictorSettings};
pub use zoo::{TraceRecord, ZooBackend};
