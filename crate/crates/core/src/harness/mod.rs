//! Experiment plumbing: policies, configuration, runs, sweeps and the CLI.

pub mod cli;
mod config;
pub mod output;
mod policy;
mod runner;
mod sweep;

pub use config::{
    ExperimentConfig, SweepSettings, SynthPreset, SynthSource, TraceProvider, TraceSource,
};
pub use policy::{calibrate_random_constrained, Policy};
pub use runner::{
    run_policy, run_policy_with, LossPoint, RunOutcome, RunSpec, Session, StepOutcome,
};
pub use sweep::{
    sweep, sweep_c, sweep_v, write_latency_csv, write_loss_csv, write_sweep_csv,
    write_wall_clock_csv, SeedRun, SweepParam, SweepPoint,
};
