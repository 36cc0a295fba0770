//! Route a synthetic translation workload with MESS+ and print the run summary.
//!
//!     cargo run --release --example quickstart

use mess_plus::harness::{run_policy, Policy, RunSpec};
use mess_plus::metrics::render_report;
use mess_plus::zoo::{synth_trace, SynthConfig};
use mess_plus::{ControllerConfig, PredictorSettings};

fn main() -> mess_plus::Result<()> {
    let trace = synth_trace(&SynthConfig::wmt14_two_model(20_000), 0)?;
    let spec = RunSpec {
        policy: Policy::MessPlus,
        controller: ControllerConfig {
            v: 0.01,
            c: 3.0,
            alpha: 0.52,
            ..Default::default()
        },
        predictor: PredictorSettings::default(),
        sla_alpha: 0.52,
    };
    let out = run_policy(&spec, &trace)?;
    println!("{}", render_report(&out.report));
    Ok(())
}
