//! MESS+ against the fixed and random baselines on one trace.
//!
//!     cargo run --release --example compare_baselines

use mess_plus::harness::{calibrate_random_constrained, run_policy, Policy, RunSpec};
use mess_plus::metrics::render_comparison;
use mess_plus::zoo::{synth_trace, SynthConfig};
use mess_plus::{ControllerConfig, PredictorSettings};

fn main() -> mess_plus::Result<()> {
    let alpha = 0.52;
    let synth = SynthConfig::wmt14_two_model(20_000);
    let trace = synth_trace(&synth, 1)?;
    let q = calibrate_random_constrained(&synth.expected_mean_accuracies(), alpha)?;
    println!("random baseline picks the large model with probability {q:.4}\n");

    let mut reports = Vec::new();
    for policy in [
        Policy::MessPlus,
        Policy::SmallestOnly,
        Policy::LargestOnly,
        Policy::RandomConstrained { q_large: Some(q) },
    ] {
        let spec = RunSpec {
            policy,
            controller: ControllerConfig {
                v: 0.01,
                alpha,
                seed: 1,
                ..Default::default()
            },
            predictor: PredictorSettings::default(),
            sla_alpha: alpha,
        };
        reports.push(run_policy(&spec, &trace)?.report);
    }
    println!("{}", render_comparison(&reports)?);
    Ok(())
}
