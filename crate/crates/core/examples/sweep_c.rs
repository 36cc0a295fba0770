//! Exploration rate c against exploration count, latency and predictor loss.
//!
//!     cargo run --release --example sweep_c

use mess_plus::harness::{
    sweep_c, write_latency_csv, write_loss_csv, ExperimentConfig, SweepParam, TraceProvider,
};

fn main() -> mess_plus::Result<()> {
    let mut cfg = ExperimentConfig {
        seeds: vec![0, 1],
        ..Default::default()
    };
    cfg.controller.v = 0.1;
    cfg.sweeps.held_out = 200;
    cfg.sweeps.loss_every = 25;
    let provider = TraceProvider::from_config(&cfg)?;
    let points = sweep_c(&cfg, &provider, &[0.5, 1.0, 3.0, 5.0])?;

    for p in &points {
        let final_loss: Vec<String> = p.runs[0]
            .outcome
            .loss_curve
            .last()
            .map(|l| l.losses.iter().map(|x| format!("{x:.4}")).collect())
            .unwrap_or_default();
        println!(
            "c={:<4} K={:>7.1}  seq latency {:.3}s  par latency {:.3}s  held-out loss {}",
            p.value,
            p.explorations.mean,
            p.sequential_latency.mean,
            p.parallel_latency.mean,
            final_loss.join(" / ")
        );
    }
    println!();
    write_latency_csv(std::io::stdout(), &points)?;
    let mut loss = Vec::new();
    write_loss_csv(&mut loss, SweepParam::C, &points)?;
    println!(
        "\nloss curve rows: {}",
        loss.iter().filter(|&&b| b == b'\n').count() - 1
    );
    Ok(())
}
