//! Energy/accuracy trade-off as V grows, averaged over three seeds.
//!
//!     cargo run --release --example sweep_v

use mess_plus::harness::{sweep_v, write_sweep_csv, ExperimentConfig, SweepParam, TraceProvider};

fn main() -> mess_plus::Result<()> {
    let mut cfg = ExperimentConfig::from_toml(
        r#"
seeds = [0, 1, 2]
[trace.synth]
preset = "wmt14"
requests = 20000
"#,
    )?;
    cfg.controller.c = 3.0;
    let provider = TraceProvider::from_config(&cfg)?;
    let grid = [0.0001, 0.001, 0.01, 0.1, 1.0, 10.0];
    let points = sweep_v(&cfg, &provider, &grid)?;

    println!(
        "{:>8} {:>10} {:>12} {:>6}",
        "V", "accuracy", "energy (J)", "SLA"
    );
    for p in &points {
        println!(
            "{:>8} {:>10.4} {:>12.2} {:>6}",
            p.value, p.accuracy.mean, p.energy_joules.mean, p.sla_met_all
        );
    }
    println!();
    write_sweep_csv(std::io::stdout(), SweepParam::V, &points)
}
