//! Generate a synthetic trace, write it as JSON lines and read it back.
//!
//!     cargo run --release --example synth_trace -- /tmp/trace.jsonl

use mess_plus::zoo::{load_trace, synth_trace, write_trace, SynthConfig};

fn main() -> mess_plus::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        std::env::temp_dir()
            .join("mess-plus-trace.jsonl")
            .display()
            .to_string()
    });
    for (label, cfg) in [
        ("wmt14", SynthConfig::wmt14_two_model(2_000)),
        ("cnn_dailymail", SynthConfig::cnn_dailymail_two_model(2_000)),
    ] {
        let trace = synth_trace(&cfg, 42)?;
        let n = trace.len() as f64;
        println!(
            "{label}: expected means {:?}",
            cfg.expected_mean_accuracies()
        );
        for m in 0..cfg.models.len() {
            let acc = trace.iter().map(|r| r.per_model[m].accuracy).sum::<f64>() / n;
            let e = trace
                .iter()
                .map(|r| r.per_model[m].energy_joules)
                .sum::<f64>()
                / n;
            println!(
                "  {:<8} mean accuracy {acc:.4}  mean energy {e:.2} J",
                trace[0].per_model[m].name
            );
        }
        write_trace(&path, &trace)?;
        assert_eq!(load_trace(&path)?, trace);
    }
    println!("\nlast trace written to {path}");
    let first = std::fs::read_to_string(&path).expect("trace was just written");
    println!("first line: {}", first.lines().next().unwrap_or_default());
    Ok(())
}
