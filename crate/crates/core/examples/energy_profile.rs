//! Fit per-model energy coefficients from noisy measurements and use them to
//! price a request.
//!
//!     cargo run --example energy_profile

use mess_plus::zoo::{energy_estimate, fit_energy_profile, whitespace_token_count};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> mess_plus::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // (name, base J, J per input token, J per output token)
    let truth = [("small", 5.0, 0.05, 0.9), ("large", 40.0, 0.6, 11.0)];
    let mut fitted = Vec::new();
    for (rank, &(name, b, i, o)) in truth.iter().enumerate() {
        let samples: Vec<(u64, u64, f64)> = (0..200)
            .map(|_| {
                let tin = rng.random_range(5..400);
                let tout = rng.random_range(5..120);
                let e = b + i * tin as f64 + o * tout as f64;
                (tin, tout, e * rng.random_range(0.95..1.05))
            })
            .collect();
        let p = fit_energy_profile(name, rank, &samples)?;
        println!(
            "{name:<6} base {:>6.2}  per-in {:.3}  per-out {:>6.3}",
            p.energy_base, p.energy_per_input_token, p.energy_per_output_token
        );
        fitted.push(p);
    }
    let prompt = "translate this sentence into German please";
    let tin = whitespace_token_count(prompt);
    for p in &fitted {
        println!(
            "{} J for `{prompt}` with 30 output tokens: {:.1}",
            p.name,
            energy_estimate(p, tin, 30)
        );
    }
    Ok(())
}
