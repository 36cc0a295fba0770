use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::zoo::ModelProfile;

/// Affine energy model: `base + per_in·input_tokens + per_out·output_tokens`.
pub fn energy_estimate(profile: &ModelProfile, input_tokens: u64, output_tokens: u64) -> f64 {
    profile.energy_base
        + profile.energy_per_input_token * input_tokens as f64
        + profile.energy_per_output_token * output_tokens as f64
}

/// Token count used for energy accounting.
pub fn whitespace_token_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Least-squares fit of the affine energy model to measured
/// `(input_tokens, output_tokens, joules)` samples.
pub fn fit_energy_profile(
    name: impl Into<String>,
    size_rank: usize,
    samples: &[(u64, u64, f64)],
) -> Result<ModelProfile> {
    if samples.len() < 3 {
        return Err(Error::invalid(
            "need at least three samples to fit three coefficients",
        ));
    }
    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for &(i, o, e) in samples {
        let x = Vector3::new(1.0, i as f64, o as f64);
        xtx += x * x.transpose();
        xty += x * e;
    }
    let beta = xtx
        .cholesky()
        .ok_or_else(|| Error::invalid("token counts are collinear; cannot separate coefficients"))?
        .solve(&xty);
    Ok(ModelProfile {
        name: name.into(),
        size_rank,
        energy_base: beta[0].max(0.0),
        energy_per_input_token: beta[1].max(0.0),
        energy_per_output_token: beta[2].max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn profile(base: f64, inp: f64, out: f64) -> ModelProfile {
        ModelProfile {
            name: "m".into(),
            size_rank: 0,
            energy_base: base,
            energy_per_input_token: inp,
            energy_per_output_token: out,
        }
    }

    #[test]
    fn estimate_examples() {
        assert_eq!(energy_estimate(&profile(0.0, 0.0, 0.0), 1234, 99), 0.0);
        assert_abs_diff_eq!(
            energy_estimate(&profile(10.0, 0.5, 2.0), 100, 20),
            100.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn token_count() {
        assert_eq!(whitespace_token_count("  a b\tc\n"), 3);
        assert_eq!(whitespace_token_count(""), 0);
    }

    #[test]
    fn fit_recovers_coefficients() {
        let truth = profile(12.0, 0.35, 1.8);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let samples: Vec<(u64, u64, f64)> = (0..2000)
            .map(|_| {
                let i = rng.random_range(10..400);
                let o = rng.random_range(5..200);
                (i, o, energy_estimate(&truth, i, o) + noise.sample(&mut rng))
            })
            .collect();
        let fit = fit_energy_profile("m", 0, &samples).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b;
        assert!(rel(fit.energy_base, 12.0) < 0.05, "{fit:?}");
        assert!(rel(fit.energy_per_input_token, 0.35) < 0.05, "{fit:?}");
        assert!(rel(fit.energy_per_output_token, 1.8) < 0.05, "{fit:?}");
    }

    #[test]
    fn fit_rejects_degenerate_design() {
        assert!(fit_energy_profile("m", 0, &[(1, 1, 1.0)]).is_err());
        let same: Vec<_> = (0..10).map(|_| (5, 7, 3.0)).collect();
        assert!(fit_energy_profile("m", 0, &same).is_err());
    }
}
