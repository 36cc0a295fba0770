//! Synthetic trace generator.
//!
//! Each request gets a latent difficulty `d ∈ [0, 1]`. The request text
//! carries marker words tied to the difficulty bucket (plus filler), so a
//! hashed linear predictor has something to learn. Every model has a mean
//! accuracy curve that falls with difficulty; observed accuracy is that mean
//! plus Gaussian noise, clipped to `[0, 1]`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StatNormal};

use crate::error::{Error, Result};
use crate::predictor::sigmoid;
use crate::zoo::{energy_estimate, validate_zoo, ModelProfile, ModelResult, TraceRecord};

const QUADRATURE_POINTS: usize = 4000;
const MONOTONE_GRID: usize = 1001;
const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "te", "vo", "zu", "pi", "da", "ge", "ho", "ji", "bu", "fe",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DifficultyDistribution {
    Uniform,
    Beta { a: f64, b: f64 },
}

impl DifficultyDistribution {
    fn validate(&self) -> Result<()> {
        if let DifficultyDistribution::Beta { a, b } = *self {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::Config(format!(
                    "beta difficulty needs a, b > 0, got ({a}, {b})"
                )));
            }
        }
        Ok(())
    }

    /// Midpoint nodes and weights summing to one.
    fn quadrature(&self) -> Vec<(f64, f64)> {
        let n = QUADRATURE_POINTS;
        let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let density: Vec<f64> = match *self {
            DifficultyDistribution::Uniform => vec![1.0; n],
            DifficultyDistribution::Beta { a, b } => {
                let beta =
                    statrs::distribution::Beta::new(a, b).expect("validated beta parameters");
                nodes.iter().map(|&d| beta.pdf(d)).collect()
            }
        };
        let total: f64 = density.iter().sum();
        nodes
            .into_iter()
            .zip(density.into_iter().map(|w| w / total))
            .collect()
    }
}

/// Mean accuracy as a function of difficulty: a logistic step from
/// `ceiling` (easy) down to `floor` (hard) centered at `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyCurve {
    pub floor: f64,
    pub ceiling: f64,
    pub threshold: f64,
    pub sharpness: f64,
}

impl AccuracyCurve {
    pub fn mean_at(&self, difficulty: f64) -> f64 {
        self.floor
            + (self.ceiling - self.floor) * sigmoid(self.sharpness * (self.threshold - difficulty))
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.floor)
            && (0.0..=1.0).contains(&self.ceiling)
            && self.floor <= self.ceiling
            && self.sharpness > 0.0
            && self.threshold.is_finite()
            && self.sharpness.is_finite();
        if !ok {
            return Err(Error::Config(format!(
                "model `{name}`: accuracy curve needs 0 <= floor <= ceiling <= 1 and sharpness > 0"
            )));
        }
        Ok(())
    }

    /// Solves for the threshold that makes the expected observed accuracy
    /// (noise and clipping included) equal `target_mean`.
    pub fn calibrated(
        target_mean: f64,
        floor: f64,
        ceiling: f64,
        sharpness: f64,
        noise: f64,
        difficulty: DifficultyDistribution,
    ) -> Result<Self> {
        let quad = difficulty.quadrature();
        let mean_for = |threshold: f64| {
            let c = AccuracyCurve {
                floor,
                ceiling,
                threshold,
                sharpness,
            };
            expected_over(&quad, |d| clipped_normal_mean(c.mean_at(d), noise))
        };
        let (mut lo, mut hi) = (-2.0, 3.0);
        if !(mean_for(lo) <= target_mean && target_mean <= mean_for(hi)) {
            return Err(Error::Config(format!(
                "target mean accuracy {target_mean} unreachable with floor {floor}, ceiling {ceiling}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_for(mid) < target_mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(AccuracyCurve {
            floor,
            ceiling,
            threshold: 0.5 * (lo + hi),
            sharpness,
        })
    }
}

fn expected_over(quad: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    quad.iter().map(|&(d, w)| w * f(d)).sum()
}

/// `E[clip(X, 0, 1)]` for `X ~ N(mu, sigma²)`.
fn clipped_normal_mean(mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.clamp(0.0, 1.0);
    }
    let std = StatNormal::standard();
    let a = -mu / sigma;
    let b = (1.0 - mu) / sigma;
    mu * (std.cdf(b) - std.cdf(a)) + sigma * (std.pdf(a) - std.pdf(b)) + (1.0 - std.cdf(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthModel {
    pub profile: ModelProfile,
    pub curve: AccuracyCurve,
    #[serde(default)]
    pub latency_base: f64,
    #[serde(default)]
    pub latency_per_output_token: f64,
    /// Stddev of additive Gaussian noise on per-request energy, in joules.
    #[serde(default)]
    pub energy_noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextSettings {
    /// Number of difficulty buckets with their own marker words.
    pub buckets: usize,
    pub variants_per_bucket: usize,
    pub marker_tokens: usize,
    pub filler_tokens: usize,
    pub filler_vocab: usize,
}

impl Default for TextSettings {
    fn default() -> Self {
        Self {
            buckets: 20,
            variants_per_bucket: 3,
            marker_tokens: 4,
            filler_tokens: 2,
            filler_vocab: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub requests: usize,
    pub difficulty: DifficultyDistribution,
    /// Listed by ascending size rank.
    pub models: Vec<SynthModel>,
    /// Stddev of the Gaussian noise added to the mean accuracy curve.
    pub accuracy_noise: f64,
    /// Output tokens are uniform in `[min, max]`.
    pub output_tokens_min: u64,
    pub output_tokens_max: u64,
    #[serde(default)]
    pub text: TextSettings,
    /// Attach the request text as its own reference (for live scoring demos).
    #[serde(default)]
    pub with_reference: bool,
}

struct PresetModel {
    name: &'static str,
    accuracy: f64,
    energy: f64,
    latency_base: f64,
    latency_per_output_token: f64,
}

impl SynthConfig {
    /// Two-model zoo whose per-model mean accuracy and energy match the
    /// TinyLlama 1.1B / Llama-2 13B measurements on WMT14 (BLEU-1 0.491 and
    /// 0.551, 44.639 J and 527.870 J).
    pub fn wmt14_two_model(requests: usize) -> Self {
        Self::preset(
            requests,
            &[
                PresetModel {
                    name: "tinyllama-1.1b",
                    accuracy: 0.491,
                    energy: 44.639,
                    latency_base: 0.35,
                    latency_per_output_token: 0.01,
                },
                PresetModel {
                    name: "llama-2-13b",
                    accuracy: 0.551,
                    energy: 527.870,
                    latency_base: 1.2,
                    latency_per_output_token: 0.04,
                },
            ],
        )
    }

    /// Same two models on CNN/DailyMail summarization (ROUGE-1 0.309 and
    /// 0.322, 142.080 J and 750.285 J).
    pub fn cnn_dailymail_two_model(requests: usize) -> Self {
        Self::preset(
            requests,
            &[
                PresetModel {
                    name: "tinyllama-1.1b",
                    accuracy: 0.309,
                    energy: 142.080,
                    latency_base: 0.4,
                    latency_per_output_token: 0.01,
                },
                PresetModel {
                    name: "llama-2-13b",
                    accuracy: 0.322,
                    energy: 750.285,
                    latency_base: 1.4,
                    latency_per_output_token: 0.04,
                },
            ],
        )
    }

    fn preset(requests: usize, models: &[PresetModel]) -> Self {
        let difficulty = DifficultyDistribution::Uniform;
        let accuracy_noise = 0.1;
        let text = TextSettings::default();
        let (out_min, out_max) = (20, 40);
        let input_tokens = (text.marker_tokens + text.filler_tokens) as f64;
        let mean_out = 0.5 * (out_min + out_max) as f64;
        let models = models
            .iter()
            .enumerate()
            .map(|(rank, p)| SynthModel {
                profile: ModelProfile {
                    name: p.name.into(),
                    size_rank: rank,
                    energy_base: 0.4 * p.energy,
                    energy_per_input_token: 0.1 * p.energy / input_tokens,
                    energy_per_output_token: 0.5 * p.energy / mean_out,
                },
                curve: AccuracyCurve::calibrated(
                    p.accuracy,
                    0.1,
                    0.9,
                    40.0,
                    accuracy_noise,
                    difficulty,
                )
                .expect("preset targets are reachable"),
                latency_base: p.latency_base,
                latency_per_output_token: p.latency_per_output_token,
                energy_noise_std: 0.0,
            })
            .collect();
        Self {
            requests,
            difficulty,
            models,
            accuracy_noise,
            output_tokens_min: out_min,
            output_tokens_max: out_max,
            text,
            with_reference: false,
        }
    }

    pub fn profiles(&self) -> Vec<ModelProfile> {
        self.models.iter().map(|m| m.profile.clone()).collect()
    }

    /// Expected observed accuracy of every model under this config.
    pub fn expected_mean_accuracies(&self) -> Vec<f64> {
        let quad = self.difficulty.quadrature();
        self.models
            .iter()
            .map(|m| {
                expected_over(&quad, |d| {
                    clipped_normal_mean(m.curve.mean_at(d), self.accuracy_noise)
                })
            })
            .collect()
    }

    pub fn expected_mean_energies(&self) -> Vec<f64> {
        let input = (self.text.marker_tokens + self.text.filler_tokens) as f64;
        let out = 0.5 * (self.output_tokens_min + self.output_tokens_max) as f64;
        self.models
            .iter()
            .map(|m| {
                let p = &m.profile;
                p.energy_base + p.energy_per_input_token * input + p.energy_per_output_token * out
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let profiles = self.profiles();
        validate_zoo(&profiles)?;
        self.difficulty.validate()?;
        if !(self.accuracy_noise >= 0.0 && self.accuracy_noise.is_finite()) {
            return Err(Error::Config(
                "accuracy_noise must be finite and >= 0".into(),
            ));
        }
        if self.output_tokens_min > self.output_tokens_max {
            return Err(Error::Config(
                "output_tokens_min exceeds output_tokens_max".into(),
            ));
        }
        let t = &self.text;
        if t.buckets == 0
            || t.variants_per_bucket == 0
            || (t.filler_tokens > 0 && t.filler_vocab == 0)
        {
            return Err(Error::Config(
                "text settings need buckets, variants and a filler vocabulary".into(),
            ));
        }
        for m in &self.models {
            m.curve.validate(&m.profile.name)?;
            let nonneg = [
                m.latency_base,
                m.latency_per_output_token,
                m.energy_noise_std,
            ];
            if nonneg.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Config(format!(
                    "model `{}`: latency and noise settings must be finite and >= 0",
                    m.profile.name
                )));
            }
        }
        // Larger models must be at least as accurate at every difficulty.
        for pair in self.models.windows(2) {
            for k in 0..MONOTONE_GRID {
                let d = k as f64 / (MONOTONE_GRID - 1) as f64;
                let (small, large) = (pair[0].curve.mean_at(d), pair[1].curve.mean_at(d));
                if large + 1e-12 < small {
                    return Err(Error::Config(format!(
                        "accuracy curve of `{}` falls below `{}` at difficulty {d:.3}",
                        pair[1].profile.name, pair[0].profile.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn word(index: usize, syllables: usize) -> String {
    let mut s = String::new();
    let mut x = index;
    for _ in 0..syllables {
        s.push_str(SYLLABLES[x % SYLLABLES.len()]);
        x /= SYLLABLES.len();
    }
    s
}

fn marker_word(bucket: usize, variant: usize, variants: usize) -> String {
    // The suffix keeps marker and filler vocabularies disjoint.
    format!("{}r", word(bucket * variants + variant, 3))
}

fn filler_word(index: usize) -> String {
    format!("{}l", word(index, 3))
}

/// Generates `config.requests` records, deterministic per `seed`.
pub fn synth_trace(config: &SynthConfig, seed: u64) -> Result<Vec<TraceRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = match config.difficulty {
        DifficultyDistribution::Beta { a, b } => {
            Some(Beta::new(a, b).map_err(|e| Error::Config(format!("beta difficulty: {e}")))?)
        }
        DifficultyDistribution::Uniform => None,
    };
    let acc_noise = Normal::new(0.0, config.accuracy_noise)
        .map_err(|e| Error::Config(format!("accuracy noise: {e}")))?;
    let energy_noise: Vec<Normal<f64>> = config
        .models
        .iter()
        .map(|m| Normal::new(0.0, m.energy_noise_std).expect("validated noise"))
        .collect();
    let t = &config.text;

    let mut records = Vec::with_capacity(config.requests);
    for idx in 0..config.requests {
        let difficulty: f64 = match &beta {
            Some(b) => b.sample(&mut rng),
            None => rng.random(),
        };
        let bucket = ((difficulty * t.buckets as f64) as usize).min(t.buckets - 1);

        let mut tokens: Vec<String> = Vec::with_capacity(t.marker_tokens + t.filler_tokens);
        for _ in 0..t.marker_tokens {
            tokens.push(marker_word(
                bucket,
                rng.random_range(0..t.variants_per_bucket),
                t.variants_per_bucket,
            ));
        }
        for _ in 0..t.filler_tokens {
            tokens.push(filler_word(rng.random_range(0..t.filler_vocab)));
        }
        tokens.shuffle(&mut rng);
        let text = tokens.join(" ");
        let input_tokens = tokens.len() as u64;
        let output_tokens = rng.random_range(config.output_tokens_min..=config.output_tokens_max);

        let per_model = config
            .models
            .iter()
            .zip(&energy_noise)
            .map(|(m, en)| {
                let accuracy =
                    (m.curve.mean_at(difficulty) + acc_noise.sample(&mut rng)).clamp(0.0, 1.0);
                let energy = (energy_estimate(&m.profile, input_tokens, output_tokens)
                    + en.sample(&mut rng))
                .max(0.0);
                ModelResult {
                    name: m.profile.name.clone(),
                    accuracy,
                    energy_joules: energy,
                    latency_seconds: m.latency_base
                        + m.latency_per_output_token * output_tokens as f64,
                    output_text: None,
                }
            })
            .collect();

        records.push(TraceRecord {
            request_id: format!("req-{idx:06}"),
            reference: config.with_reference.then(|| text.clone()),
            text,
            per_model,
        });
    }
    Ok(records)
}
