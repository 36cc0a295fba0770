//! Per-model online accuracy estimators.
//!
//! Requests are encoded as seeded, hashed unigram + bigram counts, L2
//! normalized. Each model in the zoo gets its own linear model over that
//! encoding, squashed through a link into `[0, 1]`, and trained by SGD on the
//! squared error against the accuracy observed during exploration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::io::{BufRead, Write};

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 1 << 18;
pub const DEFAULT_INIT_STDDEV: f64 = 0.01;

const UNIGRAM_TAG: u8 = 1;
const BIGRAM_TAG: u8 = 2;

/// Sparse feature vector with entries sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl FeatureVector {
    /// Builds a vector from arbitrary `(index, value)` pairs; duplicate
    /// indices are summed.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut acc = BTreeMap::new();
        for (i, v) in pairs {
            if i >= dim {
                return Err(Error::invalid(format!(
                    "feature index {i} out of range for dim {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid("feature values must be finite"));
            }
            *acc.entry(i).or_insert(0.0) += v;
        }
        Ok(Self {
            entries: acc.into_iter().filter(|(_, v)| *v != 0.0).collect(),
            dim,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }
}

fn token_hash(seed: u64, tag: u8, parts: &[&str]) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write_u8(tag);
    for p in parts {
        h.write(p.as_bytes());
        h.write_u8(0xff);
    }
    h.finish()
}

/// Hashed unigram + adjacent-bigram counts of the lowercased,
/// whitespace-split text, L2 normalized.
pub fn featurize(text: &str, dim: usize, hash_seed: u64) -> Result<FeatureVector> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::invalid(format!(
            "feature dimension must be a power of two >= 2, got {dim}"
        )));
    }
    let lowered = text.to_lowercase();
    let tokens: Vec<&str> = lowered.split_whitespace().collect();
    let mask = (dim - 1) as u64;

    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for tok in &tokens {
        let idx = (token_hash(hash_seed, UNIGRAM_TAG, &[tok]) & mask) as usize;
        *counts.entry(idx).or_insert(0.0) += 1.0;
    }
    for pair in tokens.windows(2) {
        let idx = (token_hash(hash_seed, BIGRAM_TAG, pair) & mask) as usize;
        *counts.entry(idx).or_insert(0.0) += 1.0;
    }

    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    let entries = if norm > 0.0 {
        counts.into_iter().map(|(i, c)| (i, c / norm)).collect()
    } else {
        Vec::new()
    };
    Ok(FeatureVector { entries, dim })
}

/// Maps the linear score to a predicted accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Logistic,
    /// Raw linear score clamped to `[0, 1]`; the gradient is zero wherever the
    /// clamp is active.
    Identity,
}

impl Link {
    fn as_str(self) -> &'static str {
        match self {
            Link::Logistic => "logistic",
            Link::Identity => "identity",
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub updates_applied: u64,
    pub link: Link,
}

impl PredictorParams {
    pub fn zeros(dim: usize, link: Link) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            updates_applied: 0,
            link,
        }
    }

    /// Seeded Gaussian initialization of the weights; bias starts at zero.
    pub fn random(dim: usize, stddev: f64, seed: u64, link: Link) -> Result<Self> {
        let normal = Normal::new(0.0, stddev)
            .map_err(|e| Error::invalid(format!("bad init stddev {stddev}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            weights: (0..dim).map(|_| normal.sample(&mut rng)).collect(),
            bias: 0.0,
            updates_applied: 0,
            link,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check_dim(&self, features: &FeatureVector) -> Result<()> {
        if features.dim != self.weights.len() {
            return Err(Error::invalid(format!(
                "feature dim {} does not match predictor dim {}",
                features.dim,
                self.weights.len()
            )));
        }
        Ok(())
    }

    fn score(&self, features: &FeatureVector) -> f64 {
        features
            .entries
            .iter()
            .map(|&(i, v)| self.weights[i] * v)
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<f64> {
        self.check_dim(features)?;
        let z = self.score(features);
        Ok(match self.link {
            Link::Logistic => sigmoid(z),
            Link::Identity => z.clamp(0.0, 1.0),
        })
    }

    /// d/dz of `(Â − target)²` at the current parameters.
    fn score_gradient(&self, features: &FeatureVector, target: f64) -> f64 {
        let z = self.score(features);
        match self.link {
            Link::Logistic => {
                let a = sigmoid(z);
                2.0 * (a - target) * a * (1.0 - a)
            }
            Link::Identity => {
                if (0.0..=1.0).contains(&z) {
                    2.0 * (z - target)
                } else {
                    0.0
                }
            }
        }
    }

    /// One SGD step on `(Â − true_accuracy)²`. Only the coordinates present in
    /// `features` and the bias move.
    pub fn sgd_update(
        &mut self,
        features: &FeatureVector,
        true_accuracy: f64,
        eta: f64,
    ) -> Result<()> {
        self.check_dim(features)?;
        if !(0.0..=1.0).contains(&true_accuracy) {
            return Err(Error::invalid(format!(
                "true accuracy must lie in [0, 1], got {true_accuracy}"
            )));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid(format!(
                "eta must be finite and > 0, got {eta}"
            )));
        }
        let g = self.score_gradient(features, true_accuracy);
        for &(i, v) in &features.entries {
            self.weights[i] -= eta * g * v;
        }
        self.bias -= eta * g;
        self.updates_applied += 1;
        Ok(())
    }

    /// Analytic gradient of the squared error w.r.t. `(weights at the feature
    /// support, bias)`, in the order of `features.entries()` followed by bias.
    pub fn loss_gradient(&self, features: &FeatureVector, target: f64) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        let g = self.score_gradient(features, target);
        let mut out: Vec<f64> = features.entries.iter().map(|&(_, v)| g * v).collect();
        out.push(g);
        Ok(out)
    }

    /// Writes the sparse text form: a header line followed by one
    /// `index value` line per nonzero weight.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "mess-plus-predictor v1 dim={} link={} bias={} updates={}",
            self.weights.len(),
            self.link.as_str(),
            self.bias,
            self.updates_applied
        )?;
        for (i, &x) in self.weights.iter().enumerate() {
            if x != 0.0 {
                writeln!(w, "{i} {x}")?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty predictor file".into(),
                })
            }
        };
        let bad_header = |msg: &str| Error::Parse {
            line: 1,
            message: format!("{msg} in header `{header}`"),
        };
        let mut fields = header.split_whitespace();
        if fields.next() != Some("mess-plus-predictor") || fields.next() != Some("v1") {
            return Err(bad_header("unrecognized magic"));
        }
        let (mut dim, mut link, mut bias, mut updates) = (None, None, None, None);
        for kv in fields {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad_header("malformed field"))?;
            match k {
                "dim" => dim = v.parse::<usize>().ok(),
                "link" => {
                    link = match v {
                        "logistic" => Some(Link::Logistic),
                        "identity" => Some(Link::Identity),
                        _ => None,
                    }
                }
                "bias" => bias = v.parse::<f64>().ok(),
                "updates" => updates = v.parse::<u64>().ok(),
                _ => return Err(bad_header("unknown field")),
            }
        }
        let (Some(dim), Some(link), Some(bias), Some(updates)) = (dim, link, bias, updates) else {
            return Err(bad_header("missing or invalid field"));
        };
        let mut params = PredictorParams {
            weights: vec![0.0; dim],
            bias,
            updates_applied: updates,
            link,
        };
        for (n, line) in lines {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line
                .split_once(' ')
                .and_then(|(i, x)| Some((i.parse::<usize>().ok()?, x.trim().parse::<f64>().ok()?)));
            match parsed {
                Some((i, x)) if i < dim && x.is_finite() => params.weights[i] = x,
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected `index value` within dim {dim}, got `{line}`"),
                    })
                }
            }
        }
        Ok(params)
    }
}

/// Mean squared residual over a labelled set.
pub fn batch_loss(params: &PredictorParams, examples: &[(FeatureVector, f64)]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::invalid("batch_loss needs at least one example"));
    }
    let mut sum = 0.0;
    for (x, y) in examples {
        let r = params.predict(x)? - y;
        sum += r * r;
    }
    Ok(sum / examples.len() as f64)
}

/// One predictor per zoo model, all starting from the same random draw.
#[derive(Debug, Clone)]
pub struct PredictorBank {
    models: Vec<PredictorParams>,
    hash_seed: u64,
}

impl PredictorBank {
    pub fn new(num_models: usize, settings: &PredictorSettings, seed: u64) -> Result<Self> {
        let init =
            PredictorParams::random(settings.dim, settings.init_stddev, seed, settings.link)?;
        Ok(Self {
            models: vec![init; num_models],
            hash_seed: settings.hash_seed,
        })
    }

    pub fn featurize(&self, text: &str) -> Result<FeatureVector> {
        featurize(text, self.dim(), self.hash_seed)
    }

    pub fn dim(&self) -> usize {
        self.models.first().map(|p| p.dim()).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn params(&self, model: usize) -> &PredictorParams {
        &self.models[model]
    }

    pub fn predict_all(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        self.models.iter().map(|p| p.predict(features)).collect()
    }

    pub fn update_all(
        &mut self,
        features: &FeatureVector,
        accuracies: &[f64],
        eta: f64,
    ) -> Result<()> {
        if accuracies.len() != self.models.len() {
            return Err(Error::invalid(format!(
                "{} accuracies for {} predictors",
                accuracies.len(),
                self.models.len()
            )));
        }
        for (p, &a) in self.models.iter_mut().zip(accuracies) {
            p.sgd_update(features, a, eta)?;
        }
        Ok(())
    }

    /// Per-model held-out loss; `labels[k][m]` is model `m`'s accuracy on
    /// example `k`.
    pub fn held_out_losses(
        &self,
        features: &[FeatureVector],
        labels: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        (0..self.models.len())
            .map(|m| {
                let set: Vec<(FeatureVector, f64)> = features
                    .iter()
                    .zip(labels)
                    .map(|(x, y)| (x.clone(), y[m]))
                    .collect();
                batch_loss(&self.models[m], &set)
            })
            .collect()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (m, p) in self.models.iter().enumerate() {
            let _ = writeln!(
                s,
                "model {m}: bias={:.4} updates={}",
                p.bias, p.updates_applied
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorSettings {
    pub dim: usize,
    pub hash_seed: u64,
    pub link: Link,
    pub init_stddev: f64,
}

impl Default for PredictorSettings {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            hash_seed: 0,
            link: Link::Logistic,
            init_stddev: DEFAULT_INIT_STDDEV,
        }
    }
}
