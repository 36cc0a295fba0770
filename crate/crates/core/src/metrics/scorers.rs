use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Lowercased whitespace tokens. Punctuation is kept attached.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn counts<S: AsRef<str>>(tokens: &[S]) -> HashMap<&str, usize> {
    let mut map = HashMap::new();
    for t in tokens {
        *map.entry(t.as_ref()).or_insert(0) += 1;
    }
    map
}

/// Clipped unigram overlap between candidate and reference.
fn overlap<S: AsRef<str>, R: AsRef<str>>(candidate: &[S], reference: &[R]) -> usize {
    let refs = counts(reference);
    counts(candidate)
        .into_iter()
        .map(|(w, c)| c.min(refs.get(w).copied().unwrap_or(0)))
        .sum()
}

/// Sentence-level BLEU-1: clipped unigram precision times brevity penalty.
pub fn bleu1<S: AsRef<str>, R: AsRef<str>>(candidate: &[S], reference: &[R]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let precision = overlap(candidate, reference) as f64 / c;
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    bp * precision
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn rouge1_scores<S: AsRef<str>, R: AsRef<str>>(
    candidate: &[S],
    reference: &[R],
) -> RougeScores {
    let zero = RougeScores {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    if candidate.is_empty() || reference.is_empty() {
        return zero;
    }
    let hits = overlap(candidate, reference);
    if hits == 0 {
        return zero;
    }
    let precision = hits as f64 / candidate.len() as f64;
    let recall = hits as f64 / reference.len() as f64;
    RougeScores {
        precision,
        recall,
        f1: 2.0 * precision * recall / (precision + recall),
    }
}

/// ROUGE-1 F1.
pub fn rouge1<S: AsRef<str>, R: AsRef<str>>(candidate: &[S], reference: &[R]) -> f64 {
    rouge1_scores(candidate, reference).f1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    #[default]
    Bleu1,
    Rouge1,
}

impl Scorer {
    pub fn score(self, candidate: &str, reference: &str) -> f64 {
        let (c, r) = (tokenize(candidate), tokenize(reference));
        match self {
            Scorer::Bleu1 => bleu1(&c, &r),
            Scorer::Rouge1 => rouge1(&c, &r),
        }
    }
}
