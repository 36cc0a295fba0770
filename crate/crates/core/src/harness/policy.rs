use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    #[default]
    MessPlus,
    SmallestOnly,
    LargestOnly,
    /// Bernoulli mix of the smallest and largest model. `q_large` is the
    /// probability of the largest; when absent it is solved from calibration
    /// means so the expected accuracy equals the SLA.
    RandomConstrained {
        #[serde(default)]
        q_large: Option<f64>,
    },
    Fixed {
        model: usize,
    },
}

impl Policy {
    pub fn validate(&self, num_models: usize) -> Result<()> {
        match *self {
            Policy::RandomConstrained { q_large: Some(q) } if !(0.0..=1.0).contains(&q) => {
                Err(Error::Config(format!(
                    "random_constrained probability must lie in [0, 1], got {q}"
                )))
            }
            Policy::Fixed { model } if model >= num_models => Err(Error::Config(format!(
                "fixed model index {model} out of range for a {num_models}-model zoo"
            ))),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::MessPlus => write!(f, "mess_plus"),
            Policy::SmallestOnly => write!(f, "smallest_only"),
            Policy::LargestOnly => write!(f, "largest_only"),
            Policy::RandomConstrained { q_large: None } => write!(f, "random_constrained"),
            Policy::RandomConstrained { q_large: Some(q) } => write!(f, "random_constrained:{q}"),
            Policy::Fixed { model } => write!(f, "fixed:{model}"),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    /// Accepts `mess_plus`, `smallest_only`, `largest_only`,
    /// `random_constrained[:q]` and `fixed:<index>`; dashes work as well as
    /// underscores.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().replace('-', "_");
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s.as_str(), None),
        };
        let bad = || Error::invalid(format!("unknown policy `{s}`"));
        match (head, arg) {
            ("mess_plus" | "messplus", None) => Ok(Policy::MessPlus),
            ("smallest_only" | "smallest", None) => Ok(Policy::SmallestOnly),
            ("largest_only" | "largest", None) => Ok(Policy::LargestOnly),
            ("random_constrained" | "random", None) => {
                Ok(Policy::RandomConstrained { q_large: None })
            }
            ("random_constrained" | "random", Some(q)) => {
                let q: f64 = q.parse().map_err(|_| bad())?;
                let p = Policy::RandomConstrained { q_large: Some(q) };
                p.validate(usize::MAX)?;
                Ok(p)
            }
            ("fixed", Some(m)) => Ok(Policy::Fixed {
                model: m.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Probability of picking the largest model so that a smallest/largest mix
/// has expected accuracy `alpha`. `means` are per-model mean accuracies in
/// size order.
pub fn calibrate_random_constrained(means: &[f64], alpha: f64) -> Result<f64> {
    if means.len() < 2 {
        return Err(Error::invalid(
            "random_constrained needs at least two models",
        ));
    }
    let small = means[0];
    let large = means[means.len() - 1];
    if alpha <= small {
        return Ok(0.0);
    }
    if large < alpha {
        return Err(Error::Infeasible(format!(
            "alpha {alpha} exceeds the largest model's mean accuracy {large}"
        )));
    }
    // small < alpha <= large, so the denominator is positive.
    Ok(((alpha - small) / (large - small)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn calibration_examples() {
        // (0.52 − 0.491) / (0.551 − 0.491)
        assert_abs_diff_eq!(
            calibrate_random_constrained(&[0.491, 0.551], 0.52).unwrap(),
            0.029 / 0.06,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            calibrate_random_constrained(&[0.491, 0.551], 0.52).unwrap(),
            0.4833,
            epsilon = 1e-4
        );
        assert_eq!(
            calibrate_random_constrained(&[0.491, 0.551], 0.45).unwrap(),
            0.0
        );
        assert_eq!(
            calibrate_random_constrained(&[0.491, 0.551], 0.491).unwrap(),
            0.0
        );
        assert_eq!(
            calibrate_random_constrained(&[0.491, 0.551], 0.551).unwrap(),
            1.0
        );
        assert!(matches!(
            calibrate_random_constrained(&[0.491, 0.551], 0.6),
            Err(Error::Infeasible(_))
        ));
        assert!(calibrate_random_constrained(&[0.5], 0.4).is_err());
        // middle models are ignored
        assert_abs_diff_eq!(
            calibrate_random_constrained(&[0.4, 0.9, 0.6], 0.5).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn parse_and_display() {
        for s in [
            "mess_plus",
            "smallest_only",
            "largest_only",
            "random_constrained",
            "fixed:2",
            "random_constrained:0.25",
        ] {
            assert_eq!(s.parse::<Policy>().unwrap().to_string(), s);
        }
        assert_eq!("mess-plus".parse::<Policy>().unwrap(), Policy::MessPlus);
        assert!("bogus".parse::<Policy>().is_err());
        assert!("fixed".parse::<Policy>().is_err());
        assert!("random_constrained:1.5".parse::<Policy>().is_err());
    }

    #[test]
    fn validation() {
        assert!(Policy::Fixed { model: 2 }.validate(2).is_err());
        assert!(Policy::Fixed { model: 1 }.validate(2).is_ok());
    }
}
