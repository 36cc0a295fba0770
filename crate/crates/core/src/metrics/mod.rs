//! Accuracy scorers and run-level accounting.

mod scorers;

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use scorers::{bleu1, rouge1, rouge1_scores, tokenize, RougeScores, Scorer};

/// Header of the per-step CSV, in column order.
pub const STEP_CSV_HEADER: &str =
    "t,p_t,explored,chosen_model,accuracy,energy_joules,queue,latency_seconds";

/// What happened on one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub p_t: f64,
    pub explored: bool,
    pub chosen_model: usize,
    /// Realized accuracy of the served model.
    pub accuracy: f64,
    /// Energy charged for the step (all models on exploration steps).
    pub energy_joules: f64,
    /// Queue length after this step's update, `Q(t+1)`.
    pub queue: f64,
    /// Sequential latency: summed over every model queried.
    pub latency_seconds: f64,
    /// Parallel latency: slowest model queried.
    pub parallel_latency_seconds: f64,
    /// Energy spent beyond the served model on exploration steps.
    pub exploration_overhead_joules: f64,
}

#[derive(Debug, Serialize)]
struct StepRow {
    t: u64,
    p_t: f64,
    explored: bool,
    chosen_model: usize,
    accuracy: f64,
    energy_joules: f64,
    queue: f64,
    latency_seconds: f64,
}

impl From<&StepRecord> for StepRow {
    fn from(s: &StepRecord) -> Self {
        Self {
            t: s.t,
            p_t: s.p_t,
            explored: s.explored,
            chosen_model: s.chosen_model,
            accuracy: s.accuracy,
            energy_joules: s.energy_joules,
            queue: s.queue,
            latency_seconds: s.latency_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy_name: String,
    #[serde(rename = "T")]
    pub t: u64,
    pub mean_accuracy: f64,
    pub total_energy_joules: f64,
    pub mean_energy_joules: f64,
    pub sla_alpha: f64,
    pub sla_met: bool,
    pub exploration_count: u64,
    /// `Q(1), …, Q(T+1)`.
    pub queue_trajectory: Vec<f64>,
    pub per_model_selection_counts: Vec<u64>,
    pub mean_latency_seconds: f64,
    pub mean_parallel_latency_seconds: f64,
    pub exploration_overhead_joules: f64,
    accuracy_sum: f64,
    latency_sum: f64,
    parallel_latency_sum: f64,
}

impl RunReport {
    pub fn new(
        policy_name: impl Into<String>,
        num_models: usize,
        sla_alpha: f64,
        q_init: f64,
    ) -> Self {
        Self {
            policy_name: policy_name.into(),
            t: 0,
            mean_accuracy: 0.0,
            total_energy_joules: 0.0,
            mean_energy_joules: 0.0,
            sla_alpha,
            sla_met: false,
            exploration_count: 0,
            queue_trajectory: vec![q_init],
            per_model_selection_counts: vec![0; num_models],
            mean_latency_seconds: 0.0,
            mean_parallel_latency_seconds: 0.0,
            exploration_overhead_joules: 0.0,
            accuracy_sum: 0.0,
            latency_sum: 0.0,
            parallel_latency_sum: 0.0,
        }
    }

    /// Folds one step into the running totals.
    pub fn update(&mut self, step: &StepRecord) -> Result<()> {
        if step.t != self.t + 1 {
            return Err(Error::InvalidState(format!(
                "report is at T={} but received step t={}",
                self.t, step.t
            )));
        }
        let count = self
            .per_model_selection_counts
            .get_mut(step.chosen_model)
            .ok_or_else(|| {
                Error::invalid(format!("chosen model {} out of range", step.chosen_model))
            })?;
        *count += 1;
        self.t += 1;
        self.accuracy_sum += step.accuracy;
        self.total_energy_joules += step.energy_joules;
        self.latency_sum += step.latency_seconds;
        self.parallel_latency_sum += step.parallel_latency_seconds;
        self.exploration_overhead_joules += step.exploration_overhead_joules;
        if step.explored {
            self.exploration_count += 1;
        }
        self.queue_trajectory.push(step.queue);

        let n = self.t as f64;
        self.mean_accuracy = self.accuracy_sum / n;
        self.mean_energy_joules = self.total_energy_joules / n;
        self.mean_latency_seconds = self.latency_sum / n;
        self.mean_parallel_latency_seconds = self.parallel_latency_sum / n;
        self.sla_met = sla_check(self, self.sla_alpha)?;
        Ok(())
    }

    pub fn final_queue(&self) -> f64 {
        *self
            .queue_trajectory
            .last()
            .expect("trajectory starts with Q(1)")
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Whether the time-averaged accuracy meets `alpha`, compared at 6 decimals.
pub fn sla_check(report: &RunReport, alpha: f64) -> Result<bool> {
    if report.t == 0 {
        return Err(Error::InvalidState(
            "SLA check needs at least one step".into(),
        ));
    }
    Ok(round6(report.mean_accuracy) >= round6(alpha))
}

pub fn write_steps_csv<W: Write>(w: W, steps: &[StepRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    if steps.is_empty() {
        writer
            .write_record(STEP_CSV_HEADER.split(','))
            .map_err(ser)?;
    }
    for s in steps {
        writer.serialize(StepRow::from(s)).map_err(ser)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Serialization(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

/// One row of a policy comparison table, aggregated across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy_name: String,
    pub runs: usize,
    pub accuracy: MeanStd,
    pub energy_joules: MeanStd,
    pub sla_alpha: f64,
    pub sla_met_all: bool,
    pub explorations: MeanStd,
}

impl PolicySummary {
    pub fn from_reports(reports: &[&RunReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::invalid("no reports to summarize"))?;
        let acc: Vec<f64> = reports.iter().map(|r| r.mean_accuracy).collect();
        let energy: Vec<f64> = reports.iter().map(|r| r.mean_energy_joules).collect();
        let k: Vec<f64> = reports.iter().map(|r| r.exploration_count as f64).collect();
        Ok(Self {
            policy_name: first.policy_name.clone(),
            runs: reports.len(),
            accuracy: mean_std(&acc),
            energy_joules: mean_std(&energy),
            sla_alpha: first.sla_alpha,
            sla_met_all: reports.iter().all(|r| r.sla_met),
            explorations: mean_std(&k),
        })
    }
}

/// Groups reports by policy name (first-seen order) and renders a comparison
/// table. Accuracy is shown percent-scaled, as BLEU/ROUGE tables usually are.
pub fn render_comparison(reports: &[RunReport]) -> Result<String> {
    let mut names: Vec<&str> = Vec::new();
    for r in reports {
        if !names.contains(&r.policy_name.as_str()) {
            names.push(&r.policy_name);
        }
    }
    let w = names.iter().map(|n| n.len()).max().unwrap_or(0).max(20);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<w$} {:>16} {:>20} {:>8} {:>10}",
        "policy", "accuracy (%)", "energy (J/request)", "meets α", "K"
    );
    for name in names {
        let group: Vec<&RunReport> = reports.iter().filter(|r| r.policy_name == name).collect();
        let s = PolicySummary::from_reports(&group)?;
        let _ = writeln!(
            out,
            "{:<w$} {:>8.1} ± {:<5.1} {:>11.3} ± {:<6.1} {:>8} {:>10.0}",
            s.policy_name,
            100.0 * s.accuracy.mean,
            100.0 * s.accuracy.std,
            s.energy_joules.mean,
            s.energy_joules.std,
            if s.sla_met_all { "Yes" } else { "No" },
            s.explorations.mean,
        );
    }
    Ok(out)
}

/// Human-readable summary of a single report.
pub fn render_report(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "policy              {}", r.policy_name);
    let _ = writeln!(out, "requests (T)        {}", r.t);
    let _ = writeln!(
        out,
        "mean accuracy       {:.6} ({:.2}%)",
        r.mean_accuracy,
        100.0 * r.mean_accuracy
    );
    let _ = writeln!(
        out,
        "SLA alpha           {:.6} -> {}",
        r.sla_alpha,
        if r.sla_met { "met" } else { "violated" }
    );
    let _ = writeln!(out, "total energy        {:.3} J", r.total_energy_joules);
    let _ = writeln!(
        out,
        "mean energy         {:.3} J/request",
        r.mean_energy_joules
    );
    let _ = writeln!(out, "explorations (K)    {}", r.exploration_count);
    let _ = writeln!(
        out,
        "exploration energy  {:.3} J overhead",
        r.exploration_overhead_joules
    );
    let _ = writeln!(out, "final queue Q(T+1)  {:.6}", r.final_queue());
    let _ = writeln!(
        out,
        "selections          {:?}",
        r.per_model_selection_counts
    );
    let _ = writeln!(
        out,
        "mean latency        {:.4} s sequential, {:.4} s parallel",
        r.mean_latency_seconds, r.mean_parallel_latency_seconds
    );
    out
}
