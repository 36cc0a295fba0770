use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, TraceProvider};
use crate::harness::policy::Policy;
use crate::harness::runner::{run_policy_with, LossPoint, RunOutcome};
use crate::metrics::{mean_std, MeanStd};
use crate::zoo::{TraceBackend, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    V,
    C,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::V => "V",
            SweepParam::C => "c",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: RunOutcome,
}

/// Aggregates for one grid value across seeds.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub runs: Vec<SeedRun>,
    pub accuracy: MeanStd,
    pub energy_joules: MeanStd,
    pub explorations: MeanStd,
    pub sla_met_all: bool,
    /// Mean per-request latency with models queried one after another.
    pub sequential_latency: MeanStd,
    /// Mean per-request latency with exploration queries run in parallel.
    pub parallel_latency: MeanStd,
    /// Measured wall-clock seconds per request inside zoo queries.
    pub wall_clock_per_request: MeanStd,
}

impl SweepPoint {
    fn from_runs(value: f64, runs: Vec<SeedRun>) -> Self {
        let col = |f: &dyn Fn(&RunOutcome) -> f64| -> MeanStd {
            mean_std(&runs.iter().map(|r| f(&r.outcome)).collect::<Vec<_>>())
        };
        Self {
            value,
            accuracy: col(&|o| o.report.mean_accuracy),
            energy_joules: col(&|o| o.report.mean_energy_joules),
            explorations: col(&|o| o.report.exploration_count as f64),
            sla_met_all: runs.iter().all(|r| r.outcome.report.sla_met),
            sequential_latency: col(&|o| o.report.mean_latency_seconds),
            parallel_latency: col(&|o| o.report.mean_parallel_latency_seconds),
            wall_clock_per_request: col(&|o| o.wall_clock_seconds / o.report.t.max(1) as f64),
            runs,
        }
    }
}

/// Runs MESS+ at every grid value of `param` for every configured seed.
/// Runs execute in parallel; results come back in grid then seed order.
/// With `held_out > 0` each run also tracks predictor loss on records that
/// are held out of the run.
pub fn sweep(
    cfg: &ExperimentConfig,
    provider: &TraceProvider,
    param: SweepParam,
    grid: &[f64],
    held_out: usize,
    loss_every: u64,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{} grid is empty", param.name())));
    }
    cfg.validate()?;
    let mut base = cfg.clone();
    base.policy = Policy::MessPlus;

    let traces: Vec<(u64, Vec<TraceRecord>)> = cfg
        .seeds
        .par_iter()
        .map(|&s| provider.trace_for(s, held_out).map(|t| (s, t)))
        .collect::<Result<_>>()?;
    for (_, t) in &traces {
        if t.len() <= held_out {
            return Err(Error::Config(format!(
                "trace of {} records leaves nothing after holding out {held_out}",
                t.len()
            )));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..traces.len()).map(move |s| (g, s)))
        .collect();
    let results: Vec<Result<SeedRun>> = jobs
        .par_iter()
        .map(|&(g, s)| {
            let value = grid[g];
            let (seed, trace) = &traces[s];
            let mut c = base.clone();
            match param {
                SweepParam::V => c.controller.v = value,
                SweepParam::C => c.controller.c = value,
            }
            let spec = c.run_spec(provider, *seed)?;
            let (train, held) = trace.split_at(trace.len() - held_out);
            let probe = (held_out > 0).then_some((held, loss_every));
            let outcome = run_policy_with(
                &spec,
                train,
                &TraceBackend::new(spec.controller.num_models),
                probe,
            )?;
            Ok(SeedRun {
                seed: *seed,
                outcome,
            })
        })
        .collect();

    let mut points = Vec::with_capacity(grid.len());
    let mut it = jobs.iter().zip(results);
    for &value in grid {
        let mut runs = Vec::with_capacity(traces.len());
        for _ in 0..traces.len() {
            let (&(_, s), r) = it.next().expect("one result per job");
            let seed = traces[s].0;
            runs.push(r.map_err(|e| e.context(format!("{}={value}, seed {seed}", param.name())))?);
        }
        points.push(SweepPoint::from_runs(value, runs));
    }
    Ok(points)
}

pub fn sweep_v(
    cfg: &ExperimentConfig,
    provider: &TraceProvider,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    sweep(cfg, provider, SweepParam::V, grid, 0, 1)
}

pub fn sweep_c(
    cfg: &ExperimentConfig,
    provider: &TraceProvider,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    let s = &cfg.sweeps;
    sweep(cfg, provider, SweepParam::C, grid, s.held_out, s.loss_every)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serialization(e.to_string())
}

/// Per-grid-value aggregates. Contains no wall-clock measurements, so it is
/// reproducible byte for byte.
pub fn write_sweep_csv<W: Write>(w: W, param: SweepParam, points: &[SweepPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        param.name(),
        "seeds",
        "accuracy_mean",
        "accuracy_std",
        "energy_joules_mean",
        "energy_joules_std",
        "explorations_mean",
        "explorations_std",
        "sla_met_all",
        "sequential_latency_mean",
        "parallel_latency_mean",
    ])
    .map_err(csv_err)?;
    for p in points {
        out.write_record([
            p.value.to_string(),
            p.runs.len().to_string(),
            p.accuracy.mean.to_string(),
            p.accuracy.std.to_string(),
            p.energy_joules.mean.to_string(),
            p.energy_joules.std.to_string(),
            p.explorations.mean.to_string(),
            p.explorations.std.to_string(),
            p.sla_met_all.to_string(),
            p.sequential_latency.mean.to_string(),
            p.parallel_latency.mean.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Serialization(e.to_string()))
}

/// Modelled sequential and parallel latency per request.
pub fn write_latency_csv<W: Write>(w: W, points: &[SweepPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "c",
        "explorations_mean",
        "sequential_latency_mean",
        "sequential_latency_std",
        "parallel_latency_mean",
        "parallel_latency_std",
    ])
    .map_err(csv_err)?;
    for p in points {
        out.write_record([
            p.value.to_string(),
            p.explorations.mean.to_string(),
            p.sequential_latency.mean.to_string(),
            p.sequential_latency.std.to_string(),
            p.parallel_latency.mean.to_string(),
            p.parallel_latency.std.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Serialization(e.to_string()))
}

/// Measured wall-clock seconds per request spent in zoo queries. Varies
/// between executions, unlike every other output.
pub fn write_wall_clock_csv<W: Write>(
    w: W,
    param: SweepParam,
    points: &[SweepPoint],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        param.name(),
        "wall_clock_per_request_mean",
        "wall_clock_per_request_std",
    ])
    .map_err(csv_err)?;
    for p in points {
        out.write_record([
            p.value.to_string(),
            p.wall_clock_per_request.mean.to_string(),
            p.wall_clock_per_request.std.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Serialization(e.to_string()))
}

/// Long-format loss curves: one row per (grid value, seed, checkpoint, model).
pub fn write_loss_csv<W: Write>(w: W, param: SweepParam, points: &[SweepPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([param.name(), "seed", "explorations", "t", "model", "loss"])
        .map_err(csv_err)?;
    for p in points {
        for r in &p.runs {
            for LossPoint {
                explorations,
                t,
                losses,
            } in &r.outcome.loss_curve
            {
                for (m, l) in losses.iter().enumerate() {
                    out.write_record([
                        p.value.to_string(),
                        r.seed.to_string(),
                        explorations.to_string(),
                        t.to_string(),
                        m.to_string(),
                        l.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    out.flush().map_err(|e| Error::Serialization(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{SynthSource, TraceSource};
    use crate::predictor::PredictorSettings;

    fn small_cfg(requests: usize) -> ExperimentConfig {
        ExperimentConfig {
            seeds: vec![1, 2],
            predictor: PredictorSettings {
                dim: 1 << 12,
                ..Default::default()
            },
            trace: TraceSource {
                path: None,
                synth: Some(SynthSource {
                    requests: Some(requests),
                    ..Default::default()
                }),
            },
            ..Default::default()
        }
    }

    #[test]
    fn v_sweep_orders_and_aggregates() {
        let cfg = small_cfg(300);
        let provider = TraceProvider::from_config(&cfg).unwrap();
        let points = sweep_v(&cfg, &provider, &[0.01, 100.0]).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].value, 0.01);
        assert_eq!(
            points[0].runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert!(points[0].energy_joules.mean >= points[1].energy_joules.mean);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, SweepParam::V, &points).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn c_sweep_holds_out_records() {
        let mut cfg = small_cfg(200);
        cfg.sweeps.held_out = 20;
        let provider = TraceProvider::from_config(&cfg).unwrap();
        let points = sweep_c(&cfg, &provider, &[1.0]).unwrap();
        let run = &points[0].runs[0].outcome;
        assert_eq!(run.report.t, 200);
        assert!(!run.loss_curve.is_empty());
    }

    #[test]
    fn bad_grid_point_names_value() {
        let cfg = small_cfg(50);
        let provider = TraceProvider::from_config(&cfg).unwrap();
        let err = sweep_c(&cfg, &provider, &[1.0, -2.0])
            .unwrap_err()
            .to_string();
        assert!(err.contains("c=-2"), "{err}");
        assert!(sweep_v(&cfg, &provider, &[]).is_err());
    }
}
