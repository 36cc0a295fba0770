//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 for usage errors and 2 for runtime failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::config::{
    ExperimentConfig, SynthPreset, SynthSource, TraceProvider, TraceSource,
};
use crate::harness::output::{collect_reports, create_file, unique_run_dir, write_file, write_run};
use crate::harness::policy::Policy;
use crate::harness::runner::{run_policy, run_policy_with, RunOutcome};
use crate::harness::sweep::{
    sweep_c, sweep_v, write_latency_csv, write_loss_csv, write_sweep_csv, write_wall_clock_csv,
    SweepParam, SweepPoint,
};
use crate::metrics::{render_comparison, render_report, RunReport};
use crate::zoo::{write_trace, LiveBackend};

#[derive(Debug, Parser)]
#[command(
    name = "mess-plus",
    version,
    about = "Energy-aware online model selection under an accuracy SLA"
)]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Trace file: input for run and sweeps, output for synth-trace.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run seed; replaces the configured seed list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Accuracy SLA.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Energy weight V.
    #[arg(long, global = true)]
    pub v: Option<f64>,
    /// Exploration constant c.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Policy, or a comma-separated list for `run`.
    #[arg(long, global = true)]
    pub policy: Option<String>,
    /// Number of synthetic requests.
    #[arg(long, global = true)]
    pub requests: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more policies over a trace.
    Run,
    /// Sweep the energy weight V.
    SweepV {
        /// Comma-separated grid; defaults to the configured one.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Sweep the exploration constant c.
    SweepC {
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Write a synthetic trace file.
    SynthTrace {
        #[arg(long, value_enum, default_value = "wmt14")]
        preset: PresetArg,
    },
    /// Summarize report.json files or directories containing them.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum PresetArg {
    Wmt14,
    CnnDailymail,
}

impl From<PresetArg> for SynthPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Wmt14 => SynthPreset::Wmt14,
            PresetArg::CnnDailymail => SynthPreset::CnnDailymail,
        }
    }
}

/// Parses `args` (including the program name), executes and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e @ Error::InvalidArgument(_)) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(a) = cli.alpha {
        cfg.alpha_sla = a;
    }
    if let Some(v) = cli.v {
        cfg.controller.v = v;
    }
    if let Some(c) = cli.c {
        cfg.controller.c = c;
    }
    if !matches!(cli.command, Command::SynthTrace { .. }) {
        if let Some(t) = &cli.trace {
            cfg.trace = TraceSource::from_path(t);
        }
    }
    if let Some(n) = cli.requests {
        match &mut cfg.trace.synth {
            Some(s) => s.requests = Some(n),
            None => {
                return Err(Error::invalid(
                    "--requests only applies to synthetic traces",
                ))
            }
        }
    }
    if let Some(p) = policies(cli)?.first() {
        cfg.policy = *p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn policies(cli: &Cli) -> Result<Vec<Policy>> {
    match &cli.policy {
        None => Ok(Vec::new()),
        Some(s) => s.split(',').map(str::parse).collect(),
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    if let Command::Report { paths } = &cli.command {
        return report(paths, out);
    }
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Run => run_cmd(cli, &cfg, out),
        Command::SweepV { grid } => {
            let grid = grid.clone().unwrap_or_else(|| cfg.sweeps.v_grid.clone());
            sweep_cmd(&cfg, SweepParam::V, &grid, out)
        }
        Command::SweepC { grid } => {
            let grid = grid.clone().unwrap_or_else(|| cfg.sweeps.c_grid.clone());
            sweep_cmd(&cfg, SweepParam::C, &grid, out)
        }
        Command::SynthTrace { preset } => synth_cmd(cli, &cfg, (*preset).into(), out),
        Command::Report { .. } => unreachable!(),
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn policy_dir(p: Policy) -> String {
    p.to_string().replace(':', "_")
}

fn run_cmd(cli: &Cli, cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let mut list = policies(cli)?;
    if list.is_empty() {
        list.push(cfg.policy);
    }
    let provider = TraceProvider::from_config(cfg)?;
    let live = cfg.live.clone().map(LiveBackend::new).transpose()?;
    let dir = unique_run_dir(&cfg.output_dir, "run")?;
    write_file(&dir.join("config.toml"), &cfg.to_toml()?)?;

    let mut reports: Vec<RunReport> = Vec::new();
    for &policy in &list {
        let mut pc = cfg.clone();
        pc.policy = policy;
        for &seed in &cfg.seeds {
            let spec = pc.run_spec(&provider, seed)?;
            let trace = provider.trace_for(seed, 0)?;
            let outcome: RunOutcome = match &live {
                Some(backend) => run_policy_with(&spec, &trace, backend, None)?,
                None => run_policy(&spec, &trace)?,
            };
            let run_dir = dir.join(policy_dir(policy)).join(format!("seed-{seed}"));
            write_run(&run_dir, &outcome.report, &outcome.steps)?;
            reports.push(outcome.report);
        }
    }
    let mut table = if reports.len() == 1 {
        render_report(&reports[0])
    } else {
        render_comparison(&reports)?
    };
    if list.contains(&(Policy::RandomConstrained { q_large: None })) {
        let means = provider.calibration_means();
        let q = provider.resolve_policy(
            Policy::RandomConstrained { q_large: None },
            cfg.internal_alpha(),
        )?;
        table.push_str(&format!(
            "note: random_constrained uses oracle mean accuracies {means:.4?}, resolved to {q}\n"
        ));
    }
    write_file(&dir.join("summary.txt"), &table)?;
    write!(out, "{table}").map_err(io_out)?;
    writeln!(out, "results written to {}", dir.display()).map_err(io_out)
}

fn sweep_cmd(
    cfg: &ExperimentConfig,
    param: SweepParam,
    grid: &[f64],
    out: &mut dyn Write,
) -> Result<()> {
    let provider = TraceProvider::from_config(cfg)?;
    let points: Vec<SweepPoint> = match param {
        SweepParam::V => sweep_v(cfg, &provider, grid)?,
        SweepParam::C => sweep_c(cfg, &provider, grid)?,
    };
    let label = match param {
        SweepParam::V => "sweep-v",
        SweepParam::C => "sweep-c",
    };
    let dir = unique_run_dir(&cfg.output_dir, label)?;
    write_file(&dir.join("config.toml"), &cfg.to_toml()?)?;

    let flush =
        |mut w: std::io::BufWriter<std::fs::File>, p: &Path| w.flush().map_err(|e| Error::io(p, e));
    let summary = dir.join("summary.csv");
    let mut w = create_file(&summary)?;
    write_sweep_csv(&mut w, param, &points)?;
    flush(w, &summary)?;
    if param == SweepParam::C {
        let p = dir.join("latency.csv");
        let mut w = create_file(&p)?;
        write_latency_csv(&mut w, &points)?;
        flush(w, &p)?;
        let p = dir.join("wall_clock.csv");
        let mut w = create_file(&p)?;
        write_wall_clock_csv(&mut w, param, &points)?;
        flush(w, &p)?;
        let p = dir.join("loss_curves.csv");
        let mut w = create_file(&p)?;
        write_loss_csv(&mut w, param, &points)?;
        flush(w, &p)?;
    }
    let name = if param == SweepParam::V { "v" } else { "c" };
    for p in &points {
        for r in &p.runs {
            let run_dir = dir
                .join(format!("{name}-{}", p.value))
                .join(format!("seed-{}", r.seed));
            write_run(&run_dir, &r.outcome.report, &r.outcome.steps)?;
        }
    }

    writeln!(
        out,
        "{:>10} {:>16} {:>20} {:>8} {:>12} {:>12}",
        if param == SweepParam::V { "V" } else { "c" },
        "accuracy (%)",
        "energy (J/request)",
        "meets α",
        "K",
        "latency (s)"
    )
    .map_err(io_out)?;
    for p in &points {
        writeln!(
            out,
            "{:>10} {:>8.2} ± {:<5.2} {:>11.3} ± {:<6.2} {:>8} {:>12.0} {:>12.4}",
            p.value,
            100.0 * p.accuracy.mean,
            100.0 * p.accuracy.std,
            p.energy_joules.mean,
            p.energy_joules.std,
            if p.sla_met_all { "Yes" } else { "No" },
            p.explorations.mean,
            p.sequential_latency.mean,
        )
        .map_err(io_out)?;
    }
    writeln!(out, "results written to {}", dir.display()).map_err(io_out)
}

fn synth_cmd(
    cli: &Cli,
    cfg: &ExperimentConfig,
    preset: SynthPreset,
    out: &mut dyn Write,
) -> Result<()> {
    let source = match (&cfg.trace.synth, cli.config.is_some()) {
        // A config file's synth section wins over the preset flag.
        (Some(s), true) => s.clone(),
        _ => SynthSource {
            preset: Some(preset),
            config: None,
            requests: Some(cli.requests.unwrap_or(20_000)),
            seed: None,
        },
    };
    let synth = source.resolve()?;
    let seed = source.seed.unwrap_or(cfg.seeds[0]);
    let records = crate::zoo::synth_trace(&synth, seed)?;
    let path = match &cli.trace {
        Some(p) => p.clone(),
        None => cfg.output_dir.join(format!("trace-seed{seed}.jsonl")),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_trace(&path, &records)?;
    writeln!(out, "wrote {} records to {}", records.len(), path.display()).map_err(io_out)
}

fn report(paths: &[PathBuf], out: &mut dyn Write) -> Result<()> {
    let mut files = Vec::new();
    for p in paths {
        files.extend(collect_reports(p)?);
    }
    if files.is_empty() {
        return Err(Error::invalid("no report.json files found"));
    }
    let reports = files
        .iter()
        .map(RunReport::load)
        .collect::<Result<Vec<_>>>()?;
    if reports.len() == 1 {
        write!(out, "{}", render_report(&reports[0])).map_err(io_out)
    } else {
        write!(out, "{}", render_comparison(&reports)?).map_err(io_out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("mess-plus").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = parse(&[
            "run",
            "--v",
            "2",
            "--seed",
            "7",
            "--policy",
            "largest_only,smallest_only",
        ]);
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!(cfg.controller.v, 2.0);
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.policy, Policy::LargestOnly);
        assert_eq!(policies(&cli).unwrap().len(), 2);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["mess-plus", "frobnicate"]), 1);
        assert_eq!(run(["mess-plus", "run", "--v", "abc"]), 1);
        assert_eq!(run(["mess-plus", "run", "--policy", "nope"]), 1);
        assert_eq!(run(["mess-plus", "--help"]), 0);
    }

    #[test]
    fn runtime_errors_exit_two() {
        let tmp = tempfile::tempdir().unwrap();
        let missing = tmp.path().join("missing.jsonl");
        let out = tmp.path().join("out");
        assert_eq!(
            run([
                "mess-plus",
                "run",
                "--trace",
                missing.to_str().unwrap(),
                "--out",
                out.to_str().unwrap()
            ]),
            2
        );
    }
}
