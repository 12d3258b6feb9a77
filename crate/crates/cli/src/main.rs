//! `stampwait` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 infeasible
//! credibility bound, 4 numerical failure, 5 I/O error.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use stampwait::experiments::{self, ExperimentKind, SweepSpec};
use stampwait::multi::{self, ASSchedule, Estimator, MetricReport, RRPolicy};
use stampwait::sim::{self, CyclePlan, NoiseModel, SimEstimate, SimOptions};
use stampwait::single::{self, SingleSolution};
use stampwait::{Error, Result, ThresholdPolicy};

use crate::config::RunConfig;

/// Environment variable naming the default output directory.
const OUTPUT_DIR_ENV: &str = "STAMPWAIT_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "results";
const DEFAULT_SEED: u64 = 1;
const DEFAULT_EPOCHS: u64 = 1_000_000;
const CURVE_POINTS: usize = 201;

#[derive(Debug, Parser)]
#[command(name = "stampwait", version, about = "Sleep-wake and scheduling policies trading AoI against time-stamp error")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal threshold for a single process.
    SolveSingle(SolveArgs),
    /// Monte Carlo estimates for a fixed policy.
    Simulate(SimulateArgs),
    /// Best round-robin threshold.
    OptimizeRr(OptimizeRrArgs),
    /// Best asymmetric trial counts.
    OptimizeAs(OptimizeAsArgs),
    /// Trade-off sweeps as CSV plus manifest.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Write here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Credibility bound τ; switches to the constrained form.
    #[arg(long)]
    tau: Option<f64>,
    /// Weight β on AoI for the weighted form.
    #[arg(long)]
    beta: Option<f64>,
    /// Also print AoI and error over a grid of thresholds.
    #[arg(long)]
    emit_curve: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyKind {
    Single,
    Rr,
    As,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    Uniform,
    Zero,
}

impl From<NoiseArg> for NoiseModel {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => NoiseModel::Gaussian,
            NoiseArg::Uniform => NoiseModel::Uniform,
            NoiseArg::Zero => NoiseModel::Zero,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_enum)]
    policy: PolicyKind,
    /// Deliveries for `single`, cycles for `rr` and `as`.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Threshold ξ for `single` and `rr`.
    #[arg(long)]
    threshold: Option<f64>,
    /// Trial counts for `as`, comma separated.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<u32>>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    /// Dump every delivery as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Analytic,
    Simulated,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    /// Cycles per candidate when simulating.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct OptimizeRrArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    est: EstimateArgs,
    #[arg(long)]
    xi_max: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct OptimizeAsArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    est: EstimateArgs,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    m_max: Option<u32>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Figure to reproduce.
    #[arg(long, value_parser = ["3", "4", "5"])]
    fig: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Read the two-process service parameter as a rate instead of a mean.
    #[arg(long)]
    service_parameter_is_rate: bool,
    /// Output directory (created if missing).
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. }
        | Error::InvalidConfig(_)
        | Error::UnboundedWait
        | Error::Unsupported(_)
        | Error::Json(_) => 2,
        Error::Infeasible { .. } => 3,
        Error::NonConvergence { .. } => 4,
        Error::Io(_) | Error::Csv(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match cli.command {
        Command::SolveSingle(a) => solve_single_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::OptimizeRr(a) => optimize_rr_cmd(a),
        Command::OptimizeAs(a) => optimize_as_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn emit(out: &OutArg, bytes: &[u8]) -> Result<()> {
    match &out.out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, bytes)?;
        }
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: &OutArg, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    emit(out, &bytes)
}

#[derive(Serialize)]
struct CurvePoint {
    threshold: f64,
    aoi: f64,
    err: f64,
}

#[derive(Serialize)]
struct SolveOutput {
    #[serde(flatten)]
    solution: SingleSolution,
    tau: Option<f64>,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<Vec<CurvePoint>>,
}

fn solve_single_cmd(a: SolveArgs) -> Result<()> {
    let rc = RunConfig::load_opt(a.config.config.as_deref())?;
    let mut cfg = rc.system()?;
    cfg.sole_process()?;
    if let Some(b) = a.beta {
        cfg.processes[0].weight = b;
    }
    let tau = a.tau.or(cfg.credibility_bound);
    cfg.validate()?;
    let solution = match tau {
        Some(t) => single::solve_single(&cfg, Some(t))?,
        None => single::solve_weighted(&cfg)?,
    };
    let curve = if a.emit_curve {
        let hi = (4.0 * solution.threshold).max(5.0);
        let pts = (0..CURVE_POINTS)
            .map(|j| {
                let xi = hi * j as f64 / (CURVE_POINTS - 1) as f64;
                Ok(CurvePoint {
                    threshold: xi,
                    aoi: single::aoi_of_threshold(&cfg, xi)?,
                    err: single::error_of_threshold(&cfg, xi)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Some(pts)
    } else {
        None
    };
    emit_json(
        &a.out,
        &SolveOutput {
            solution,
            tau,
            beta: cfg.processes[0].weight,
            curve,
        },
    )
}

/// Rows of `quantity,process,estimate,std_error,ci_low,ci_high`.
struct MetricsTable(Vec<(String, String, f64, f64)>);

impl MetricsTable {
    fn push(&mut self, quantity: &str, process: String, value: f64, se: f64) {
        self.0.push((quantity.into(), process, value, se));
    }

    fn push_estimate(&mut self, quantity: &str, process: usize, e: &SimEstimate) {
        self.push(quantity, (process + 1).to_string(), e.value, e.std_error);
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("quantity,process,estimate,std_error,ci_low,ci_high\n");
        for (q, p, v, se) in &self.0 {
            let h = sim::Z95 * se;
            s.push_str(&format!("{q},{p},{v},{se},{},{}\n", v - h, v + h));
        }
        s
    }
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let rc = RunConfig::load_opt(a.config.config.as_deref())?;
    let cfg = rc.system()?;
    let epochs = a.epochs.or(rc.epochs).unwrap_or(DEFAULT_EPOCHS);
    if epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be positive".into()));
    }
    let seed = a.seed.or(rc.seed).unwrap_or(DEFAULT_SEED);
    let opts = SimOptions {
        noise: a.noise.map(NoiseModel::from).or(rc.noise).unwrap_or_default(),
        trace: a.trace.is_some(),
    };
    let threshold = a.threshold.or(rc.threshold).unwrap_or(0.0);
    let plan = match a.policy {
        PolicyKind::Single => {
            cfg.sole_process()?;
            CyclePlan::single(ThresholdPolicy::new(threshold)?.threshold)
        }
        PolicyKind::Rr => CyclePlan::round_robin(cfg.len(), RRPolicy::new(threshold)?.threshold),
        PolicyKind::As => {
            let m = a
                .schedule
                .or(rc.schedule)
                .ok_or_else(|| Error::InvalidConfig("policy as needs --schedule".into()))?;
            let s = ASSchedule::new(m)?;
            s.validate(cfg.len())?;
            CyclePlan::asymmetric(&s.m)
        }
    };
    let run = sim::simulate_plan(&cfg, &plan, epochs, seed, opts)?;
    if let (Some(path), Some(records)) = (&a.trace, &run.trace) {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        sim::write_trace(fs::File::create(path)?, records)?;
    }
    let mut table = MetricsTable(Vec::new());
    for (k, e) in run.estimates().iter().enumerate() {
        table.push_estimate("aoi", k, &e.aoi);
        table.push_estimate("err", k, &e.err);
        table.push_estimate("err_raw", k, &e.err_raw);
    }
    let report = MetricReport::from_run(&cfg, &run);
    table.push("objective", "all".into(), report.objective, report.objective_std_error());
    emit(&a.out, table.to_csv().as_bytes())
}

fn estimator(est: &EstimateArgs, rc: &RunConfig, default: EstimatorArg) -> Estimator {
    match est.estimator.unwrap_or(default) {
        EstimatorArg::Analytic => Estimator::Analytic,
        EstimatorArg::Simulated => Estimator::Simulated {
            cycles: est.epochs.or(rc.epochs).unwrap_or(rc.budget.unwrap_or_default().cycles),
            seed: est.seed.or(rc.seed).unwrap_or(DEFAULT_SEED),
        },
    }
}

#[derive(Serialize)]
struct OptimizeOutput<P: Serialize> {
    policy: P,
    report: MetricReport,
    sum_aoi: f64,
    sum_err: f64,
}

fn optimize_rr_cmd(a: OptimizeRrArgs) -> Result<()> {
    let rc = RunConfig::load_opt(a.config.config.as_deref())?;
    let cfg = rc.system()?;
    let budget = rc.budget.unwrap_or_default();
    let default = if cfg.len() == 1 { EstimatorArg::Analytic } else { EstimatorArg::Simulated };
    let est = estimator(&a.est, &rc, default);
    let (policy, report) = multi::rr_optimize(
        &cfg,
        a.xi_max.unwrap_or(budget.xi_max),
        a.grid.unwrap_or(budget.rr_grid),
        est,
    )?;
    emit_json(
        &a.out,
        &OptimizeOutput {
            policy,
            sum_aoi: report.sum_aoi(),
            sum_err: report.sum_err(),
            report,
        },
    )
}

fn optimize_as_cmd(a: OptimizeAsArgs) -> Result<()> {
    let rc = RunConfig::load_opt(a.config.config.as_deref())?;
    let cfg = rc.system()?;
    let budget = rc.budget.unwrap_or_default();
    let est = estimator(&a.est, &rc, EstimatorArg::Analytic);
    let (policy, report) = multi::as_optimize(&cfg, a.m_max.unwrap_or(budget.m_max), est)?;
    emit_json(
        &a.out,
        &OptimizeOutput {
            policy,
            sum_aoi: report.sum_aoi(),
            sum_err: report.sum_err(),
            report,
        },
    )
}

fn sweep_for(fig: &str, rc: &RunConfig, seed: u64, is_rate: bool) -> Result<SweepSpec> {
    let kind = match fig {
        "3" => ExperimentKind::Fig3,
        "4" => ExperimentKind::Fig4,
        _ => ExperimentKind::Fig5,
    };
    if let Some(s) = &rc.sweep {
        if s.kind != kind {
            return Err(Error::InvalidConfig(format!(
                "config sweep is {:?} but --fig {fig} was requested",
                s.kind
            )));
        }
        let mut s = s.clone();
        s.seed = seed;
        return Ok(s);
    }
    let mut s = match kind {
        ExperimentKind::Fig3 => SweepSpec::fig3(seed)?,
        ExperimentKind::Fig4 => SweepSpec::fig4(seed, is_rate)?,
        _ => SweepSpec::fig5(seed, is_rate)?,
    };
    if let Some(b) = rc.budget {
        s.budget = b;
    }
    Ok(s)
}

fn experiment_cmd(a: ExperimentArgs) -> Result<()> {
    let rc = RunConfig::load_opt(a.config.config.as_deref())?;
    let seed = a
        .seed
        .or(rc.seed)
        .or(rc.sweep.as_ref().map(|s| s.seed))
        .unwrap_or(DEFAULT_SEED);
    let is_rate = a.service_parameter_is_rate || rc.service_parameter_is_rate.unwrap_or(false);
    let spec = sweep_for(&a.fig, &rc, seed, is_rate)?;
    let dir: PathBuf = a
        .out_dir
        .or_else(|| rc.output_dir.clone())
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| Path::new(DEFAULT_OUTPUT_DIR).to_path_buf());
    let w = experiments::run_experiment(&spec, &dir)?;
    println!("{} ({} rows)", w.csv.display(), w.rows);
    println!("{}", w.manifest.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), 2);
        assert_eq!(exit_code(&Error::Infeasible { tau: 0.0, reason: "x".into() }), 3);
        assert_eq!(
            exit_code(&Error::NonConvergence {
                routine: "r",
                detail: "d".into()
            }),
            4
        );
        assert_eq!(exit_code(&Error::Io(io::Error::other("x"))), 5);
    }
}
