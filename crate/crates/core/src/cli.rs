//! Batch front end: load a scenario, run a solver or a sweep, write CSV and
//! JSON artifacts into the output directory.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::benchmarks::{run_benchmark, run_proposed_with, BenchmarkKind};
use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::recovery::write_schedule_csv;
use crate::relaxed::{solve_relaxed, GridSpec, HoverPlan, RelaxedSolution};
use crate::sca::{init_shf, plan_sca};
use crate::scenario::{BudgetNorm, Scenario};

pub const THREADS_ENV: &str = "OUTAGE_PLANNER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "outage-planner", version, about = "UAV trajectory and sensor power planning for outage minimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Speed-unconstrained optimum: hover plan JSON and map CSV.
    Relaxed(CommonArgs),
    /// Alternating SCA from the SHF start: trace and trajectory CSV.
    Sca(CommonArgs),
    /// Full pipeline including power recovery: schedule CSV.
    Recover(CommonArgs),
    /// Proposed design and the three benchmarks on one scenario.
    Benchmark(CommonArgs),
    /// Outage versus average power budget.
    SweepPower(PowerSweepArgs),
    /// Outage versus mission duration, with the relaxed bound.
    SweepDuration(DurationSweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Horizon,
    ActiveSlots,
}

#[derive(Clone, Debug, Args)]
pub struct CommonArgs {
    /// Scenario JSON (may also be given with --scenario).
    #[arg(value_name = "SCENARIO")]
    pub scenario_pos: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Search grid resolution per axis.
    #[arg(long, default_value_t = 81)]
    pub grid: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long = "t-s")]
    pub t_s: Option<f64>,
    #[arg(long = "p-ave-dbm", allow_negative_numbers = true)]
    pub p_ave_dbm: Option<f64>,
    #[arg(long = "n-slots")]
    pub n_slots: Option<usize>,
    #[arg(long = "budget-norm", value_enum)]
    pub budget_norm: Option<NormArg>,
}

#[derive(Clone, Debug, Args)]
pub struct PowerSweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Budgets to sweep, dBm.
    #[arg(long, value_delimiter = ',', default_value = "26,28,30,32,34,36", allow_negative_numbers = true)]
    pub levels: Vec<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct DurationSweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Durations to sweep, seconds.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
    pub durations: Vec<f64>,
    /// Slots per second; defaults to the scenario's own N / T.
    #[arg(long)]
    pub slot_rate: Option<f64>,
}

/// Resolved request: which command, on which scenario, written where.
#[derive(Clone, Debug)]
pub struct RunRequest {
    pub command: Command,
    pub scenario: Scenario,
    pub grid: usize,
    pub out: PathBuf,
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Relaxed(a) | Command::Sca(a) | Command::Recover(a) | Command::Benchmark(a) => a,
            Command::SweepPower(a) => &a.common,
            Command::SweepDuration(a) => &a.common,
        }
    }
}

fn load_scenario(c: &CommonArgs) -> Result<Scenario> {
    let path = c
        .scenario
        .as_ref()
        .or(c.scenario_pos.as_ref())
        .ok_or_else(|| Error::field("scenario", "no scenario path given"))?;
    let mut s = Scenario::load(path)?;
    if let Some(p) = c.p_ave_dbm {
        s = s.with_uniform_budget_dbm(p)?;
    }
    if let Some(n) = c.n_slots {
        s = s.with_slots(n)?;
    }
    if let Some(t) = c.t_s {
        s = s.with_duration(t)?;
    }
    if let Some(norm) = c.budget_norm {
        s = s.with_budget_norm(match norm {
            NormArg::Horizon => BudgetNorm::Horizon,
            NormArg::ActiveSlots => BudgetNorm::ActiveSlots,
        });
    }
    Ok(s)
}

impl RunRequest {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let c = cli.command.common().clone();
        let scenario = load_scenario(&c)?;
        if c.grid == 0 {
            return Err(Error::field("grid", "resolution must be positive"));
        }
        Ok(RunRequest { command: cli.command, scenario, grid: c.grid, out: c.out })
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, v: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_hover_map(dir: &Path, s: &Scenario, plan: &HoverPlan) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "hover_map.csv")?);
    w.write_record(["kind", "id", "x", "y", "duration_s"])?;
    for x in &s.sensors {
        w.write_record(["sensor".into(), x.id.to_string(), fmt_sig(x.position.x), fmt_sig(x.position.y), String::new()])?;
    }
    for (i, c) in plan.clusters.iter().enumerate() {
        w.write_record(["hover".into(), (i + 1).to_string(), fmt_sig(c.centroid.x), fmt_sig(c.centroid.y), fmt_sig(c.duration)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_trajectory(dir: &Path, name: &str, tr: &crate::scenario::Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    w.write_record(["n", "x", "y"])?;
    for (n, q) in tr.waypoints.iter().enumerate() {
        w.write_record([n.to_string(), fmt_sig(q.x), fmt_sig(q.y)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
struct SweepRow {
    scheme: String,
    p_ave_dbm: f64,
    t_s: f64,
    outage: f64,
}

fn write_sweep(dir: &Path, name: &str, mut rows: Vec<SweepRow>) -> Result<()> {
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.p_ave_dbm.total_cmp(&b.p_ave_dbm))
            .then(a.t_s.total_cmp(&b.t_s))
    });
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    w.write_record(["scheme", "p_ave_dbm", "t_s", "outage"])?;
    for r in rows {
        w.write_record([r.scheme, fmt_sig(r.p_ave_dbm), fmt_sig(r.t_s), fmt_sig(r.outage)])?;
    }
    w.flush()?;
    Ok(())
}

/// Budget in dBm when every sensor shares one budget, else `NaN`.
fn common_budget_dbm(s: &Scenario) -> f64 {
    let b = s.sensors[0].avg_power_budget;
    if s.sensors.iter().all(|x| x.avg_power_budget == b) {
        crate::scenario::watts_to_dbm(b)
    } else {
        f64::NAN
    }
}

/// All schemes plus the relaxed bound on one scenario.
fn scheme_rows(s: &Scenario, grid: &GridSpec, p_dbm: f64) -> Result<Vec<SweepRow>> {
    let relaxed = solve_relaxed(s, grid);
    let row = |scheme: &str, outage: f64| SweepRow { scheme: scheme.into(), p_ave_dbm: p_dbm, t_s: s.duration, outage };
    let mut rows = vec![row("upper_bound", relaxed.plan.outage_probability)];
    for kind in BenchmarkKind::ALL {
        rows.push(row(kind.as_str(), run_benchmark(kind, s, grid, &relaxed)?.outage));
    }
    rows.push(row("proposed", run_proposed_with(s, relaxed)?.outcome.outage));
    Ok(rows)
}

fn relaxed_summary(sol: &RelaxedSolution) -> serde_json::Value {
    let mut v = sol.plan.to_json();
    v["ellipsoid_iterations"] = json!(sol.iterations);
    v
}

/// Executes a resolved request.
pub fn run(req: &RunRequest) -> Result<()> {
    fs::create_dir_all(&req.out)?;
    let s = &req.scenario;
    let grid = GridSpec::for_scenario(s, req.grid);
    let out = req.out.as_path();
    match &req.command {
        Command::Relaxed(_) => {
            let sol = solve_relaxed(s, &grid);
            write_json(out, "hover_plan.json", &relaxed_summary(&sol))?;
            write_hover_map(out, s, &sol.plan)?;
        }
        Command::Sca(_) => {
            let sol = solve_relaxed(s, &grid);
            let init = init_shf(s, &sol.plan);
            let plan = plan_sca(s, &init);
            plan.state.write_trace_csv(create(out, "sca_trace.csv")?)?;
            write_trajectory(out, "sca_trajectory.csv", &plan.trajectory)?;
            write_schedule_csv(&plan.trajectory, &plan.powers, s, create(out, "sca_schedule.csv")?)?;
        }
        Command::Recover(_) => {
            let sol = solve_relaxed(s, &grid);
            let run = run_proposed_with(s, sol)?;
            run.sca.state.write_trace_csv(create(out, "sca_trace.csv")?)?;
            write_trajectory(out, "trajectory.csv", &run.outcome.trajectory)?;
            write_schedule_csv(&run.outcome.trajectory, &run.outcome.powers, s, create(out, "schedule.csv")?)?;
            write_json(
                out,
                "summary.json",
                &json!({
                    "outage": run.outcome.outage,
                    "relaxed_bound": run.relaxed.plan.outage_probability,
                    "init": run.init.kind,
                    "sca_steps": run.sca.state.iteration,
                }),
            )?;
        }
        Command::Benchmark(_) => {
            let rows = scheme_rows(s, &grid, common_budget_dbm(s))?;
            write_sweep(out, "benchmark.csv", rows)?;
        }
        Command::SweepPower(a) => {
            let rows: Vec<Vec<SweepRow>> = a
                .levels
                .par_iter()
                .map(|&p| {
                    let sp = s.with_uniform_budget_dbm(p)?;
                    scheme_rows(&sp, &GridSpec::for_scenario(&sp, req.grid), p)
                })
                .collect::<Result<_>>()?;
            write_sweep(out, "sweep_power.csv", rows.into_iter().flatten().collect())?;
        }
        Command::SweepDuration(a) => {
            let rate = a.slot_rate.unwrap_or(s.slots as f64 / s.duration);
            let p_dbm = common_budget_dbm(s);
            let rows: Vec<Vec<SweepRow>> = a
                .durations
                .par_iter()
                .map(|&t| {
                    let n = ((rate * t).round() as usize).max(1);
                    let st = s.with_slots(n).and_then(|x| x.with_duration(t))?;
                    scheme_rows(&st, &GridSpec::for_scenario(&st, req.grid), p_dbm)
                })
                .collect::<Result<_>>()?;
            write_sweep(out, "sweep_duration.csv", rows.into_iter().flatten().collect())?;
        }
    }
    Ok(())
}

/// Machine-readable error record.
pub fn error_record(e: &Error) -> serde_json::Value {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // fails only if a pool already exists, which is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
/// Errors are reported on stderr as a single JSON line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match RunRequest::from_cli(cli).and_then(|req| run(&req)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            1
        }
    }
}
