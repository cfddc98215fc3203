//! The `robocache` command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 success with an overrun
//! alert.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::kb::KnowledgeBase;
use crate::report::{self, ComparisonTable, MetricsReport};
use crate::sim::{self, MethodKind, RunResult};
use crate::workload::{self, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ALERT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "robocache", version, about = "Baseline vs hit-ordered cache robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg = cfg.with_output_dir(out.clone());
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the scan trace and the knowledge base for a config.
    Generate(Common),
    /// Run one method over the generated trace and write its report.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["baseline", "cached"]))]
        method: String,
        /// Also write each robot's final holding area as `barcode,hits` CSV.
        #[arg(long)]
        snapshot: bool,
    },
    /// Compare a baseline and a cached report.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        cached: PathBuf,
        /// Directory for comparison.csv (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, run both methods and compare, in one step.
    Report {
        #[command(flatten)]
        common: Common,
        /// Number of consecutive seeds to sweep, starting at the config seed.
        #[arg(long, default_value_t = 1)]
        sweep: u64,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Generate(common) => cmd_generate(&common.load()?),
        Command::Run {
            common,
            method,
            snapshot,
        } => {
            let method: MethodKind = method.parse().map_err(anyhow::Error::msg)?;
            cmd_run(&common.load()?, method, snapshot)
        }
        Command::Compare {
            baseline,
            cached,
            out,
        } => cmd_compare(&baseline, &cached, out.as_deref().unwrap_or(Path::new("."))),
        Command::Report {
            common,
            sweep,
            jobs,
        } => cmd_report(&common.load()?, sweep, jobs),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create directory {}", parent.display()))?;
        }
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn cmd_generate(cfg: &SimConfig) -> Result<i32> {
    let trace = workload::generate(&cfg.workload)?;
    let kb = workload::knowledge_base(&cfg.workload);
    write_file(&cfg.trace_path(), &trace.to_csv_bytes())?;
    let mut kb_bytes = Vec::new();
    kb.export(&mut kb_bytes)?;
    write_file(&cfg.kb_path(), &kb_bytes)?;
    println!("trace {} ({} scans)", cfg.trace_path().display(), trace.len());
    println!("kb {} ({} records)", cfg.kb_path().display(), kb.len());
    Ok(EXIT_OK)
}

fn load_inputs(cfg: &SimConfig) -> Result<(Trace, KnowledgeBase)> {
    let trace_path = cfg.trace_path();
    let kb_path = cfg.kb_path();
    let trace_file = fs::File::open(&trace_path)
        .with_context(|| format!("cannot open trace {}", trace_path.display()))?;
    let trace = Trace::load(BufReader::new(trace_file))
        .with_context(|| format!("in {}", trace_path.display()))?;
    let kb_file = fs::File::open(&kb_path)
        .with_context(|| format!("cannot open knowledge base {}", kb_path.display()))?;
    let kb = KnowledgeBase::ingest(BufReader::new(kb_file))
        .with_context(|| format!("in {}", kb_path.display()))?;
    Ok((trace, kb))
}

fn report_paths(dir: &Path, method: MethodKind) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{method}.report.csv")),
        dir.join(format!("{method}.raw.json")),
    )
}

fn write_report(dir: &Path, report: &MetricsReport) -> Result<()> {
    let (csv, json) = report_paths(dir, report.method);
    write_file(&csv, report.to_csv().as_bytes())?;
    let mut text = serde_json::to_string(report)?;
    text.push('\n');
    write_file(&json, text.as_bytes())
}

fn write_snapshots(dir: &Path, result: &RunResult) -> Result<()> {
    for s in &result.snapshots {
        let path = dir.join(format!("snapshot_robot{}.csv", s.robot_id));
        write_file(&path, s.snapshot.to_csv().as_bytes())?;
    }
    Ok(())
}

/// Runs one method and summarizes it.
fn execute(cfg: &SimConfig, trace: &Trace, kb: &KnowledgeBase, method: MethodKind) -> Result<(RunResult, MetricsReport)> {
    let result = sim::run(method, trace, kb, &cfg.station)?;
    let report = report::summarize(&result.counters, method, &trace.digest(), &result.digest)?;
    Ok((result, report))
}

fn alert_code(report: &MetricsReport, cfg: &SimConfig) -> i32 {
    let alert = report::check_alert(report, &cfg.alert);
    match alert.diagnostic_line() {
        Some(line) => {
            eprintln!("{line}");
            EXIT_ALERT
        }
        None => EXIT_OK,
    }
}

pub fn cmd_run(cfg: &SimConfig, method: MethodKind, snapshot: bool) -> Result<i32> {
    let (trace, kb) = load_inputs(cfg)?;
    let (result, report) = execute(cfg, &trace, &kb, method)?;
    write_report(&cfg.output_dir, &report)?;
    if snapshot {
        write_snapshots(&cfg.output_dir, &result)?;
    }
    let (csv, json) = report_paths(&cfg.output_dir, method);
    println!("{}", csv.display());
    println!("{}", json.display());
    eprintln!(
        "{method}: {} scans in {:.1} ms host time",
        result.counters.scans, result.counters.wall_clock_of_run_ms
    );
    Ok(alert_code(&report, cfg))
}

fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read report {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a raw report", path.display()))
}

fn write_table(dir: &Path, table: &ComparisonTable) -> Result<PathBuf> {
    let path = dir.join("comparison.csv");
    write_file(&path, table.to_csv().as_bytes())?;
    Ok(path)
}

pub fn cmd_compare(baseline: &Path, cached: &Path, out: &Path) -> Result<i32> {
    let b = read_report(baseline)?;
    let c = read_report(cached)?;
    let table = report::compare(&b, &c)?;
    let path = write_table(out, &table)?;
    print!("{}", table.to_text());
    println!("{}", path.display());
    Ok(EXIT_OK)
}

fn full_pipeline(cfg: &SimConfig) -> Result<(ComparisonTable, i32)> {
    let trace = workload::generate(&cfg.workload)?;
    let kb = workload::knowledge_base(&cfg.workload);
    let mut reports = Vec::with_capacity(2);
    for method in MethodKind::ALL {
        let (_, report) = execute(cfg, &trace, &kb, method)?;
        write_report(&cfg.output_dir, &report)?;
        reports.push(report);
    }
    let table = report::compare(&reports[0], &reports[1])?;
    write_table(&cfg.output_dir, &table)?;
    let code = reports.iter().map(|r| alert_code(r, cfg)).max().unwrap_or(EXIT_OK);
    Ok((table, code))
}

pub fn cmd_report(cfg: &SimConfig, sweep: u64, jobs: usize) -> Result<i32> {
    if sweep == 0 {
        bail!("--sweep must be at least 1");
    }
    if sweep == 1 {
        let (table, code) = full_pipeline(cfg)?;
        print!("{}", table.to_text());
        return Ok(code);
    }
    let configs: Vec<SimConfig> = (0..sweep)
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            cfg.clone()
                .with_seed(seed)
                .with_output_dir(cfg.output_dir.join(format!("seed-{seed}")))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    let results: Vec<Result<(ComparisonTable, i32)>> =
        pool.install(|| configs.par_iter().map(full_pipeline).collect());

    let mut summary = String::from("seed,latency_ratio,processing_ratio,disruption_ratio,comparisons_ratio\n");
    let mut code = EXIT_OK;
    for (cfg, result) in configs.iter().zip(results) {
        let (table, c) = result?;
        code = code.max(c);
        let cells: Vec<String> = table
            .ratios
            .as_array()
            .iter()
            .map(|r| r.map(|v| v.to_string()).unwrap_or_default())
            .collect();
        summary.push_str(&format!("{},{}\n", cfg.seed, cells.join(",")));
    }
    let path = cfg.output_dir.join("sweep.csv");
    write_file(&path, summary.as_bytes())?;
    print!("{summary}");
    Ok(code)
}
