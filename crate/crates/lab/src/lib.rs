//! Configuration, orchestration and reproducible reporting for the
//! `manelab-core` experiments.
//!
//! A run reads one JSON scenario, materializes every default, hashes the
//! resolved document and writes plot-ready CSV and JSON records next to a
//! `report.json` holding verdicts, fitted constants and a file manifest.
//! Experiments may run on a worker pool; files are always assembled in a
//! fixed order, so the same configuration reproduces the same bytes.

pub mod cloud_file;
pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{run_one, Outcome, Verdict};
use crate::config::{Config, Format, ScaleSpec};
use crate::output::{to_json, write_all, FileEntry};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("io: {0}")]
    Io(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
    /// Failures collected over a whole run, already described.
    #[error("{0}")]
    Run(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GapCheck,
    Floquet,
    Dimension,
    Simulate,
    /// Every experiment above.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GapCheck => "gap-check",
            Command::Floquet => "floquet",
            Command::Dimension => "dimension",
            Command::Simulate => "simulate",
            Command::Report => "report",
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub scales: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub scenario_hash: String,
    pub verdicts: Vec<Verdict>,
    pub failures: Vec<String>,
    pub files: Vec<FileEntry>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn all_as_expected(&self) -> bool {
        self.verdicts.iter().all(|v| v.as_expected)
    }

    /// 0 when every verdict matches its expectation, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_as_expected() { 0 } else { 2 }
    }

    /// Rounded human view; the CSV files hold the full values.
    pub fn table(&self) -> String {
        let mut s = format!("config sha256 {}\n", self.scenario_hash);
        s += &format!("{:<22} {:<20} {:<20} {}\n", "experiment", "verdict", "expected", "status");
        for v in &self.verdicts {
            let status = if v.as_expected { "ok" } else { "CONTRADICTS EXPECTATION" };
            s += &format!("{:<22} {:<20} {:<20} {status}\n", v.name, v.verdict, v.expected.as_deref().unwrap_or("-"));
            for (k, x) in &v.constants {
                s += &format!("    {k} = {x:.6}\n");
            }
        }
        s
    }
}

/// Loads the config (or the defaults) and applies command-line overrides.
pub fn resolve_config(opts: &Options) -> Result<Config, LabError> {
    let mut cfg = match &opts.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(dir) = &opts.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(s) = &opts.scales {
        ScaleSpec::parse(s)?;
        cfg.geometry.scales = Some(s.clone());
    }
    if let Some(f) = opts.format {
        cfg.output.formats = vec![f];
    }
    if opts.threads == Some(0) {
        return Err(LabError::Config("--threads must be positive".into()));
    }
    cfg.resolve()
}

type Experiment = fn(&Config, &mut output::Artifacts) -> Result<Vec<Verdict>, LabError>;

fn experiments(cmd: Command) -> Vec<Experiment> {
    match cmd {
        Command::GapCheck => vec![commands::gap_check],
        Command::Floquet => vec![commands::floquet],
        Command::Dimension => vec![commands::dimension],
        Command::Simulate => vec![commands::simulate],
        Command::Report => vec![commands::gap_check, commands::floquet, commands::simulate, commands::dimension],
    }
}

/// Runs `cmd`, writes every output and `report.json`. An operational
/// failure of any experiment is returned as an error after the files that
/// were produced (including `report.json`) have been written.
pub fn run(cmd: Command, opts: &Options) -> Result<RunReport, LabError> {
    let cfg = resolve_config(opts)?;
    let start = Instant::now();
    let jobs = experiments(cmd);
    let go = || jobs.par_iter().map(|f| run_one(&cfg, *f)).collect::<Vec<Outcome>>();
    let outcomes = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| LabError::Io(format!("thread pool: {e}")))?
            .install(go),
        None => go(),
    };
    let hash = cfg.sha256();
    let mut files = vec![("resolved_config.json".to_string(), cfg.canonical_json().into_bytes())];
    let mut verdicts = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        files.extend(o.artifacts.files);
        verdicts.extend(o.verdicts);
        failures.extend(o.failure);
    }
    let manifest = write_all(&cfg.output.dir, &files)?;
    let report = RunReport {
        command: cmd.name().into(),
        scenario_hash: hash,
        verdicts,
        failures,
        files: manifest,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    write_all(&cfg.output.dir, &[("report.json".into(), to_json("report.json", &report)?)])?;
    if !report.failures.is_empty() {
        return Err(LabError::Run(report.failures.join("; ")));
    }
    Ok(report)
}
