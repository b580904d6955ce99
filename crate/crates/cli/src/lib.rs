//! Command-line driver: scenario configs in, JSON reports and CSV tables out.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on any
//! error (bad config, failed computation, I/O).

pub mod config;
pub mod report;
pub mod sweep;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{Context, Result};
use capillary_core::scenarios::{run_checks, CheckRecord, ScenarioKind, SCENARIO_NAMES};
use clap::{Parser, Subcommand};

pub use config::{load_config, parse_config, RunConfig};
pub use report::{load_report, parse_report, Report};
pub use sweep::{sweep, SweepParam, SweepTable};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "capillary",
    version,
    about = "Variational checks for capillary interfaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run every check of the configured scenario.
    Run {
        config: PathBuf,
        /// JSON report path; overrides `[output] json`.
        #[arg(long)]
        json: Option<PathBuf>,
        /// CSV table path; overrides `[output] csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Tabulate check values against R0, resolution or t-step.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        /// CSV table path; printed to stdout when neither output is given.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the scenario names with their default parameters.
    ListScenarios,
}

/// Records of one run, with grid and seed attached as metadata.
pub fn run_records(cfg: &RunConfig) -> Result<Vec<CheckRecord>> {
    let s = cfg.scenario()?;
    let res = cfg.resolution();
    let recs = run_checks(&s, &res, cfg.run.seed)?;
    Ok(recs
        .into_iter()
        .map(|r| {
            r.meta("seed", cfg.run.seed)
                .meta("level", res.level)
                .meta("order", res.order)
        })
        .collect())
}

/// Runs the checks and assembles the report.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    Ok(Report {
        schema_version: report::SCHEMA_VERSION.into(),
        run_config_echo: serde_json::to_value(cfg)?,
        records: run_records(cfg)?,
    })
}

/// Runs and writes the configured outputs; returns the exit code.
pub fn run_and_write(cfg: &RunConfig) -> Result<i32> {
    let rep = run(cfg)?;
    if let Some(p) = &cfg.output.json {
        report::write_file(p, &rep.to_json()?)?;
    }
    if let Some(p) = &cfg.output.csv {
        report::write_file(p, &rep.to_csv()?)?;
    }
    for r in &rep.records {
        println!(
            "{} {} measured={} expected={} tol={}",
            if r.pass { "PASS" } else { "FAIL" },
            r.check_id,
            report::num(r.measured),
            report::num(r.expected),
            report::num(r.tolerance)
        );
    }
    let failed = rep.records.iter().filter(|r| !r.pass).count();
    println!("{} records, {failed} failed", rep.records.len());
    Ok(if failed == 0 {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    })
}

fn list_scenarios() -> Result<()> {
    for name in SCENARIO_NAMES {
        let kind = ScenarioKind::default_for(name)?;
        let params: Vec<String> = kind
            .params()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        println!("{name}\t{}", params.join(" "));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, json, csv } => {
            let mut cfg = load_config(&config)?;
            if json.is_some() {
                cfg.output.json = json;
            }
            if csv.is_some() {
                cfg.output.csv = csv;
            }
            run_and_write(&cfg)
        }
        Command::Sweep {
            config,
            param,
            values,
            csv,
            json,
        } => {
            let cfg = load_config(&config)?;
            let table = sweep(&cfg, param, &values).with_context(|| format!("{param} sweep"))?;
            if let Some(p) = &json {
                report::write_file(p, &table.to_json()?)?;
            }
            match &csv {
                Some(p) => report::write_file(p, &table.to_csv()?)?,
                None if json.is_none() => print!("{}", table.to_csv()?),
                None => {}
            }
            Ok(EXIT_PASS)
        }
        Command::ListScenarios => list_scenarios().map(|_| EXIT_PASS),
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
