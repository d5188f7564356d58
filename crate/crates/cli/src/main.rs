//! `lumen` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical abort.
//! `LUMEN_THREADS` sets the size of the worker pool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lumen_core::branching::enumerate_branches;
use lumen_core::driver::analyze::{analyze, Query};
use lumen_core::driver::config::RunConfig;
use lumen_core::driver::record::TrajectoryRecord;
use lumen_core::driver::{Checkpoint, Simulation};
use lumen_core::oracles::report;
use lumen_core::units::AU_PER_FS;
use lumen_core::{Error, Result};

const THREADS_VAR: &str = "LUMEN_THREADS";

#[derive(Parser)]
#[command(name = "lumen", version, about = "Laser-driven electron-nuclear dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a TOML configuration.
    Run {
        config: PathBuf,
        /// Override the record path from the configuration.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Summarize a trajectory record; queries: populations, gaps,
    /// absorbed-energy, branches, norms, rabi-period.
    Analyze {
        record: PathBuf,
        queries: Vec<String>,
    },
    /// List branch events and their candidate branches.
    Branches { record: PathBuf },
    /// Continue from a checkpoint, following branch `i` of its pending event.
    Resume {
        checkpoint: PathBuf,
        #[arg(long)]
        branch: Option<usize>,
        /// Record path (default: next to the checkpoint).
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Compare oracle values against the model for a configuration.
    Oracle {
        fixture: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::config(THREADS_VAR, format!("expected a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config(THREADS_VAR, e.to_string()))
}

fn existing(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::config(what, format!("{} does not exist", path.display())))
    }
}

fn print_record_summary(rec: &TrajectoryRecord) {
    let last = rec.frames.last();
    println!(
        "frames {}  events {}  t_end {:.3} fs  status {}",
        rec.frames.len(),
        rec.events.len(),
        last.map_or(0.0, |f| f.t / AU_PER_FS),
        rec.footer.as_ref().map_or("incomplete", |f| f.status.as_str()),
    );
    if let Some(f) = last {
        println!("bound norm {:.9}  E_total {:.9} Eh", f.bound_norm, f.e_total);
    }
}

fn cmd_run(config: &Path, record: Option<PathBuf>) -> Result<()> {
    existing(config, "config")?;
    let mut cfg = RunConfig::load(config)?;
    if record.is_some() {
        cfg.output.record = record;
    }
    let rec = lumen_core::driver::run(cfg)?;
    print_record_summary(&rec);
    Ok(())
}

fn cmd_analyze(record: &Path, queries: &[String]) -> Result<()> {
    existing(record, "record")?;
    let rec = TrajectoryRecord::read(record)?;
    let queries = queries.iter().map(|q| q.parse()).collect::<Result<Vec<Query>>>()?;
    print!("{}", analyze(&rec, &queries)?.to_text());
    Ok(())
}

fn cmd_branches(record: &Path) -> Result<()> {
    existing(record, "record")?;
    let rec = TrajectoryRecord::read(record)?;
    let threshold = rec.header.config.branching.threshold;
    if rec.events.is_empty() {
        println!("no branch events");
        return Ok(());
    }
    println!("event  t/fs        trigger               chosen  branches (state:population)  checkpoint");
    for e in &rec.events {
        let ev = &e.event;
        let branches: Vec<String> = enumerate_branches(ev, threshold)
            .into_iter()
            .map(|(i, p)| format!("{i}:{p:.4}"))
            .collect();
        println!(
            "{:<6} {:<11.4} {:<21} {:<7} {:<28} {}",
            ev.index,
            ev.t / AU_PER_FS,
            format!("{:?}", ev.trigger),
            ev.chosen,
            branches.join(" "),
            e.checkpoint.as_deref().unwrap_or("-"),
        );
    }
    Ok(())
}

fn cmd_resume(checkpoint: &Path, branch: Option<usize>, record: Option<PathBuf>) -> Result<()> {
    existing(checkpoint, "checkpoint")?;
    let cp = Checkpoint::load(checkpoint)?;
    let out = record.unwrap_or_else(|| {
        let tag = branch.map_or("resumed".to_string(), |b| format!("branch{b}"));
        checkpoint.with_extension(format!("{tag}.rec"))
    });
    let (mut sim, entry) = Simulation::resume(cp, branch, Some(checkpoint.display().to_string()))?;
    let rec = sim.run_to_record(entry, Some(&out))?;
    println!("record written to {}", out.display());
    print_record_summary(&rec);
    Ok(())
}

fn cmd_oracle(fixture: &Path, tol: f64) -> Result<()> {
    existing(fixture, "fixture")?;
    let cfg = RunConfig::load(fixture)?;
    let rows = report::report(&cfg, tol)?;
    print!("{}", report::to_text(&rows));
    let bad = rows.iter().filter(|r| !r.agrees()).count();
    println!("{} rows, {} outside tolerance", rows.len(), bad);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| match cli.command {
        Command::Run { config, record } => cmd_run(&config, record),
        Command::Analyze { record, queries } => cmd_analyze(&record, &queries),
        Command::Branches { record } => cmd_branches(&record),
        Command::Resume { checkpoint, branch, record } => cmd_resume(&checkpoint, branch, record),
        Command::Oracle { fixture, tol } => cmd_oracle(&fixture, tol),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
