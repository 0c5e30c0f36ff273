//! `dbfuzz` command surface.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 planning or data
//! handling, 3 target failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dbfuzz::analyze::REGISTRY_FILE;
use dbfuzz::config::Config;
use dbfuzz::error::FuzzError;
use dbfuzz::fuzz::{run_campaign, FuzzOptions, COVERAGE_FILE};
use dbfuzz::replay::replay_bundle;

#[derive(Parser)]
#[command(name = "dbfuzz", about = "Coverage-guided fuzzer for multi-process SQL targets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Plan counter assignments from CFG manifests and write the linked
    /// global layout.
    Plan {
        /// CFG manifest file, one per target binary (repeatable).
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        /// Output layout file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a fuzzing campaign.
    Fuzz {
        #[arg(long)]
        config: PathBuf,
        /// Session name under the reports dir (default: generated).
        #[arg(long)]
        session: Option<String>,
        /// Execute the seeds once each and report coverage; no mutation.
        #[arg(long)]
        dry_run: bool,
        /// Blackbox ablation: no admission, no fragment harvesting.
        #[arg(long)]
        no_feedback: bool,
        /// Override the config's time budget.
        #[arg(long)]
        budget_secs: Option<u64>,
        /// Override the config's execution budget.
        #[arg(long)]
        exec_budget: Option<u64>,
        /// Override the config's generator seed.
        #[arg(long)]
        rng_seed: Option<u64>,
    },
    /// Summarize the bundles of a campaign session.
    Triage {
        /// A `reports/<session>` directory.
        #[arg(long)]
        session_dir: PathBuf,
    },
    /// Re-send a bundle's input to a freshly launched target.
    Replay {
        #[arg(long)]
        config: PathBuf,
        /// Bundle directory (holding input.sql and termination.log).
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 1)]
        times: u32,
        /// Session name for the replay's own reports.
        #[arg(long)]
        session: Option<String>,
    },
    /// Summarize a campaign stats file.
    Stats {
        /// A stats.csv written by `fuzz`.
        #[arg(long)]
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap help/version are success paths
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dbfuzz: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), FuzzError> {
    match cli.cmd {
        Cmd::Plan { manifests, out } => cmd_plan(&manifests, &out),
        Cmd::Fuzz { config, session, dry_run, no_feedback, budget_secs, exec_budget, rng_seed } => {
            let mut cfg = Config::load(&config)?;
            if let Some(b) = budget_secs {
                cfg.budget_secs = b;
            }
            if let Some(b) = exec_budget {
                cfg.exec_budget = b;
            }
            if let Some(s) = rng_seed {
                cfg.rng_seed = s;
            }
            cmd_fuzz(&cfg, FuzzOptions { session, dry_run, no_feedback })
        }
        Cmd::Triage { session_dir } => cmd_triage(&session_dir),
        Cmd::Replay { config, bundle, times, session } => {
            let cfg = Config::load(&config)?;
            cmd_replay(&cfg, &bundle, times, session)
        }
        Cmd::Stats { file } => cmd_stats(&file),
    }
}

/// Split, assign, link: deterministic, so rerunning on the same manifests
/// reproduces the layout byte for byte.
fn cmd_plan(manifests: &[PathBuf], out: &Path) -> Result<(), FuzzError> {
    let mut parsed = Vec::new();
    for path in manifests {
        let text = std::fs::read_to_string(path)?;
        parsed.push(blockplan::parse_manifest(&text)?);
    }
    let (assignments, layout) = blockplan::plan_all(&parsed)?;
    std::fs::write(out, blockplan::render_layout(&layout))?;
    for a in &assignments {
        println!("{} {} counters", a.binary_id, a.len());
    }
    println!("total {} counters in {} windows", layout.total_length, layout.entries.len());
    Ok(())
}

fn cmd_fuzz(cfg: &Config, opts: FuzzOptions) -> Result<(), FuzzError> {
    let summary = run_campaign(cfg, opts)?;
    println!(
        "session {} finished: executions {} covered_blocks {} paths {} corpus {} anomalies {} elapsed_s {}",
        summary.session,
        summary.executions,
        summary.covered_blocks,
        summary.path_count,
        summary.corpus_size,
        summary.anomalies,
        summary.elapsed.as_secs()
    );
    println!("reports: {}", summary.session_dir.display());
    println!("coverage: {}", summary.session_dir.join(COVERAGE_FILE).display());
    Ok(())
}

fn cmd_triage(session_dir: &Path) -> Result<(), FuzzError> {
    let registry = dbfuzz::analyze::Registry::load(session_dir.join(REGISTRY_FILE))?;
    let keys = registry.keys();
    if keys.is_empty() {
        println!("no anomalies recorded in {}", session_dir.display());
        return Ok(());
    }
    for key in keys {
        let log = std::fs::read_to_string(session_dir.join(&key).join("termination.log"))
            .unwrap_or_default();
        let field = |name: &str| {
            dbfuzz::analyze::termination_field(&log, name).unwrap_or_else(|| "?".to_string())
        };
        println!(
            "{}  count {:>4}  signal {:<8}  binary {:<16}  top {}",
            &key[..16.min(key.len())],
            registry.count(&key),
            field("anomaly"),
            field("binary"),
            field("top_frame"),
        );
    }
    Ok(())
}

fn cmd_replay(cfg: &Config, bundle: &Path, times: u32, session: Option<String>) -> Result<(), FuzzError> {
    let report = replay_bundle(cfg, bundle, times, session)?;
    for a in &report.attempts {
        println!(
            "attempt {:>3}: {}{}",
            a.attempt,
            a.outcome,
            if a.stack_match { " (stack match)" } else { "" }
        );
    }
    println!(
        "reproduced {}/{} from {}",
        report.reproduced,
        report.attempts.len(),
        report.bundle.display()
    );
    println!("replay reports: {}", report.session_dir.display());
    Ok(())
}

fn cmd_stats(file: &Path) -> Result<(), FuzzError> {
    let text = std::fs::read_to_string(file)?;
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        return Err(FuzzError::Target(format!("{} is empty", file.display())));
    };
    if header != dbfuzz::fuzz::STATS_HEADER {
        return Err(FuzzError::Target(format!("{} is not a stats file", file.display())));
    }
    let rows: Vec<Vec<u64>> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|f| f.parse().unwrap_or(0)).collect())
        .collect();
    let Some(last) = rows.last() else {
        println!("{}: no data rows", file.display());
        return Ok(());
    };
    println!("rows {}", rows.len());
    println!("elapsed_s {}", last[0]);
    println!("executions {}", last[1]);
    println!("covered_blocks {}", last[2]);
    println!("paths {}", last[3]);
    println!("corpus {}", last[4]);
    println!("anomalies {}", last[5]);
    if rows.len() >= 2 {
        let first = &rows[0];
        println!("coverage growth {} -> {}", first[2], last[2]);
    }
    // name the related artifact so operators find the covered-set dump
    let coverage = file.parent().map(|d| d.join(COVERAGE_FILE));
    if let Some(c) = coverage.filter(|c| c.is_file()) {
        println!("covered set: {}", c.display());
    }
    Ok(())
}
