//! The campaign loop: schedule, generate, execute, classify, admit,
//! triage, repeat until the budget runs out.
//!
//! Ordering contract per execution: the case snapshot is classified
//! against the cumulative table (that verdict drives admission), then
//! folded in with `union_into`, and only then is any anomaly triaged. The
//! anomaly therefore carries an empty novel set inside a campaign, which
//! keeps dedup keys stable no matter which input of a bug arrived first.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use covmap::{classify, union_into, CoverageSnapshot, CumulativeTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use sqlgen::{generate, harvest_fragments, split_statements, Dictionary, FragmentPool, MixWeights};

use crate::analyze::{Analyzer, AnomalyEvent, AnomalyKind};
use crate::config::Config;
use crate::corpus::Corpus;
use crate::error::FuzzError;
use crate::target::{covered_set, CaseStatus, Session, TargetSpec};

pub const STATS_HEADER: &str = "elapsed_s,executions,covered_blocks,paths,corpus,anomalies";
pub const STATS_FILE: &str = "stats.csv";
pub const COVERAGE_FILE: &str = "coverage.txt";
const STATS_FLUSH_EVERY: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Default)]
pub struct FuzzOptions {
    pub session: Option<String>,
    /// Execute the seeds once each, mutate nothing, report coverage.
    pub dry_run: bool,
    /// Blackbox ablation: coverage is still measured for reporting, but
    /// nothing is admitted and no fragments are harvested, so the corpus
    /// stays exactly the seeds.
    pub no_feedback: bool,
}

#[derive(Debug, Clone)]
pub struct CampaignSummary {
    pub session: String,
    pub session_dir: PathBuf,
    pub executions: u64,
    pub covered_blocks: usize,
    pub path_count: usize,
    pub corpus_size: usize,
    pub anomalies: u64,
    pub elapsed: Duration,
}

pub fn epoch_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn fresh_session_name() -> String {
    use std::sync::atomic::{AtomicU64, Ordering};
    static SEQ: AtomicU64 = AtomicU64::new(0);
    format!("run-{}-{}-{}", epoch_secs(), std::process::id(), SEQ.fetch_add(1, Ordering::Relaxed))
}

/// Seed corpus from a directory of `*.sql` files, in filename order.
pub fn load_seeds(dir: &Path) -> Result<Vec<(String, Vec<String>)>, FuzzError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sql"))
        .collect();
    files.sort();
    let mut seeds = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path)?;
        let statements = split_statements(&text);
        if statements.is_empty() {
            continue;
        }
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        seeds.push((format!("seed-{stem}"), statements));
    }
    if seeds.is_empty() {
        return Err(FuzzError::config(dir, 0, "no usable seeds"));
    }
    Ok(seeds)
}

/// Dialect dictionary from the file alone. The generator's grammar
/// keywords are deliberately not merged in: the dictionary's job is the
/// dialect surface (procedures, magic literals, type names), while clause
/// structure is the tree mutator's job.
pub fn load_dictionary(path: &Path) -> Result<Dictionary, FuzzError> {
    let text = std::fs::read_to_string(path)?;
    let mut dict = Dictionary::default();
    dict.load_entries(&text)?;
    if dict.is_empty() {
        return Err(FuzzError::config(path, 0, "dictionary has no entries"));
    }
    Ok(dict)
}

struct Driver {
    cfg: Config,
    opts: FuzzOptions,
    session: Session,
    corpus: Corpus,
    pool: FragmentPool,
    dict: Dictionary,
    cumulative: CumulativeTable,
    paths: HashSet<[u8; 32]>,
    analyzer: Analyzer,
    rng: ChaCha8Rng,
    executions: u64,
    anomalies: u64,
    started: Instant,
    stats_out: std::fs::File,
    last_flush: Instant,
}

pub fn run_campaign(cfg: &Config, opts: FuzzOptions) -> Result<CampaignSummary, FuzzError> {
    let layout_text = std::fs::read_to_string(&cfg.layout)?;
    let layout = blockplan::parse_layout(&layout_text)?;
    blockplan::verify_layout(&layout)?;

    let session_name = opts.session.clone().unwrap_or_else(fresh_session_name);
    let session_dir = cfg.reports.join(&session_name);
    let analyzer = Analyzer::new(session_dir.clone(), layout.clone())?;

    let seeds = load_seeds(&cfg.seeds)?;
    let dict = load_dictionary(&cfg.dict)?;
    let mut corpus = Corpus::new(cfg.base_energy);
    let mut pool = FragmentPool::default();
    for (id, statements) in &seeds {
        corpus.push_seed(id.clone(), statements.clone());
        if !opts.no_feedback {
            pool.insert_all(harvest_fragments(statements, true));
        }
    }

    let session = Session::create(TargetSpec::from_config(cfg), &layout)?;
    let cumulative = CumulativeTable::new(layout.total_length as usize);

    std::fs::create_dir_all(&session_dir)?;
    let mut stats_out = std::fs::File::create(session_dir.join(STATS_FILE))?;
    writeln!(stats_out, "{STATS_HEADER}")?;

    let mut driver = Driver {
        rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
        cfg: cfg.clone(),
        opts,
        session,
        corpus,
        pool,
        dict,
        cumulative,
        paths: HashSet::new(),
        analyzer,
        executions: 0,
        anomalies: 0,
        started: Instant::now(),
        stats_out,
        last_flush: Instant::now(),
    };
    let result = driver.run(session_name, session_dir);
    driver.session.shutdown();
    result
}

impl Driver {
    fn run(&mut self, session_name: String, session_dir: PathBuf) -> Result<CampaignSummary, FuzzError> {
        self.relaunch()?;
        self.write_stats_row()?;

        if self.opts.dry_run {
            let seeds: Vec<_> = self.corpus.iter().cloned().collect();
            for entry in seeds {
                self.execute_case(entry.statements.clone(), false)?;
            }
        } else {
            let mix = MixWeights {
                ast_mutation: self.cfg.ast_weight,
                dictionary_mutation: self.cfg.dict_weight,
            };
            while self.started.elapsed().as_secs() < self.cfg.budget_secs
                && self.executions < self.cfg.exec_budget
            {
                let parent = self.corpus.pick_next();
                let gen_seed = self.rng.gen::<u64>();
                let case =
                    generate(&parent.script(), &parent.id, mix, &self.pool, &self.dict, gen_seed)?;
                self.execute_case(case.statements, !self.opts.no_feedback)?;
                if self.executions % self.cfg.drop_interval == 0 {
                    let timeout = Duration::from_millis(self.cfg.stmt_timeout_ms);
                    if self.session.drop_database(timeout).is_err() {
                        self.relaunch()?;
                    } else {
                        self.absorb_ambient()?;
                    }
                }
                if self.last_flush.elapsed() >= STATS_FLUSH_EVERY {
                    self.write_stats_row()?;
                }
            }
        }

        self.analyzer.flush()?;
        self.write_stats_row()?;
        self.write_coverage_file(&session_dir)?;
        Ok(CampaignSummary {
            session: session_name,
            session_dir,
            executions: self.executions,
            covered_blocks: self.cumulative.covered_blocks(),
            path_count: self.paths.len(),
            corpus_size: self.corpus.len(),
            anomalies: self.anomalies,
            elapsed: self.started.elapsed(),
        })
    }

    /// Run one case and do all per-execution accounting.
    fn execute_case(&mut self, statements: Vec<String>, feedback: bool) -> Result<(), FuzzError> {
        let stmt_timeout = Duration::from_millis(self.cfg.stmt_timeout_ms);
        let case_timeout = Duration::from_millis(self.cfg.case_timeout_ms);
        let outcome = self.session.run_case(&statements, stmt_timeout, case_timeout);
        self.executions += 1;

        let report = classify(&outcome.snapshot, &self.cumulative)?;
        union_into(&mut self.cumulative, &outcome.snapshot)?;
        self.paths.insert(path_digest(&outcome.snapshot));

        let admissible = match &outcome.status {
            CaseStatus::Ok => true,
            // a crashing case is kept only when it found new ground
            CaseStatus::Crash { .. } => report.is_interesting(),
            // stalls and bare disconnects are never worth mutating further
            CaseStatus::Timeout { .. } | CaseStatus::ConnectionLost => false,
        };
        if feedback && admissible && report.is_interesting() {
            self.corpus.admit(
                format!("case-{}", self.executions),
                statements.clone(),
                covered_set(&outcome.snapshot.counters),
                self.executions,
            );
        }
        if feedback {
            self.pool
                .insert_all(harvest_fragments(&statements, report.is_interesting()));
        }

        if outcome.status.is_anomaly() {
            self.anomalies += 1;
            let event = self.build_event(&outcome.status, &outcome.snapshot, outcome.log_tail, statements)?;
            self.analyzer.triage(event)?;
        }
        if !matches!(outcome.status, CaseStatus::Ok) {
            self.relaunch()?;
        }
        Ok(())
    }

    fn build_event(
        &mut self,
        status: &CaseStatus,
        snapshot: &CoverageSnapshot,
        log_tail: Vec<u8>,
        statements: Vec<String>,
    ) -> Result<AnomalyEvent, FuzzError> {
        // the case is already folded in, so this is empty during a
        // campaign; replay harnesses call the analyzer with a fresh table
        // and get the full covered set instead
        let novel: BTreeSet<u64> = classify(snapshot, &self.cumulative)?.new_blocks.into_iter().collect();
        let (binary_id, process_id, kind, frames, detail, sp) = match status {
            CaseStatus::Crash { binary, pid, signal, frames, detail, sp } => (
                binary.clone(),
                *pid,
                AnomalyKind::Crash { signal: signal.clone() },
                frames.clone(),
                detail.clone(),
                sp.clone(),
            ),
            CaseStatus::Timeout { binary, pid, detail } => (
                binary.clone(),
                *pid,
                AnomalyKind::Timeout,
                Vec::new(),
                detail.clone(),
                String::new(),
            ),
            _ => unreachable!("only anomalies build events"),
        };
        Ok(AnomalyEvent {
            binary_id,
            process_id,
            kind,
            frames,
            detail,
            sp,
            coverage: snapshot.counters.clone(),
            novel,
            log_tail,
            statements,
            occurred_at: epoch_secs(),
        })
    }

    /// (Re)launch the target, tolerating up to `restart_limit` consecutive
    /// failures, and fold the boot coverage in so it is never mistaken for
    /// novelty of the next case.
    fn relaunch(&mut self) -> Result<(), FuzzError> {
        let mut failures = 0u32;
        loop {
            match self.session.launch() {
                Ok(()) => {
                    self.absorb_ambient()?;
                    return Ok(());
                }
                Err(e) => {
                    failures += 1;
                    if failures >= self.cfg.restart_limit {
                        return Err(FuzzError::Target(format!(
                            "{failures} consecutive launch failures, last: {e}"
                        )));
                    }
                }
            }
        }
    }

    /// Fold coverage produced outside any case (boot, database drops) into
    /// the cumulative table without counting an execution or a path.
    fn absorb_ambient(&mut self) -> Result<(), FuzzError> {
        let snap = self.session.region().snapshot();
        union_into(&mut self.cumulative, &snap)?;
        self.session.region().reset();
        Ok(())
    }

    fn write_stats_row(&mut self) -> Result<(), FuzzError> {
        let row = format!(
            "{},{},{},{},{},{}",
            self.started.elapsed().as_secs(),
            self.executions,
            self.cumulative.covered_blocks(),
            self.paths.len(),
            self.corpus.len(),
            self.anomalies
        );
        writeln!(self.stats_out, "{row}")?;
        self.stats_out.flush()?;
        self.last_flush = Instant::now();
        Ok(())
    }

    fn write_coverage_file(&self, session_dir: &Path) -> Result<(), FuzzError> {
        let mut text = String::new();
        for (i, &b) in self.cumulative.buckets.iter().enumerate() {
            if b > 0 {
                text.push_str(&format!("{i}\n"));
            }
        }
        std::fs::write(session_dir.join(COVERAGE_FILE), text)?;
        Ok(())
    }
}

/// Identity of a case's covered-block set, for distinct-path counting.
fn path_digest(snapshot: &CoverageSnapshot) -> [u8; 32] {
    let mut h = Sha256::new();
    for idx in covered_set(&snapshot.counters) {
        h.update(idx.to_le_bytes());
    }
    h.finalize().into()
}
