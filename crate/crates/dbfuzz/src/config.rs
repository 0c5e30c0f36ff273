//! Campaign configuration: a versioned, line-oriented key=value file.
//!
//! Relative paths are resolved against the config file's directory, so a
//! config can travel with its layout, seeds and dictionary. Every
//! referenced file must exist at load time; a campaign that would die an
//! hour in because of a typo should die at startup instead.

use std::path::{Path, PathBuf};

use crate::error::FuzzError;

#[derive(Debug, Clone)]
pub struct Config {
    /// Planned global layout file (output of `dbfuzz plan`).
    pub layout: PathBuf,
    /// Directory holding the target executables.
    pub bindir: PathBuf,
    /// Executable names in spawn order, dependency-first. Each must match
    /// a window of the layout; the first entry is the deepest dependency,
    /// the last is the one the client socket belongs to.
    pub binaries: Vec<String>,
    /// Socket filename (inside the per-run socket dir) the client dials.
    pub client_sock: String,
    /// Directory of `*.sql` seed files.
    pub seeds: PathBuf,
    /// Dialect dictionary file, one token per line.
    pub dict: PathBuf,
    /// Root directory for per-session reports.
    pub reports: PathBuf,
    pub budget_secs: u64,
    pub exec_budget: u64,
    pub stmt_timeout_ms: u64,
    pub case_timeout_ms: u64,
    /// Database dropped every this many executions.
    pub drop_interval: u64,
    pub base_energy: u32,
    pub ast_weight: f64,
    pub dict_weight: f64,
    /// Consecutive failed target launches tolerated before giving up.
    pub restart_limit: u32,
    pub rng_seed: u64,
}

pub const CONFIG_VERSION: u64 = 1;

impl Config {
    pub fn load(path: &Path) -> Result<Config, FuzzError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FuzzError::config(path, 0, format!("cannot read: {e}")))?;
        Config::parse(path, &text)
    }

    fn parse(path: &Path, text: &str) -> Result<Config, FuzzError> {
        let err = |line: usize, msg: String| FuzzError::config(path, line, msg);
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |raw: &str| -> PathBuf {
            let p = Path::new(raw);
            if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
        };

        let mut version: Option<u64> = None;
        let mut layout = None;
        let mut bindir = None;
        let mut binaries: Option<Vec<String>> = None;
        let mut client_sock = "gw.sock".to_string();
        let mut seeds = None;
        let mut dict = None;
        let mut reports = None;
        let mut budget_secs = 600u64;
        let mut exec_budget = 200_000u64;
        let mut stmt_timeout_ms = 1_000u64;
        let mut case_timeout_ms = 10_000u64;
        let mut drop_interval = 512u64;
        let mut base_energy = 8u32;
        let mut ast_weight = 0.7f64;
        let mut dict_weight = 0.3f64;
        let mut restart_limit = 5u32;
        let mut rng_seed = 1u64;

        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(n, format!("`{line}` is not key=value")));
            };
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| v.parse::<u64>().map_err(|_| err(n, format!("{key}: `{v}` is not an integer")));
            let float = |v: &str| v.parse::<f64>().map_err(|_| err(n, format!("{key}: `{v}` is not a number")));
            match key {
                "version" => version = Some(int(value)?),
                "layout" => layout = Some(resolve(value)),
                "bindir" => bindir = Some(resolve(value)),
                "binaries" => {
                    let list: Vec<String> =
                        value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                    binaries = Some(list);
                }
                "client_sock" => client_sock = value.to_string(),
                "seeds" => seeds = Some(resolve(value)),
                "dict" => dict = Some(resolve(value)),
                "reports" => reports = Some(resolve(value)),
                "budget_secs" => budget_secs = int(value)?,
                "exec_budget" => exec_budget = int(value)?,
                "stmt_timeout_ms" => stmt_timeout_ms = int(value)?,
                "case_timeout_ms" => case_timeout_ms = int(value)?,
                "drop_interval" => drop_interval = int(value)?,
                "base_energy" => base_energy = int(value)? as u32,
                "ast_weight" => ast_weight = float(value)?,
                "dict_weight" => dict_weight = float(value)?,
                "restart_limit" => restart_limit = int(value)? as u32,
                "rng_seed" => rng_seed = int(value)?,
                other => return Err(err(n, format!("unknown key `{other}`"))),
            }
        }

        match version {
            None => return Err(err(0, "missing `version=` line".into())),
            Some(v) if v != CONFIG_VERSION => {
                return Err(err(0, format!("unsupported version {v}, expected {CONFIG_VERSION}")));
            }
            Some(_) => {}
        }
        let require = |name: &str, v: Option<PathBuf>| v.ok_or_else(|| err(0, format!("missing `{name}=`")));
        let layout = require("layout", layout)?;
        let bindir = require("bindir", bindir)?;
        let seeds = require("seeds", seeds)?;
        let dict = require("dict", dict)?;
        let reports = require("reports", reports)?;
        let binaries = binaries.ok_or_else(|| err(0, "missing `binaries=`".into()))?;

        let cfg = Config {
            layout,
            bindir,
            binaries,
            client_sock,
            seeds,
            dict,
            reports,
            budget_secs,
            exec_budget,
            stmt_timeout_ms,
            case_timeout_ms,
            drop_interval,
            base_energy,
            ast_weight,
            dict_weight,
            restart_limit,
            rng_seed,
        };
        cfg.validate(path)?;
        Ok(cfg)
    }

    fn validate(&self, path: &Path) -> Result<(), FuzzError> {
        let err = |msg: String| FuzzError::config(path, 0, msg);
        if !self.layout.is_file() {
            return Err(err(format!("layout file {} does not exist", self.layout.display())));
        }
        if !self.bindir.is_dir() {
            return Err(err(format!("bindir {} is not a directory", self.bindir.display())));
        }
        if self.binaries.is_empty() {
            return Err(err("binaries list is empty".into()));
        }
        for b in &self.binaries {
            let exe = self.bindir.join(b);
            if !exe.is_file() {
                return Err(err(format!("target executable {} does not exist", exe.display())));
            }
        }
        if self.client_sock.is_empty() {
            return Err(err("client_sock is empty".into()));
        }
        if !self.seeds.is_dir() {
            return Err(err(format!("seeds dir {} does not exist", self.seeds.display())));
        }
        if !self.dict.is_file() {
            return Err(err(format!("dictionary {} does not exist", self.dict.display())));
        }
        if self.budget_secs == 0 || self.exec_budget == 0 {
            return Err(err("budgets must be positive".into()));
        }
        if self.stmt_timeout_ms == 0 || self.case_timeout_ms == 0 {
            return Err(err("timeouts must be positive".into()));
        }
        if self.drop_interval == 0 {
            return Err(err("drop_interval must be positive".into()));
        }
        if self.base_energy == 0 {
            return Err(err("base_energy must be at least 1".into()));
        }
        if self.restart_limit == 0 {
            return Err(err("restart_limit must be at least 1".into()));
        }
        let finite = self.ast_weight.is_finite() && self.dict_weight.is_finite();
        if !finite || self.ast_weight < 0.0 || self.dict_weight < 0.0 || self.ast_weight + self.dict_weight <= 0.0 {
            return Err(err("strategy weights must be nonnegative and not all zero".into()));
        }
        Ok(())
    }
}
