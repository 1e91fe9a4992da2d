//! Monte Carlo replication engine and rejection-rate tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{BootstrapScheme, DEFAULT_B};
use crate::derivative::DerivKind;
use crate::error::{at_path, validation, Error, Result};
use crate::inference::{ChTestOptions, ChTestSession, KappaRule};
use crate::rng::{name_id, replication_seed, stream_rng};
use crate::simulate::{simulate_ch_panel, DesignSpec};

/// Dimensions of a Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub design: DesignSpec,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    pub b: usize,
    pub alpha: f64,
    pub kappa_rules: Vec<KappaRule>,
    pub est_kinds: Vec<DerivKind>,
    pub base_seed: u64,
    pub workers: usize,
    #[serde(default)]
    pub scheme: BootstrapScheme,
    /// Replaces every instrument with this constant, giving `θ̂ ≡ 0`.
    #[serde(default)]
    pub constant_instruments: Option<f64>,
    /// Grid resolution behind `Γ̂_T`; `None` uses the default for `k`.
    #[serde(default)]
    pub set_resolution: Option<usize>,
}

impl McConfig {
    /// Desk-scale defaults for a design: 500 replications, `B = 200`,
    /// `α = 0.05`, every preset rule, structural estimator.
    pub fn new(design: DesignSpec, sample_sizes: Vec<usize>) -> Self {
        Self {
            design,
            sample_sizes,
            reps: 500,
            b: DEFAULT_B,
            alpha: 0.05,
            kappa_rules: KappaRule::PRESETS.to_vec(),
            est_kinds: vec![DerivKind::StructuralCh],
            base_seed: 20240101,
            workers: 1,
            scheme: BootstrapScheme::Iid,
            constant_instruments: None,
            set_resolution: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.reps == 0 {
            return validation("reps must be >= 1");
        }
        if self.b == 0 {
            return validation("b must be >= 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return validation(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&t| t < 2) {
            return validation("sample_sizes must be nonempty with every T >= 2");
        }
        if self.kappa_rules.is_empty() || self.est_kinds.is_empty() {
            return validation("kappa_rules and est_kinds must be nonempty");
        }
        for r in &self.kappa_rules {
            r.validate()?;
        }
        if let Some(k) = self
            .est_kinds
            .iter()
            .find(|k| !matches!(k, DerivKind::StructuralCh | DerivKind::Numerical))
        {
            return validation(format!("estimator {k} does not apply to the common-feature test"));
        }
        if self.workers == 0 {
            return validation("workers must be >= 1");
        }
        Ok(())
    }

    /// Applies `key=value` lines (blank lines and `#` comments ignored) on
    /// top of `self`. Keys mirror the field names; `design` takes a preset
    /// name and list values are comma separated.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got '{line}'", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Parse(format!("bad value '{v}' for {key}")))
        }
        fn list<T, F: Fn(&str) -> Result<T>>(v: &str, f: F) -> Result<Vec<T>> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
        }
        match key {
            "design" => self.design = DesignSpec::preset(value)?,
            "sample_sizes" => self.sample_sizes = list(value, |s| num(key, s))?,
            "reps" => self.reps = num(key, value)?,
            "b" => self.b = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "kappa_rules" => self.kappa_rules = list(value, str::parse)?,
            "est_kinds" => self.est_kinds = list(value, str::parse)?,
            "base_seed" => self.base_seed = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "scheme" => self.scheme = value.parse()?,
            "set_resolution" => self.set_resolution = Some(num(key, value)?),
            "constant_instruments" => self.constant_instruments = Some(num(key, value)?),
            other => return Err(Error::Parse(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// The resolved configuration as `key=value` lines.
    pub fn to_kv_lines(&self) -> Vec<String> {
        let join = |v: Vec<String>| v.join(",");
        let mut out = vec![
            format!("design={}", self.design.name),
            format!("sample_sizes={}", join(self.sample_sizes.iter().map(|t| t.to_string()).collect())),
            format!("reps={}", self.reps),
            format!("b={}", self.b),
            format!("alpha={}", self.alpha),
            format!("kappa_rules={}", join(self.kappa_rules.iter().map(|r| r.to_string()).collect())),
            format!("est_kinds={}", join(self.est_kinds.iter().map(|k| k.to_string()).collect())),
            format!("base_seed={}", self.base_seed),
            format!("workers={}", self.workers),
            format!("scheme={}", self.scheme),
        ];
        if let Some(r) = self.set_resolution {
            out.push(format!("set_resolution={r}"));
        }
        if let Some(c) = self.constant_instruments {
            out.push(format!("constant_instruments={c}"));
        }
        out
    }
}

/// One cell of a rejection-rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub design: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub rule: String,
    pub estimator: String,
    pub reps: usize,
    pub b: usize,
    pub alpha: f64,
    pub reject_rate: f64,
    pub mc_se: f64,
}

/// `sqrt(r (1 − r) / reps)`.
pub fn mc_std_err(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

/// Rejection rates keyed by `(T, rule, estimator)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct McTable {
    pub rows: Vec<McRow>,
}

impl McTable {
    pub fn get(&self, t: usize, rule: KappaRule, kind: DerivKind) -> Option<&McRow> {
        let (r, k) = (rule.to_string(), kind.to_string());
        self.rows.iter().find(|row| row.t == t && row.rule == r && row.estimator == k)
    }
}

/// Rejections of one replication, ordered by (rule, estimator).
fn run_replication(config: &McConfig, t: usize, seed: u64) -> Result<Vec<bool>> {
    let mut rng = stream_rng(seed, 0);
    let mut panel = simulate_ch_panel(&config.design, t, &mut rng)?;
    if let Some(c) = config.constant_instruments {
        panel = panel.with_constant_instruments(c);
    }
    let opts = ChTestOptions {
        set_resolution: config.set_resolution,
        ..Default::default()
    };
    let session = ChTestSession::new(&panel, config.b, config.scheme, &mut rng, opts)?;
    let mut out = Vec::with_capacity(config.kappa_rules.len() * config.est_kinds.len());
    for &rule in &config.kappa_rules {
        for &kind in &config.est_kinds {
            out.push(session.outcome(rule, kind, config.alpha)?.reject);
        }
    }
    Ok(out)
}

fn with_context(e: Error, t: usize, rep: usize, seed: u64) -> Error {
    let ctx = format!("replication {rep} (T = {t}, seed = {seed}) failed: ");
    match e {
        Error::Validation(m) => Error::Validation(ctx + &m),
        Error::Parse(m) => Error::Parse(ctx + &m),
        Error::Numerical(m) => Error::Numerical(ctx + &m),
        other => Error::Numerical(ctx + &other.to_string()),
    }
}

/// Runs every replication of the study on `config.workers` threads. The
/// table does not depend on the number of workers.
pub fn run_design(config: &McConfig) -> Result<McTable> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    let design_id = name_id(&config.design.name);
    let cells = config.kappa_rules.len() * config.est_kinds.len();
    let mut rows = Vec::with_capacity(config.sample_sizes.len() * cells);
    for &t in &config.sample_sizes {
        let results: Vec<(u64, Result<Vec<bool>>)> = pool.install(|| {
            (0..config.reps)
                .into_par_iter()
                .map(|rep| {
                    let seed = replication_seed(config.base_seed, design_id, t as u64, rep as u64);
                    (seed, run_replication(config, t, seed))
                })
                .collect()
        });
        let mut counts = vec![0usize; cells];
        for (rep, (seed, r)) in results.into_iter().enumerate() {
            let rejects = r.map_err(|e| with_context(e, t, rep, seed))?;
            for (c, rej) in counts.iter_mut().zip(rejects) {
                *c += usize::from(rej);
            }
        }
        let mut cell = 0;
        for &rule in &config.kappa_rules {
            for &kind in &config.est_kinds {
                let rate = counts[cell] as f64 / config.reps as f64;
                rows.push(McRow {
                    design: config.design.name.clone(),
                    t,
                    rule: rule.to_string(),
                    estimator: kind.to_string(),
                    reps: config.reps,
                    b: config.b,
                    alpha: config.alpha,
                    reject_rate: rate,
                    mc_se: mc_std_err(rate, config.reps),
                });
                cell += 1;
            }
        }
    }
    Ok(McTable { rows })
}

pub const TABLE_HEADER: &str = "design,T,rule,estimator,reps,b,alpha,reject_rate,mc_se";

/// Writes the table as CSV, preceded by `# ` comment lines.
pub fn write_table<W: Write>(table: &McTable, comments: &[String], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{TABLE_HEADER}")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.4},{:.6}",
            r.design, r.t, r.rule, r.estimator, r.reps, r.b, r.alpha, r.reject_rate, r.mc_se
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the table to `path` with the resolved configuration as a comment
/// header.
pub fn emit_table(table: &McTable, config: Option<&McConfig>, path: &Path) -> Result<()> {
    let comments = config.map(|c| c.to_kv_lines()).unwrap_or_default();
    write_table(table, &comments, File::create(path).map_err(at_path(path))?)
}

/// Reads a table written by [`emit_table`].
pub fn read_table(path: &Path) -> Result<McTable> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<McRow>, _>>()?;
    Ok(McTable { rows })
}

/// Provenance record written next to a table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: McConfig,
    pub version: String,
    pub table: Option<String>,
}

pub fn write_manifest(config: &McConfig, table_path: Option<&Path>, path: &Path) -> Result<()> {
    let m = RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        table: table_path.map(|p| p.display().to_string()),
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(path).map_err(at_path(path))?), &m)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path).map_err(at_path(path))?))?)
}
