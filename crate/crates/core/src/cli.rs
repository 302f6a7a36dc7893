//! Config files, run manifests and the batch front door behind the binary.
//!
//! Config files are TOML. Required keys are `b`, `r`, `horizon`,
//! `[reinforcement]` and `[barriers]`; everything else has a default.
//!
//! ```toml
//! b = 1.0
//! r = 1.0
//! horizon = 1000
//!
//! [reinforcement]
//! family = "point_mass"
//! value = 1.0
//!
//! [barriers]
//! family = "fixed"
//! lower = 0.0
//! upper = 1.0
//! ```

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decomposition::{compute_series, verify_identity};
use crate::distributions::{BarrierSpec, ReinforcementFamily, ReinforcementSpec, Schedule};
use crate::error::UrnError;
use crate::experiments::{
    barrier_strictness_suite, cn_suite, conditional_clt_suite, conjecture_suite, convergence_suite,
    nonatomicity_suite, polya_limit_suite, sn_ratio_suite, ExperimentConfig, SuiteOutcome, Table,
    Thresholds,
};
use crate::oracle::enumerate_exact;
use crate::provenance::fingerprint;
use crate::stats::LimitMethod;
use crate::urn::{simulate_path, PathRecord, UrnModel};

pub const DEFAULT_PATHS: usize = 1000;
pub const DEFAULT_CONTINUATIONS: usize = 2000;
pub const DEFAULT_MASTER_SEED: u64 = 1;

/// A config problem tied to the key that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<UrnError> for ConfigError {
    fn from(e: UrnError) -> Self {
        match e {
            UrnError::Validation { field, reason } => ConfigError {
                path: field,
                message: reason,
            },
            other => ConfigError {
                path: String::new(),
                message: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum ReinforcementDoc {
    PointMass {
        value: f64,
        bound: Option<f64>,
    },
    Discrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
        bound: Option<f64>,
    },
    Uniform {
        low: f64,
        high: f64,
        bound: Option<f64>,
    },
    ScaledBeta {
        alpha: f64,
        beta: f64,
        scale: f64,
        bound: Option<f64>,
    },
    DeterministicSequence {
        schedule: Schedule,
        limit_mean: f64,
        limit_second_moment: f64,
        bound: Option<f64>,
    },
}

impl ReinforcementDoc {
    fn resolve(self, key: &str) -> Result<ReinforcementSpec, ConfigError> {
        let (family, bound) = match self {
            ReinforcementDoc::PointMass { value, bound } => (ReinforcementFamily::PointMass { value }, bound),
            ReinforcementDoc::Discrete {
                values,
                probabilities,
                bound,
            } => (
                ReinforcementFamily::Discrete {
                    values,
                    probabilities,
                },
                bound,
            ),
            ReinforcementDoc::Uniform { low, high, bound } => (ReinforcementFamily::Uniform { low, high }, bound),
            ReinforcementDoc::ScaledBeta {
                alpha,
                beta,
                scale,
                bound,
            } => (ReinforcementFamily::ScaledBeta { alpha, beta, scale }, bound),
            ReinforcementDoc::DeterministicSequence {
                schedule,
                limit_mean,
                limit_second_moment,
                bound,
            } => (
                ReinforcementFamily::DeterministicSequence {
                    schedule,
                    limit_mean,
                    limit_second_moment,
                },
                bound,
            ),
        };
        ReinforcementSpec::new(family, bound).map_err(|e| {
            let mut err = ConfigError::from(e);
            if let Some(rest) = err.path.strip_prefix("reinforcement") {
                err.path = format!("{key}{rest}");
            } else if !err.path.starts_with(key) {
                err.path = format!("{key}.{}", err.path);
            }
            err
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    b: f64,
    r: f64,
    horizon: u64,
    reinforcement: ReinforcementDoc,
    barriers: BarrierSpec,
    red_reinforcement: Option<ReinforcementDoc>,
    prefix_n: Option<u64>,
    continuations: Option<usize>,
    paths: Option<usize>,
    master_seed: Option<u64>,
    limit_estimator: Option<LimitMethod>,
    #[serde(default)]
    thresholds: Thresholds,
}

/// Parse and validate a TOML config, applying defaults.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError {
        path: String::new(),
        message: e.to_string(),
    })?;
    let doc: ConfigDoc = serde_path_to_error::deserialize(de).map_err(|e| ConfigError {
        path: e.path().to_string(),
        message: e.inner().to_string().trim().to_string(),
    })?;

    let reinforcement = doc.reinforcement.resolve("reinforcement")?;
    let red = doc
        .red_reinforcement
        .map(|r| r.resolve("red_reinforcement"))
        .transpose()?;
    doc.barriers.validate()?;
    let mut model = UrnModel::new(doc.b, doc.r, doc.barriers, reinforcement)?;
    model.red_reinforcement = red;

    let mut config = ExperimentConfig::new(model, doc.horizon, doc.master_seed.unwrap_or(DEFAULT_MASTER_SEED));
    if let Some(p) = doc.prefix_n {
        config.prefix_n = p;
    }
    config.paths = doc.paths.unwrap_or(DEFAULT_PATHS);
    config.continuations = doc.continuations.unwrap_or(DEFAULT_CONTINUATIONS);
    config.limit_estimator = doc.limit_estimator.unwrap_or_default();
    config.thresholds = doc.thresholds;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError {
        path: String::new(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config_str(&text)
}

/// Everything that determines a run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: String,
    pub command: String,
    pub resolved: ExperimentConfig,
    pub master_seed: u64,
    pub suites: Vec<String>,
    pub output_dir: Option<String>,
    pub tool_version: String,
    /// Hash over command, suites, resolved config and tool version.
    pub config_hash: String,
}

impl RunManifest {
    pub fn new(config_path: &Path, command: &str, resolved: ExperimentConfig, suites: Vec<String>, out: Option<&Path>) -> Self {
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        let config_hash = fingerprint(&(command, &suites, &resolved, &tool_version));
        RunManifest {
            config_path: config_path.display().to_string(),
            command: command.to_string(),
            master_seed: resolved.master_seed,
            resolved,
            suites,
            output_dir: out.map(|p| p.display().to_string()),
            tool_version,
            config_hash,
        }
    }
}

/// Overrides given on the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub paths: Option<usize>,
    pub continuations: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) -> Result<(), ConfigError> {
        if let Some(s) = self.seed {
            config.master_seed = s;
        }
        if let Some(h) = self.horizon {
            config.horizon = h;
            if config.prefix_n >= h {
                config.prefix_n = (h / 100).max(1).min(h.saturating_sub(1));
            }
        }
        if let Some(p) = self.paths {
            config.paths = p;
        }
        if let Some(c) = self.continuations {
            config.continuations = c;
        }
        config.validate()?;
        Ok(())
    }
}

pub const SUITES: &[&str] = &[
    "convergence",
    "sn",
    "polya",
    "clt",
    "barrier",
    "atom",
    "cn",
    "conjecture",
];

/// Suites run by `suite all`.
pub const THEOREM_SUITES: &[&str] = &["convergence", "sn", "clt", "barrier", "atom"];

pub fn run_suite(name: &str, config: &ExperimentConfig) -> Result<Vec<SuiteOutcome>, UrnError> {
    Ok(match name {
        "convergence" => vec![convergence_suite(config)?],
        "sn" => vec![sn_ratio_suite(config)?],
        "polya" => vec![polya_limit_suite(config)?],
        "clt" => vec![conditional_clt_suite(config)?.outcome],
        "barrier" => vec![barrier_strictness_suite(config)?],
        "atom" => vec![nonatomicity_suite(config)?],
        "cn" => vec![cn_suite(config)?],
        "conjecture" => conjecture_suite(config)?,
        other => {
            return Err(UrnError::validation(
                "suite",
                format!("unknown suite '{other}' (expected one of {} or all)", SUITES.join(", ")),
            ))
        }
    })
}

pub fn path_table(path: &PathRecord) -> Table {
    let separate_red = path.draws.iter().any(|d| d.red_amount.is_some());
    let mut columns = vec!["n", "X", "B"];
    if separate_red {
        columns.push("R");
    }
    columns.extend(["Z", "S"]);
    let mut rows = Vec::with_capacity(path.z_series.len());
    for n in 0..path.z_series.len() {
        let mut row = vec![n.to_string()];
        match n.checked_sub(1).map(|i| &path.draws[i]) {
            Some(d) => {
                row.push((d.x as u8).to_string());
                row.push(d.amount.to_string());
                if separate_red {
                    row.push(d.red().to_string());
                }
            }
            None => {
                row.extend([String::new(), String::new()]);
                if separate_red {
                    row.push(String::new());
                }
            }
        }
        row.push(path.z_series[n].to_string());
        row.push(path.s_series[n].to_string());
        rows.push(row);
    }
    Table {
        columns: columns.into_iter().map(String::from).collect(),
        rows,
    }
}

/// Row `n` holds `Z_n, S_n, H_n, Delta_n, M_n, T_n, W_n`; `H` is blank at
/// `n = N` and `Delta` at `n = 0`, so `M` is the running sum of `Delta`.
pub fn series_table(path: &PathRecord) -> Result<Table, UrnError> {
    let s = compute_series(path)?;
    let n_max = path.horizon();
    let columns = ["n", "Z", "S", "H", "Delta", "M", "T", "W"];
    let mut rows = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        rows.push(vec![
            n.to_string(),
            path.z_series[n].to_string(),
            path.s_series[n].to_string(),
            s.h.get(n).map(|v| v.to_string()).unwrap_or_default(),
            n.checked_sub(1).map(|i| s.delta[i].to_string()).unwrap_or_default(),
            s.m_martingale[n].to_string(),
            s.t_product[n].to_string(),
            s.w[n].to_string(),
        ]);
    }
    Ok(Table {
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows,
    })
}

pub fn write_csv<W: Write>(table: &Table, out: W) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable summary, one line per report.
pub fn summary_lines(outcomes: &[SuiteOutcome]) -> Vec<String> {
    let mut lines = vec![format!(
        "{:<24} {:<30} {:>14} {:>12} {:>8}",
        "suite", "report", "statistic", "p_value", "result"
    )];
    for o in outcomes {
        for r in &o.reports {
            let result = match r.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None if r.gate == crate::stats::Gate::Skipped => "SKIP",
                None => "INFO",
            };
            lines.push(format!(
                "{:<24} {:<30} {:>14.6} {:>12} {:>8}",
                r.suite,
                r.name,
                r.statistic,
                r.p_value.map(|p| format!("{p:.3e}")).unwrap_or_else(|| "-".into()),
                result
            ));
        }
    }
    lines
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Decompose,
    Enumerate,
    Suite,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Decompose => "decompose",
            Command::Enumerate => "enumerate",
            Command::Suite => "suite",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config_path: PathBuf,
    pub overrides: Overrides,
    pub out: Option<PathBuf>,
    pub suite: Option<String>,
}

/// Exit status 0: all gated reports passed; 1: some failed.
pub fn execute<W: Write>(inv: &Invocation, stdout: &mut W) -> anyhow::Result<i32> {
    let mut config = parse_config(&inv.config_path)?;
    inv.overrides.apply(&mut config)?;
    if let Some(dir) = &inv.out {
        fs::create_dir_all(dir)?;
    }
    let suites: Vec<String> = match inv.command {
        Command::Suite => {
            let name = inv
                .suite
                .clone()
                .ok_or_else(|| UrnError::validation("suite", "missing suite name"))?;
            if name == "all" {
                THEOREM_SUITES.iter().map(|s| s.to_string()).collect()
            } else {
                vec![name]
            }
        }
        _ => Vec::new(),
    };
    let manifest = RunManifest::new(&inv.config_path, inv.command.name(), config.clone(), suites.clone(), inv.out.as_deref());
    if let Some(dir) = &inv.out {
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    }

    match inv.command {
        Command::Simulate | Command::Decompose => {
            let seed = config.master_seed;
            let path = simulate_path(&config.model, seed, config.horizon)?;
            let (table, file) = if inv.command == Command::Simulate {
                (path_table(&path), "path.csv")
            } else {
                (series_table(&path)?, "series.csv")
            };
            emit_csv(&table, inv.out.as_deref(), file, stdout)?;
            if inv.command == Command::Decompose {
                let series = compute_series(&path)?;
                let identity = verify_identity(&path, &series, 1e-12);
                if let Some(dir) = &inv.out {
                    fs::write(dir.join("identity.json"), serde_json::to_string(&identity)? + "\n")?;
                }
                return Ok(if identity.pass { 0 } else { 1 });
            }
            Ok(0)
        }
        Command::Enumerate => {
            let barriers = config.model.barriers.as_fixed().ok_or_else(|| {
                UrnError::validation("barriers", "enumeration needs non-random barriers")
            })?;
            let dist = enumerate_exact(
                config.model.b,
                config.model.r,
                barriers,
                &config.model.reinforcement,
                config.horizon as usize,
            )?;
            let json = serde_json::to_string_pretty(&dist)? + "\n";
            match &inv.out {
                Some(dir) => fs::write(dir.join("exact.json"), json)?,
                None => stdout.write_all(json.as_bytes())?,
            }
            Ok(0)
        }
        Command::Suite => {
            let mut outcomes = Vec::new();
            for name in &suites {
                outcomes.extend(run_suite(name, &config)?);
            }
            let mut jsonl = String::new();
            for o in &outcomes {
                for r in &o.reports {
                    let mut value = serde_json::to_value(r)?;
                    value["run_hash"] = serde_json::Value::String(manifest.config_hash.clone());
                    jsonl.push_str(&serde_json::to_string(&value)?);
                    jsonl.push('\n');
                }
            }
            let summary = summary_lines(&outcomes).join("\n") + "\n";
            match &inv.out {
                Some(dir) => {
                    fs::write(dir.join("reports.jsonl"), &jsonl)?;
                    for o in &outcomes {
                        if !o.table.columns.is_empty() {
                            let f = fs::File::create(dir.join(format!("{}.csv", o.suite)))?;
                            write_csv(&o.table, f)?;
                        }
                    }
                    fs::write(dir.join("summary.txt"), &summary)?;
                    stdout.write_all(summary.as_bytes())?;
                }
                None => {
                    stdout.write_all(jsonl.as_bytes())?;
                    eprint!("{summary}");
                }
            }
            let all_pass = outcomes.iter().all(|o| o.passed());
            Ok(if all_pass { 0 } else { 1 })
        }
    }
}

fn emit_csv<W: Write>(table: &Table, out: Option<&Path>, file: &str, stdout: &mut W) -> anyhow::Result<()> {
    match out {
        Some(dir) => write_csv(table, fs::File::create(dir.join(file))?),
        None => write_csv(table, stdout),
    }
}

/// Machine-readable error document printed on failure.
pub fn error_json(err: &anyhow::Error) -> String {
    let (kind, field) = if let Some(e) = err.downcast_ref::<UrnError>() {
        let field = match e {
            UrnError::Validation { field, .. } => Some(field.clone()),
            _ => None,
        };
        (e.kind(), field)
    } else if let Some(e) = err.downcast_ref::<ConfigError>() {
        ("config", Some(e.path.clone()).filter(|p| !p.is_empty()))
    } else {
        ("io", None)
    };
    serde_json::json!({
        "error": {
            "kind": kind,
            "field": field,
            "message": err.to_string(),
        }
    })
    .to_string()
}
