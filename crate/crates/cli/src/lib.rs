//! Reproducible experiment runner: executes one config or a matrix of
//! them and emits deterministic JSON reports plus optional CSV tables.
//!
//! Exit codes: 0 when the checked property holds, 2 when it is violated,
//! 1 on any other error.

pub mod config;
mod ops;

use std::path::{Path, PathBuf};

use coarselab::report::Record;
use coarselab::CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use config::{
    parse_bundle_spec, parse_graph_spec, Expect, ExperimentConfig, Matrix, Op, Outputs,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Whether the error is a failed experiment rather than bad input.
    pub fn is_violation(&self) -> bool {
        matches!(
            self,
            RunError::Core(
                CoreError::NoWitness { .. }
                    | CoreError::GrowthViolation { .. }
                    | CoreError::JunctionTooSharp { .. }
                    | CoreError::NotQuasigeodesic { .. }
                    | CoreError::NotExponential { .. }
                    | CoreError::NoBranchPair { .. }
                    | CoreError::EmbeddingFailed(_)
                    | CoreError::NoDirectionTriple { .. }
                    | CoreError::MetricAxiomViolation(_)
                    | CoreError::DisconnectedNetGraph
                    | CoreError::HypothesisUnmet { .. }
            )
        )
    }

    /// Variant name, e.g. `NoWitness`.
    pub fn kind(&self) -> String {
        match self {
            RunError::ConfigInvalid(_) => "ConfigInvalid".into(),
            RunError::Io(_) => "Io".into(),
            RunError::Core(e) => {
                let dbg = format!("{e:?}");
                dbg.split(|c: char| !c.is_ascii_alphanumeric())
                    .next()
                    .unwrap_or_default()
                    .to_string()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Violation,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Violation => 2,
            Status::Error => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}

/// Everything a run produced, in a fixed field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub op: Op,
    pub label: String,
    pub seed: u64,
    pub status: Status,
    pub value: Value,
    pub records: Vec<Record>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub csv: Option<String>,
}

/// Run a config without writing anything. Failures are folded into the
/// report's status.
pub fn execute(cfg: &ExperimentConfig) -> RunOutcome {
    execute_in(cfg, None)
}

fn execute_in(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> RunOutcome {
    let base = |status, value, records, error| RunReport {
        name: cfg.name.clone(),
        op: cfg.op,
        label: cfg.label(),
        seed: cfg.seed,
        status,
        value,
        records,
        error,
    };
    match ops::dispatch(cfg, out_dir) {
        Ok(out) => {
            let status = if out.pass {
                Status::Pass
            } else {
                Status::Violation
            };
            RunOutcome {
                report: base(status, out.value, out.records, None),
                csv: out.csv,
            }
        }
        Err(e) => {
            let status = if e.is_violation() {
                Status::Violation
            } else {
                Status::Error
            };
            let error = ErrorReport {
                kind: e.kind(),
                message: e.to_string(),
            };
            RunOutcome {
                report: base(status, Value::Null, Vec::new(), Some(error)),
                csv: None,
            }
        }
    }
}

/// Run a config and write its report (and CSV, if the op produced one)
/// under `out_dir`. Returns the outcome; the exit code is
/// `outcome.report.exit_code()`.
pub fn run(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutcome, RunError> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let outcome = execute_in(cfg, out_dir);
    if let Some(dir) = out_dir {
        write_outcome(cfg, &outcome, dir)?;
    }
    Ok(outcome)
}

fn write_outcome(cfg: &ExperimentConfig, outcome: &RunOutcome, dir: &Path) -> Result<(), RunError> {
    let report = cfg.outputs.report.as_deref().unwrap_or("report.json");
    std::fs::write(dir.join(report), outcome.report.to_json())?;
    if let Some(csv) = &outcome.csv {
        let name = cfg.outputs.csv.as_deref().unwrap_or("table.csv");
        std::fs::write(dir.join(name), csv)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub op: Op,
    pub label: String,
    pub status: Status,
    pub expect: Expect,
    /// Whether the status matched the expectation.
    pub met: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub total: usize,
    pub met: usize,
    pub unmet: usize,
    pub errors: usize,
    pub all_met: bool,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteSummary {
    /// 0 when every expectation is met, 1 when an unexpected error
    /// occurred, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_met {
            0
        } else if self
            .entries
            .iter()
            .any(|e| !e.met && e.status == Status::Error)
        {
            1
        } else {
            2
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summaries serialize");
        text.push('\n');
        text
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub summary: SuiteSummary,
    pub reports: Vec<RunOutcome>,
}

/// Directory for config `index` under a suite's output directory.
pub fn suite_entry_dir(out_dir: &Path, index: usize, op: Op) -> PathBuf {
    out_dir.join("configs").join(format!("{index:03}-{op}"))
}

/// Run every config of the matrix in parallel. Reports are merged in
/// config order. With `seed`, every config's seed is replaced by it.
pub fn suite(
    matrix: &Matrix,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<SuiteOutcome, RunError> {
    let configs: Vec<ExperimentConfig> = matrix
        .configs
        .iter()
        .cloned()
        .map(|mut c| {
            if let Some(s) = seed {
                c.seed = s;
            }
            c
        })
        .collect();
    let reports = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            run(
                cfg,
                out_dir.map(|d| suite_entry_dir(d, i, cfg.op)).as_deref(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let entries: Vec<SuiteEntry> = configs
        .iter()
        .zip(&reports)
        .enumerate()
        .map(|(index, (cfg, out))| {
            let status = out.report.status;
            let met = match cfg.expect {
                Expect::Pass => status == Status::Pass,
                Expect::Violation => status == Status::Violation,
            };
            SuiteEntry {
                index,
                name: cfg.name.clone(),
                op: cfg.op,
                label: out.report.label.clone(),
                status,
                expect: cfg.expect,
                met,
                error: out.report.error.clone(),
            }
        })
        .collect();
    let met = entries.iter().filter(|e| e.met).count();
    let summary = SuiteSummary {
        name: matrix.name.clone(),
        total: entries.len(),
        met,
        unmet: entries.len() - met,
        errors: entries.iter().filter(|e| e.status == Status::Error).count(),
        all_met: met == entries.len(),
        entries,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.json"), summary.to_json())?;
    }
    Ok(SuiteOutcome { summary, reports })
}

/// Build the global thread pool. `None` leaves rayon's default.
pub fn init_threads(threads: Option<usize>) -> Result<(), RunError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::ConfigInvalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use coarselab::graph::generators::GraphSpec;
    use serde_json::json;

    #[test]
    fn error_kinds() {
        let e = RunError::Core(CoreError::NoWitness {
            candidates: 3,
            closest: Some(5),
        });
        assert_eq!(e.kind(), "NoWitness");
        assert!(e.is_violation());
        assert_eq!(RunError::Core(CoreError::EmptySet).kind(), "EmptySet");
        assert!(!RunError::ConfigInvalid("x".into()).is_violation());
    }

    #[test]
    fn missing_inputs_are_config_errors() {
        let out = execute(&ExperimentConfig::new(Op::Delta));
        assert_eq!(out.report.status, Status::Error);
        assert_eq!(out.report.error.unwrap().kind, "ConfigInvalid");
        let bad = ExperimentConfig::new(Op::Delta)
            .with_graph(GraphSpec::Path { n: 3 })
            .with_params(json!({"bogus": 1}));
        assert_eq!(execute(&bad).report.exit_code(), 1);
    }

    #[test]
    fn empty_suite() {
        let s = suite(&Matrix::default(), None, None).unwrap();
        assert_eq!((s.summary.total, s.summary.exit_code()), (0, 0));
        assert!(s.summary.all_met);
    }
}
