//! Run reports: a self-contained JSON document per search (config snapshot,
//! full iteration history, summary) plus a plot-ready CSV of the history.
//! The JSON layout is documented in `docs/report_schema.md`; bump
//! [`SCHEMA_VERSION`] when it changes.
//!
//! Reports are byte-deterministic for a fixed config and master seed with
//! one deliberate exception: `wall_clock_seconds`. Comparisons that need
//! byte equality should null that field first (see
//! [`report_fingerprint`]).

use std::path::Path;

use serde::{Deserialize, Serialize};

use saep_core::search::{IterationRecord, SearchConfig, SearchOutcome};

use crate::CliError;

/// Version stamp written into every report.
pub const SCHEMA_VERSION: u32 = 1;

/// Final-state summary, copied from the last iteration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub live_size: usize,
    /// Final test accuracy in percent (the history stores fractions).
    pub test_accuracy_percent: f64,
    pub disagreement: f64,
    pub disagreement_degenerate: bool,
    pub train_error: f64,
    pub final_depth: usize,
}

/// One complete experiment: everything needed to reproduce and tabulate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub library_version: String,
    /// Criterion tag with `.w` suffix for mixture weighting (e.g. `pie.w`).
    pub method: String,
    pub master_seed: u64,
    /// Human-readable descriptor of the training dataset.
    pub dataset: String,
    /// The only field excluded from determinism comparisons.
    pub wall_clock_seconds: f64,
    pub config: SearchConfig,
    pub iterations: Vec<IterationRecord>,
    pub summary: RunSummary,
}

/// Builds a report from a finished search.
pub fn build_report(
    cfg: &SearchConfig,
    dataset: &str,
    outcome: &SearchOutcome,
    wall_clock_seconds: f64,
) -> RunReport {
    let last = outcome
        .history
        .last()
        .expect("search history is non-empty (iterations >= 1)");
    RunReport {
        schema_version: SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        method: cfg.method_tag(),
        master_seed: cfg.master_seed,
        dataset: dataset.to_string(),
        wall_clock_seconds,
        config: cfg.clone(),
        iterations: outcome.history.clone(),
        summary: RunSummary {
            live_size: last.live_size,
            test_accuracy_percent: last.test_accuracy * 100.0,
            disagreement: last.disagreement,
            disagreement_degenerate: last.disagreement_degenerate,
            train_error: last.train_error,
            final_depth: last.accepted_depth,
        },
    }
}

/// Checks the internal consistency of a report: version match, iteration
/// numbering, and summary fields recomputable from the history.
pub fn validate_report(report: &RunReport) -> Result<(), CliError> {
    if report.schema_version != SCHEMA_VERSION {
        return Err(CliError::Runtime(format!(
            "unsupported report schema version {} (expected {})",
            report.schema_version, SCHEMA_VERSION
        )));
    }
    if report.iterations.is_empty() {
        return Err(CliError::Runtime("report has no iterations".into()));
    }
    for (i, r) in report.iterations.iter().enumerate() {
        if r.t != i + 1 {
            return Err(CliError::Runtime(format!(
                "iteration records out of order: position {} holds t={}",
                i, r.t
            )));
        }
    }
    let last = report.iterations.last().unwrap();
    let expected = RunSummary {
        live_size: last.live_size,
        test_accuracy_percent: last.test_accuracy * 100.0,
        disagreement: last.disagreement,
        disagreement_degenerate: last.disagreement_degenerate,
        train_error: last.train_error,
        final_depth: last.accepted_depth,
    };
    if report.summary != expected {
        return Err(CliError::Runtime(format!(
            "summary disagrees with the final iteration record: stored {:?}, recomputed {:?}",
            report.summary, expected
        )));
    }
    if report.method != report.config.method_tag() {
        return Err(CliError::Runtime(format!(
            "method tag {} disagrees with config ({})",
            report.method,
            report.config.method_tag()
        )));
    }
    Ok(())
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Runtime(format!("serializing report: {e}")))?;
    std::fs::write(path, json + "\n")
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

pub fn read_report(path: &Path) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("reading report {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("parsing report {}: {e}", path.display())))
}

/// Serialized report with the wall-clock field nulled: two runs of the
/// same config and seed produce identical fingerprints.
pub fn report_fingerprint(report: &RunReport) -> String {
    let mut clone = report.clone();
    clone.wall_clock_seconds = 0.0;
    serde_json::to_string(&clone).expect("report serializes")
}

/// Writes the iteration history as CSV (one row per iteration). Optional
/// numeric fields serialize as empty cells; the criterion score map stays
/// in the JSON report.
pub fn write_history_csv(records: &[IterationRecord], path: &Path) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Runtime(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", path.display())))?;
    w.write_record([
        "t",
        "objective_same_depth",
        "objective_deeper",
        "accepted_depth",
        "accepted_id",
        "pruned_member",
        "live_size",
        "train_error",
        "test_accuracy",
        "disagreement",
        "disagreement_degenerate",
        "prune_reason",
    ])
    .map_err(err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.t.to_string(),
            opt(r.objective_same_depth),
            opt(r.objective_deeper),
            r.accepted_depth.to_string(),
            r.accepted_id.to_string(),
            r.pruned_member.map(|j| j.to_string()).unwrap_or_default(),
            r.live_size.to_string(),
            r.train_error.to_string(),
            r.test_accuracy.to_string(),
            r.disagreement.to_string(),
            r.disagreement_degenerate.to_string(),
            r.prune_reason.clone(),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("flushing {}: {e}", path.display())))
}
