//! The three subcommands: `run` (one experiment), `sweep-alpha` (one run
//! per α of the entropy criterion), and `compare` (tabulate reports).

use std::path::{Path, PathBuf};
use std::time::Instant;

use saep_core::pruning::CriterionKind;
use saep_core::search::{run_search_with, ExecPolicy, SearchConfig};
use saep_core::Dataset;

use crate::config::ExperimentConfig;
use crate::report::{
    build_report, read_report, validate_report, write_history_csv, write_report, RunReport,
};
use crate::CliError;

/// Environment variable overriding the output directory (beaten only by
/// the `--out-dir` flag).
pub const OUT_DIR_ENV: &str = "SAEP_OUT_DIR";

/// Common flags shared by `run` and `sweep-alpha`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    /// Overrides `search.master_seed` from the config.
    pub seed: Option<u64>,
    /// `Some(n)` with n ≥ 2 trains the two candidate branches on separate
    /// threads; results are identical either way.
    pub threads: Option<usize>,
}

impl RunOptions {
    fn exec_policy(&self) -> ExecPolicy {
        match self.threads {
            Some(n) if n >= 2 => ExecPolicy::Parallel,
            _ => ExecPolicy::Serial,
        }
    }
}

/// Output directory precedence: `--out-dir` flag, then `SAEP_OUT_DIR`,
/// then the config's `output.dir` (resolved against the config file).
fn resolve_out_dir(
    flag: Option<&Path>,
    config_dir: &Path,
    config_value: &Path,
) -> Result<PathBuf, CliError> {
    let dir = if let Some(d) = flag {
        d.to_path_buf()
    } else if let Some(env) = std::env::var_os(OUT_DIR_ENV) {
        PathBuf::from(env)
    } else if config_value.is_absolute() {
        config_value.to_path_buf()
    } else {
        config_dir.join(config_value)
    };
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
    Ok(dir)
}

fn config_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs one search and writes `<tag>.report.json` + `<tag>.history.csv`.
/// On a runtime failure the partial history is still flushed to the CSV.
pub fn run_experiment(config_path: &Path, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let cfg = ExperimentConfig::from_path(config_path)?;
    let base = config_dir(config_path);
    let out_dir = resolve_out_dir(opts.out_dir.as_deref(), &base, &cfg.output.dir)?;
    let search_cfg = cfg.search_config(opts.seed)?;
    let (train, test) = cfg.dataset.load(&base)?;

    let report = execute(
        &search_cfg,
        &train,
        &test,
        opts.exec_policy(),
        &out_dir,
        &cfg.output.tag,
    )?;
    let report_path = out_dir.join(format!("{}.report.json", cfg.output.tag));
    println!(
        "wrote {} (method={} accuracy={:.2}% size={})",
        report_path.display(),
        report.method,
        report.summary.test_accuracy_percent,
        report.summary.live_size
    );
    Ok(report_path)
}

/// Shared run-and-write path used by `run` and each sweep point.
fn execute(
    search_cfg: &SearchConfig,
    train: &Dataset,
    test: &Dataset,
    exec: ExecPolicy,
    out_dir: &Path,
    tag: &str,
) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let outcome = match run_search_with(train, test, search_cfg, exec) {
        Ok(out) => out,
        Err(failure) => {
            // Flush whatever completed so the failure is inspectable.
            let partial = out_dir.join(format!("{tag}.history.csv"));
            write_history_csv(&failure.partial, &partial)?;
            return Err(CliError::Runtime(format!(
                "{failure} (partial history flushed to {})",
                partial.display()
            )));
        }
    };
    let wall = started.elapsed().as_secs_f64();
    let report = build_report(search_cfg, train.name(), &outcome, wall);
    validate_report(&report)?;
    write_report(&report, &out_dir.join(format!("{tag}.report.json")))?;
    write_history_csv(
        &report.iterations,
        &out_dir.join(format!("{tag}.history.csv")),
    )?;
    Ok(report)
}

/// Runs the entropy criterion once per α (same master seed throughout) and
/// writes a sweep CSV of `(alpha, accuracy, size, disagreement)` plus one
/// full report per point.
pub fn sweep_alpha(
    config_path: &Path,
    alphas: &[f64],
    opts: &RunOptions,
) -> Result<PathBuf, CliError> {
    let cfg = ExperimentConfig::from_path(config_path)?;
    if cfg.criterion.kind != CriterionKind::Pie {
        return Err(CliError::Config(
            "sweep-alpha requires criterion kind = \"pie\"".into(),
        ));
    }
    if alphas.is_empty() {
        return Err(CliError::Config("alpha list must not be empty".into()));
    }
    let base = config_dir(config_path);
    let out_dir = resolve_out_dir(opts.out_dir.as_deref(), &base, &cfg.output.dir)?;
    let (train, test) = cfg.dataset.load(&base)?;

    let sweep_path = out_dir.join(format!("{}.sweep.csv", cfg.output.tag));
    let mut w = csv::Writer::from_path(&sweep_path)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", sweep_path.display())))?;
    w.write_record(["alpha", "test_accuracy_percent", "live_size", "disagreement"])
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", sweep_path.display())))?;

    for &alpha in alphas {
        let mut search_cfg = cfg.search_config(opts.seed)?;
        search_cfg.criterion.alpha = alpha;
        search_cfg.validate().map_err(CliError::config)?;
        let tag = format!("{}.alpha{}", cfg.output.tag, alpha);
        let report = execute(&search_cfg, &train, &test, opts.exec_policy(), &out_dir, &tag)?;
        w.write_record([
            alpha.to_string(),
            report.summary.test_accuracy_percent.to_string(),
            report.summary.live_size.to_string(),
            report.summary.disagreement.to_string(),
        ])
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", sweep_path.display())))?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("flushing {}: {e}", sweep_path.display())))?;
    println!("wrote {} ({} alpha points)", sweep_path.display(), alphas.len());
    Ok(sweep_path)
}

/// Renders one comparison row per report — method, accuracy, size,
/// disagreement — sorted by method tag. Values are copied from the
/// reports, never recomputed. Degenerate disagreements (fewer than two
/// live members) render as `0.0*`.
pub fn emit_comparison(report_paths: &[PathBuf], out_path: &Path) -> Result<String, CliError> {
    if report_paths.is_empty() {
        return Err(CliError::Config("compare needs at least one report".into()));
    }
    let mut rows = Vec::new();
    for path in report_paths {
        let report = read_report(path)?;
        validate_report(&report)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let disagreement = if report.summary.disagreement_degenerate {
            "0.0*".to_string()
        } else {
            report.summary.disagreement.to_string()
        };
        rows.push((
            report.method.clone(),
            report.summary.test_accuracy_percent.to_string(),
            report.summary.live_size.to_string(),
            disagreement,
        ));
    }
    rows.sort();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "test_accuracy_percent", "live_size", "disagreement"])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for (method, acc, size, dis) in &rows {
        w.write_record([method, acc, size, dis])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let table = String::from_utf8(bytes).expect("csv is utf-8");
    std::fs::write(out_path, &table)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", out_path.display())))?;
    Ok(table)
}
