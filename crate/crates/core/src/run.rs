//! End-to-end evaluation runs: configuration validation, dataset loading,
//! nested evaluation, bootstrapping, testing and report emission.
//!
//! All randomness flows from the single configured seed; reruns with the
//! same manifest, config and seed write byte-identical reports, whatever
//! the parallelism.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::align::ThresholdUnit;
use crate::bootstrap::{bootstrap_many, hypothesis_test, ResampleSpec, ResampleStructure, TestMode};
use crate::dataset::io::parse_manifest;
use crate::dataset::{validate_dataset, ClassId, FrameTask, Loaded};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::nested::{EvalContext, NestedOptions, UndefinedPolicy};
use crate::report::{self, CombinedResult};
use crate::scalar::Real;

/// Configuration of one `evaluate` run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub task: FrameTask,
    /// Empty = the task's default metric set.
    pub metrics: Vec<Metric>,
    pub match_threshold: f64,
    pub threshold_unit: ThresholdUnit,
    pub report_background: bool,
    pub undefined_policy: UndefinedPolicy,
    pub resample: ResampleSpec,
    pub margin: f64,
    pub test_mode: TestMode,
    pub dump_confusions: bool,
    /// Worker threads; `None` leaves the global pool untouched.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, out_dir: impl Into<PathBuf>, task: FrameTask) -> Self {
        Self {
            manifest: manifest.into(),
            out_dir: out_dir.into(),
            task,
            metrics: Vec::new(),
            match_threshold: 7.5,
            threshold_unit: ThresholdUnit::Micron,
            report_background: false,
            undefined_policy: UndefinedPolicy::Drop,
            resample: ResampleSpec::default(),
            margin: 0.05,
            test_mode: TestMode::NonInferiority,
            dump_confusions: false,
            threads: None,
        }
    }

    /// Requested metrics, falling back to the task defaults.
    pub fn effective_metrics(&self) -> Vec<Metric> {
        if !self.metrics.is_empty() {
            return self.metrics.clone();
        }
        match self.task {
            FrameTask::Tissue | FrameTask::CellClass => {
                vec![Metric::Precision, Metric::Recall, Metric::F1]
            }
            FrameTask::CellCount => vec![Metric::Icc],
        }
    }

    /// Checks the configuration alone, before touching any input files.
    pub fn validate(&self) -> Result<()> {
        for metric in self.effective_metrics() {
            let compatible = match self.task {
                FrameTask::Tissue | FrameTask::CellClass => metric.is_classification(),
                FrameTask::CellCount => metric == Metric::Icc,
            };
            if !compatible {
                return Err(Error::TaskMetricMismatch {
                    task: self.task.to_string(),
                    metric: metric.to_string(),
                });
            }
        }
        if !(self.match_threshold.is_finite() && self.match_threshold > 0.0) {
            return Err(Error::InvalidThreshold(self.match_threshold));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::InvalidMargin(self.margin));
        }
        self.resample.validate()
    }
}

/// What a run produced, for callers that want more than files.
pub struct RunSummary<R> {
    pub out_dir: PathBuf,
    pub n_frames: usize,
    pub warnings: Vec<String>,
    pub results: Vec<CombinedResult<R>>,
}

/// Writes the report files for computed results into `dir`:
/// `nested_results.csv`, `nested_results.json`, `bootstrap.csv` and
/// `tests.csv`.
pub fn emit_report<R: Real + Serialize>(
    results: &[CombinedResult<R>],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::NoReportableClasses);
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let nested_csv = dir.join("nested_results.csv");
    let nested_json = dir.join("nested_results.json");
    let bootstrap_csv = dir.join("bootstrap.csv");
    let tests_csv = dir.join("tests.csv");
    report::write_nested_csv(&nested_csv, results)?;
    report::write_json(&nested_json, results)?;
    report::write_bootstrap_csv(&bootstrap_csv, results)?;
    report::write_tests_csv(&tests_csv, results)?;
    Ok(vec![nested_csv, nested_json, bootstrap_csv, tests_csv])
}

/// Runs a full evaluation per the config and writes the report files.
pub fn run_evaluate<R: Real + Serialize>(cfg: &RunConfig) -> Result<RunSummary<R>> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(cfg))
        }
        None => run_inner(cfg),
    }
}

fn run_inner<R: Real + Serialize>(cfg: &RunConfig) -> Result<RunSummary<R>> {
    let mut log_lines: Vec<String> = Vec::new();
    log_lines.push(format!(
        "config: {}",
        serde_json::to_string(cfg).expect("config serializes")
    ));

    let Loaded { dataset, warnings } = parse_manifest::<R>(&cfg.manifest)?;
    for w in &warnings {
        log_lines.push(format!("warning: {w}"));
    }
    let violations = validate_dataset(&dataset);
    if !violations.is_empty() {
        return Err(Error::DatasetInvalid {
            count: violations.violations.len(),
        });
    }

    let options = NestedOptions {
        match_threshold: R::from_f64(cfg.match_threshold).unwrap(),
        threshold_unit: cfg.threshold_unit,
        policy: cfg.undefined_policy,
    };
    let ctx = EvalContext::new(&dataset, cfg.task, &options)?;
    if ctx.n_positions() == 0 {
        return Err(Error::InvalidConfig(format!(
            "no {} frames in the dataset",
            cfg.task
        )));
    }

    let metrics = cfg.effective_metrics();
    let mut class_ids: Vec<ClassId> = Vec::new();
    if cfg.report_background && cfg.task != FrameTask::CellCount {
        class_ids.push(0);
    }
    class_ids.extend(dataset.classes().nonzero_ids());
    if class_ids.is_empty() {
        return Err(Error::NoReportableClasses);
    }

    // One shared resample stream per replicate, all combos evaluated on it.
    let structure = ResampleStructure::new(ctx.slide_groups().to_vec());
    let n_combos = metrics.len() * class_ids.len();
    let stat = |mult: &[u64]| -> Vec<Option<R>> {
        ctx.evaluate_all(&metrics, &class_ids, cfg.undefined_policy, mult)
            .expect("combinations validated")
            .into_iter()
            .map(|r| r.mean_difference)
            .collect()
    };
    let boots = bootstrap_many(&structure, stat, n_combos, &cfg.resample)?;

    let unit = vec![1u64; ctx.n_positions()];
    let nested_results = ctx.evaluate_all(&metrics, &class_ids, cfg.undefined_policy, &unit)?;

    let margin = R::from_f64(cfg.margin).unwrap();
    let mut results = Vec::with_capacity(n_combos);
    for (nested, boot) in nested_results.into_iter().zip(boots) {
        let class_name = dataset
            .classes()
            .name(nested.class_id)
            .expect("registered class")
            .to_string();
        if nested.mean_difference.is_none() {
            log_lines.push(format!(
                "warning: {}/{}: overall difference undefined",
                nested.metric, class_name
            ));
        }
        if boot.undefined_replicate_count > 0 {
            log_lines.push(format!(
                "warning: {}/{}: {} of {} bootstrap replicates undefined",
                nested.metric,
                class_name,
                boot.undefined_replicate_count,
                boot.replicate_values.len()
            ));
        }
        let test = match boot.ci {
            Some(_) => Some(hypothesis_test(&boot, margin, cfg.test_mode)?),
            None => {
                log_lines.push(format!(
                    "warning: {}/{}: no confidence interval (all replicates undefined)",
                    nested.metric, class_name
                ));
                None
            }
        };
        results.push(CombinedResult {
            metric: nested.metric,
            class_id: nested.class_id,
            class_name,
            nested,
            bootstrap: boot,
            test,
        });
    }

    if results
        .iter()
        .all(|r| r.nested.mean_difference.is_none() && r.bootstrap.ci.is_none())
    {
        return Err(Error::AllStatisticsUndefined);
    }

    emit_report(&results, &cfg.out_dir)?;

    if cfg.dump_confusions {
        if cfg.task == FrameTask::CellCount {
            log_lines.push("note: --dump-confusions has no effect on the count task".into());
        } else {
            let matrices = ctx.aggregated_pair_matrices(&unit);
            report::write_confusions(
                &cfg.out_dir.join("confusions"),
                dataset.classes(),
                &matrices,
            )?;
        }
    }

    let log_path = cfg.out_dir.join("run_log.txt");
    std::fs::write(&log_path, log_lines.join("\n") + "\n").map_err(|e| Error::Io {
        path: log_path.clone(),
        source: e,
    })?;

    Ok(RunSummary {
        out_dir: cfg.out_dir.clone(),
        n_frames: ctx.n_positions(),
        warnings: log_lines
            .into_iter()
            .filter(|l| l.starts_with("warning:"))
            .collect(),
        results,
    })
}
