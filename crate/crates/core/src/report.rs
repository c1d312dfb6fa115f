//! Report emission: plot-ready CSV tables and a JSON mirror.
//!
//! Column contract for `nested_results.csv`: metric, class, comparator
//! (with an OVERALL row per metric and class), model_score,
//! pathologist_score, difference, weight, ci_low, ci_high, conclusion.
//! Undefined values render as empty fields. All numbers use the shortest
//! round-trip decimal form, so reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::bootstrap::{BootstrapResult, TestOutcome};
use crate::dataset::{ClassId, ClassRegistry};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::nested::NestedResult;
use crate::scalar::Real;

/// Everything computed for one (metric, class): the nested table, the
/// bootstrap of the overall difference, and the margin conclusion.
#[derive(Debug, Clone)]
pub struct CombinedResult<R> {
    pub metric: Metric,
    pub class_id: ClassId,
    pub class_name: String,
    pub nested: NestedResult<R>,
    pub bootstrap: BootstrapResult<R>,
    pub test: Option<TestOutcome<R>>,
}

fn fmt_opt<R: Real>(v: Option<R>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `nested_results.csv` per the column contract above.
pub fn write_nested_csv<R: Real>(path: &Path, results: &[CombinedResult<R>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    writer
        .write_record([
            "metric",
            "class",
            "comparator",
            "model_score",
            "pathologist_score",
            "difference",
            "weight",
            "ci_low",
            "ci_high",
            "conclusion",
        ])
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    for result in results {
        let metric = result.metric.to_string();
        for row in &result.nested.rows {
            writer
                .write_record([
                    metric.as_str(),
                    &result.class_name,
                    &row.comparator,
                    &fmt_opt(row.model_score),
                    &fmt_opt(row.comparator_score),
                    &fmt_opt(row.difference),
                    &row.weight.to_string(),
                    "",
                    "",
                    "",
                ])
                .map_err(|e| Error::Csv {
                    path: path.to_path_buf(),
                    source: e,
                })?;
        }
        let (ci_low, ci_high) = match result.bootstrap.ci {
            Some((lo, hi)) => (lo.to_string(), hi.to_string()),
            None => (String::new(), String::new()),
        };
        writer
            .write_record([
                metric.as_str(),
                &result.class_name,
                "OVERALL",
                &fmt_opt(result.nested.model_mean),
                &fmt_opt(result.nested.pathologist_mean),
                &fmt_opt(result.nested.mean_difference),
                &result.nested.weight.to_string(),
                &ci_low,
                &ci_high,
                &result
                    .test
                    .map(|t| t.conclusion.to_string())
                    .unwrap_or_default(),
            ])
            .map_err(|e| Error::Csv {
                path: path.to_path_buf(),
                source: e,
            })?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Writes the raw replicate values, one row per (metric, class, replicate).
pub fn write_bootstrap_csv<R: Real>(path: &Path, results: &[CombinedResult<R>]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "metric,class,replicate,value").map_err(|e| io_err(path, e))?;
    for result in results {
        for (i, value) in result.bootstrap.replicate_values.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                result.metric,
                result.class_name,
                i,
                fmt_opt(*value)
            )
            .map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes the per-(metric, class) bootstrap summary and test conclusions.
pub fn write_tests_csv<R: Real>(path: &Path, results: &[CombinedResult<R>]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "metric,class,point_estimate,ci_low,ci_high,defined_replicates,undefined_replicates,margin,mode,conclusion"
    )
    .map_err(|e| io_err(path, e))?;
    for result in results {
        let (ci_low, ci_high) = match result.bootstrap.ci {
            Some((lo, hi)) => (lo.to_string(), hi.to_string()),
            None => (String::new(), String::new()),
        };
        let defined = result.bootstrap.replicate_values.len()
            - result.bootstrap.undefined_replicate_count as usize;
        let (margin, mode, conclusion) = match &result.test {
            Some(t) => (
                t.margin.to_string(),
                t.mode.to_string(),
                t.conclusion.to_string(),
            ),
            None => Default::default(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            result.metric,
            result.class_name,
            fmt_opt(result.bootstrap.point_estimate),
            ci_low,
            ci_high,
            defined,
            result.bootstrap.undefined_replicate_count,
            margin,
            mode,
            conclusion
        )
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct JsonReport<'a, R: Real> {
    results: Vec<JsonResult<'a, R>>,
}

#[derive(Serialize)]
struct JsonResult<'a, R: Real> {
    metric: &'a str,
    class_id: ClassId,
    class: &'a str,
    comparators: &'a [crate::nested::ComparatorRow<R>],
    model_mean: Option<f64>,
    pathologist_mean: Option<f64>,
    mean_difference: Option<f64>,
    weight: u64,
    point_estimate: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    undefined_replicates: u32,
    resampling: &'a crate::bootstrap::ResampleSpec,
    margin: Option<f64>,
    test_mode: Option<String>,
    conclusion: Option<String>,
}

fn to_f64<R: Real>(v: Option<R>) -> Option<f64> {
    v.and_then(|x| x.to_f64())
}

/// Writes `nested_results.json`, mirroring the CSV content plus the
/// resampling configuration echo.
pub fn write_json<R: Real + Serialize>(path: &Path, results: &[CombinedResult<R>]) -> Result<()> {
    let report = JsonReport {
        results: results
            .iter()
            .map(|r| JsonResult {
                metric: r.metric.as_str(),
                class_id: r.class_id,
                class: &r.class_name,
                comparators: &r.nested.rows,
                model_mean: to_f64(r.nested.model_mean),
                pathologist_mean: to_f64(r.nested.pathologist_mean),
                mean_difference: to_f64(r.nested.mean_difference),
                weight: r.nested.weight,
                point_estimate: to_f64(r.bootstrap.point_estimate),
                ci_low: to_f64(r.bootstrap.ci.map(|c| c.0)),
                ci_high: to_f64(r.bootstrap.ci.map(|c| c.1)),
                undefined_replicates: r.bootstrap.undefined_replicate_count,
                resampling: &r.bootstrap.spec,
                margin: to_f64(r.test.map(|t| t.margin)),
                test_mode: r.test.map(|t| t.mode.to_string()),
                conclusion: r.test.map(|t| t.conclusion.to_string()),
            })
            .collect(),
    };
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    writeln!(w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes one aggregated confusion matrix per annotator pair for audit.
pub fn write_confusions(
    dir: &Path,
    registry: &ClassRegistry,
    matrices: &[crate::confusion::ConfusionMatrix],
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for m in matrices {
        let name = format!(
            "confusion__{}__vs__{}.csv",
            sanitize(&m.row_annotator),
            sanitize(&m.col_annotator)
        );
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(file);
        m.write_csv(registry, &mut w).map_err(|e| io_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
