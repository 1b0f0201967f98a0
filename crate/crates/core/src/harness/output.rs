//! Aggregation and the files written for a run.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{trial_seed, ResultRow};
use super::scenario::Scenario;
use crate::error::{Error, Result};

pub const RAW_HEADER: [&str; 10] = [
    "method", "sweep", "trial", "seed", "ee", "sum_rate", "total_power", "feasible", "iters", "wall_ms",
];
pub const AGGREGATE_HEADER: [&str; 8] = [
    "method", "sweep", "mean_ee", "stderr_ee", "mean_rate", "stderr_rate", "feas_rate", "trials",
];
pub const PLOT_HEADER: [&str; 5] = ["method", "metric", "x", "y", "y_stderr"];

/// Statistics of one (method, sweep point) group. Means are over feasible
/// rows only; `trials` counts all rows. A group without feasible rows has
/// NaN means.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub method: String,
    pub sweep: f64,
    pub mean_ee: f64,
    pub stderr_ee: f64,
    pub mean_rate: f64,
    pub stderr_rate: f64,
    pub feas_rate: f64,
    pub trials: usize,
}

/// Sample mean and standard error (zero for a single sample).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Groups consecutive rows by (method, sweep point), so the input should be
/// sorted as [`super::run_scenario`] returns it.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    rows.chunk_by(|a, b| a.method == b.method && a.sweep_index == b.sweep_index)
        .map(|group| {
            let feasible: Vec<&ResultRow> = group.iter().filter(|r| r.feasible).collect();
            if feasible.is_empty() {
                log::warn!("{} at sweep {}: no feasible trials", group[0].method, group[0].sweep);
            }
            let (mean_ee, stderr_ee) = mean_stderr(&feasible.iter().map(|r| r.ee).collect::<Vec<_>>());
            let (mean_rate, stderr_rate) = mean_stderr(&feasible.iter().map(|r| r.sum_rate).collect::<Vec<_>>());
            AggregateRow {
                method: group[0].method.clone(),
                sweep: group[0].sweep,
                mean_ee,
                stderr_ee,
                mean_rate,
                stderr_rate,
                feas_rate: feasible.len() as f64 / group.len() as f64,
                trials: group.len(),
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub raw: PathBuf,
    pub aggregate: PathBuf,
    pub plot: PathBuf,
    pub manifest: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        OutputPaths {
            raw: dir.join("raw.csv"),
            aggregate: dir.join("aggregate.csv"),
            plot: dir.join("plot.csv"),
            manifest: dir.join("manifest.json"),
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_csv(path: &Path, header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let wrap = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for rec in records {
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'a std::collections::BTreeMap<String, String>,
    resolved: &'a Scenario,
    master_seed: u64,
    trial_seeds: Vec<Vec<u64>>,
    rows: usize,
    failed_rows: Vec<String>,
    notes: [&'static str; 4],
}

/// Writes `raw.csv`, `aggregate.csv`, `plot.csv` (long format, one curve per
/// method and metric) and `manifest.json` into `dir`, creating it if needed.
pub fn emit_outputs(scenario: &Scenario, rows: &[ResultRow], aggregates: &[AggregateRow], dir: &Path) -> Result<OutputPaths> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = OutputPaths::in_dir(dir);

    write_csv(
        &paths.raw,
        &RAW_HEADER,
        rows.iter().map(|r| {
            vec![
                r.method.clone(),
                r.sweep.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                r.ee.to_string(),
                r.sum_rate.to_string(),
                r.total_power.to_string(),
                r.feasible.to_string(),
                r.iters.to_string(),
                format!("{:.3}", r.wall_ms),
            ]
        }),
    )?;
    write_csv(
        &paths.aggregate,
        &AGGREGATE_HEADER,
        aggregates.iter().map(|a| {
            vec![
                a.method.clone(),
                a.sweep.to_string(),
                a.mean_ee.to_string(),
                a.stderr_ee.to_string(),
                a.mean_rate.to_string(),
                a.stderr_rate.to_string(),
                a.feas_rate.to_string(),
                a.trials.to_string(),
            ]
        }),
    )?;
    write_csv(
        &paths.plot,
        &PLOT_HEADER,
        ["ee", "sum_rate"].into_iter().flat_map(|metric| {
            aggregates.iter().map(move |a| {
                let (y, e) = if metric == "ee" {
                    (a.mean_ee, a.stderr_ee)
                } else {
                    (a.mean_rate, a.stderr_rate)
                };
                vec![a.method.clone(), metric.to_string(), a.sweep.to_string(), y.to_string(), e.to_string()]
            })
        }),
    )?;

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: &scenario.source,
        resolved: scenario,
        master_seed: scenario.master_seed,
        trial_seeds: (0..scenario.values.len())
            .map(|s| (0..scenario.trials).map(|t| trial_seed(scenario.master_seed, s, t)).collect())
            .collect(),
        rows: rows.len(),
        failed_rows: rows
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| format!("{} sweep={} trial={}: {e}", r.method, r.sweep, r.trial)))
            .collect(),
        notes: [
            "relay total power = sum(mu_k p_k) + K P_c + relay transmit power, replacing N P_n(b)",
            "relay uses the surface's element count and position, with fixed gain alpha",
            "pathloss reference gains are assumed constants, so absolute EE values are not calibrated",
            "aggregates use feasible trials only; infeasible rows carry ee = 0",
        ],
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Scenario(format!("manifest: {e}")))?;
    let mut f = File::create(&paths.manifest).map_err(|source| Error::Io {
        path: paths.manifest.clone(),
        source,
    })?;
    writeln!(f, "{json}").map_err(|source| Error::Io {
        path: paths.manifest.clone(),
        source,
    })?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, sweep_index: usize, ee: f64, feasible: bool) -> ResultRow {
        ResultRow {
            method: method.into(),
            sweep_index,
            sweep: sweep_index as f64,
            trial: 0,
            seed: 0,
            ee,
            sum_rate: 2.0 * ee,
            total_power: 1.0,
            feasible,
            iters: 1,
            wall_ms: 0.0,
            error: None,
        }
    }

    #[test]
    fn single_and_pair_means() {
        let a = aggregate(&[row("x", 0, 3.0, true)]);
        assert_eq!((a[0].mean_ee, a[0].stderr_ee), (3.0, 0.0));
        let a = aggregate(&[row("x", 0, 1.0, true), row("x", 0, 4.0, true)]);
        assert_eq!(a[0].mean_ee, 2.5);
        assert_eq!(a[0].mean_rate, 5.0);
        assert!((a[0].stderr_ee - 1.5).abs() < 1e-15);
    }

    #[test]
    fn constant_rows_have_no_spread() {
        let rows: Vec<_> = (0..50).map(|_| row("x", 0, 0.1 + 0.2, true)).collect();
        assert!(aggregate(&rows)[0].stderr_ee < 1e-12);
    }

    #[test]
    fn infeasible_rows_are_excluded() {
        let a = aggregate(&[row("x", 0, 2.0, true), row("x", 0, 0.0, false), row("y", 0, 0.0, false)]);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].mean_ee, 2.0);
        assert_eq!(a[0].feas_rate, 0.5);
        assert_eq!(a[0].trials, 2);
        assert!(a[1].mean_ee.is_nan());
        assert!(aggregate(&[]).is_empty());
    }

    #[test]
    fn mean_stderr_oracle() {
        let v = [1.0, 2.0, 4.0, 8.0];
        let (m, s) = mean_stderr(&v);
        assert_eq!(m, 3.75);
        // sample variance 9.583..., divided by 4
        assert!((s - (115.0f64 / 12.0 / 4.0).sqrt()).abs() < 1e-14);
    }
}
