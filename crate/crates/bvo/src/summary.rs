//! Per-experiment summaries and iteration curves, both computed from trace
//! files alone and written as versioned CSV.
//!
//! Every CSV starts with one `#` line naming the schema and version, then a
//! header row. Standard deviations divide by `n`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use bvo_core::stats::{mean, population_std};
use serde::{Deserialize, Serialize};

use crate::trace_io::TraceFile;
use crate::{HarnessError, Result};

pub const SUMMARY_SCHEMA: &str = "bvo-summary";
pub const CURVES_SCHEMA: &str = "bvo-curves";
pub const SCALING_SCHEMA: &str = "bvo-scaling";
pub const CSV_VERSION: u32 = 1;

pub(crate) fn marker(schema: &str) -> String {
    format!("# {schema} v{CSV_VERSION}; std = population (divide by n)")
}

/// Writes `rows` under the schema line.
pub(crate) fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "{}", marker(schema)).expect("writing to memory");
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| HarnessError::format(path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| HarnessError::io(path, e))
}

/// Reads rows after checking the schema line.
pub(crate) fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let tag = first.strip_prefix("# ").and_then(|t| t.split(';').next()).unwrap_or("");
    let (name, version) = tag.split_once(" v").ok_or_else(|| HarnessError::format(path, "missing schema line"))?;
    if name != schema {
        return Err(HarnessError::format(path, format!("schema {name:?} is not {schema:?}")));
    }
    let found: u32 = version.trim().parse().map_err(|_| HarnessError::format(path, "bad schema version"))?;
    if found != CSV_VERSION {
        return Err(HarnessError::Version { what: "csv", found, expected: CSV_VERSION });
    }
    csv::Reader::from_reader(rest.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| HarnessError::format(path, e)))
        .collect()
}

/// One row per (problem, method, lambda) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub method: String,
    pub lambda: f64,
    pub runs: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean_wall_ms: Option<f64>,
    /// `mean±std` to three decimals, as in a results table.
    pub cell: String,
    /// Final best values of the successful runs in run order, `;`-separated.
    pub finals: String,
}

impl SummaryRow {
    pub fn final_values(&self) -> Vec<f64> {
        self.finals.split(';').filter(|s| !s.is_empty()).filter_map(|s| s.parse().ok()).collect()
    }
}

type GroupKey = (String, String, u64);

fn group_key(t: &TraceFile) -> GroupKey {
    (t.header.problem.clone(), t.header.method.to_string(), t.header.reg_lambda.to_bits())
}

fn grouped<'a>(traces: impl IntoIterator<Item = &'a TraceFile>) -> Vec<(GroupKey, Vec<&'a TraceFile>)> {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut groups: BTreeMap<GroupKey, Vec<&TraceFile>> = BTreeMap::new();
    for t in traces {
        let k = group_key(t);
        if !groups.contains_key(&k) {
            order.push(k.clone());
        }
        groups.entry(k).or_default().push(t);
    }
    order
        .into_iter()
        .map(|k| {
            let mut v = groups.remove(&k).expect("key recorded");
            v.sort_by_key(|t| t.header.run);
            (k, v)
        })
        .collect()
}

/// Summary rows in order of first appearance; runs within a group are
/// ordered by run index.
pub fn summarize(traces: &[TraceFile]) -> Vec<SummaryRow> {
    grouped(traces)
        .into_iter()
        .map(|((problem, method, lambda), runs)| {
            let ok: Vec<&&TraceFile> = runs.iter().filter(|t| t.header.failed.is_none()).collect();
            let finals: Vec<f64> = ok.iter().filter_map(|t| t.final_best()).collect();
            let walls: Vec<f64> = ok.iter().map(|t| t.wall_ms()).collect();
            let have = !finals.is_empty();
            let m = have.then(|| mean(&finals));
            let s = have.then(|| population_std(&finals));
            SummaryRow {
                problem,
                method,
                lambda: f64::from_bits(lambda),
                runs: runs.len(),
                failed: runs.len() - finals.len(),
                mean: m,
                std: s,
                min: have.then(|| finals.iter().copied().fold(f64::INFINITY, f64::min)),
                max: have.then(|| finals.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                mean_wall_ms: have.then(|| mean(&walls)),
                cell: match (m, s) {
                    (Some(m), Some(s)) => format!("{m:.3}±{s:.3}"),
                    _ => "failed".into(),
                },
                finals: finals.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(";"),
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_csv(path, SUMMARY_SCHEMA, rows)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    read_csv(path, SUMMARY_SCHEMA)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub problem: String,
    pub method: String,
    pub lambda: f64,
    pub iter: usize,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean and standard deviation of the best-so-far value at each iteration,
/// across the successful runs of each group. Every run in a group must
/// have the same length.
pub fn aggregate(traces: &[(PathBuf, TraceFile)]) -> Result<Vec<CurvePoint>> {
    let ok: Vec<&(PathBuf, TraceFile)> = traces.iter().filter(|(_, t)| t.header.failed.is_none()).collect();
    if ok.is_empty() {
        return Err(HarnessError::Config("no successful traces to aggregate".into()));
    }
    let path_of = |t: &TraceFile| {
        ok.iter().find(|(_, u)| std::ptr::eq(u, t)).map(|(p, _)| p.display().to_string()).unwrap_or_default()
    };
    let mut out = Vec::new();
    for ((problem, method, lambda), runs) in grouped(ok.iter().map(|(_, t)| t)) {
        let len = runs[0].records.len();
        let off: Vec<String> = runs
            .iter()
            .filter(|t| t.records.len() != len)
            .map(|t| format!("{} ({} records)", path_of(t), t.records.len()))
            .collect();
        if !off.is_empty() {
            return Err(HarnessError::Config(format!(
                "budget mismatch in {problem}/{method}: expected {len} records ({}), got {}",
                path_of(runs[0]),
                off.join(", ")
            )));
        }
        for iter in 0..len {
            let column: Vec<f64> = runs.iter().map(|t| t.records[iter].best).collect();
            out.push(CurvePoint {
                problem: problem.clone(),
                method: method.clone(),
                lambda: f64::from_bits(lambda),
                iter,
                mean: mean(&column),
                std: population_std(&column),
                n: column.len(),
            });
        }
    }
    Ok(out)
}

pub fn write_curves(path: &Path, points: &[CurvePoint]) -> Result<()> {
    write_csv(path, CURVES_SCHEMA, points)
}

pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    read_csv(path, CURVES_SCHEMA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bvo_core::optimizer::{Method, MethodConfig, OptimizationTrace};
    use bvo_core::HardAssignment;

    fn trace(run: usize, ys: &[f64]) -> TraceFile {
        let mut t = OptimizationTrace::new(Method::Rs, run as u64, MethodConfig::Rs { budget: ys.len() });
        for &y in ys {
            t.record(HardAssignment(vec![0]), y, 0.0, 0.0, None, None);
        }
        TraceFile::new("ising", 0.0, run, 0, t)
    }

    fn paths(ts: Vec<TraceFile>) -> Vec<(PathBuf, TraceFile)> {
        ts.into_iter().enumerate().map(|(i, t)| (PathBuf::from(format!("run{i}.jsonl")), t)).collect()
    }

    #[test]
    fn single_run_summary_is_its_final_best() {
        let rows = summarize(&[trace(0, &[3.0, 1.5, 2.0])]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean, Some(1.5));
        assert_eq!(rows[0].std, Some(0.0));
        assert_eq!(rows[0].cell, "1.500±0.000");
    }

    #[test]
    fn failed_runs_are_counted_not_averaged() {
        let mut bad = trace(1, &[]);
        bad.header.failed = Some("boom".into());
        let rows = summarize(&[trace(0, &[2.0]), bad]);
        assert_eq!((rows[0].runs, rows[0].failed, rows[0].mean), (2, 1, Some(2.0)));
    }

    #[test]
    fn curve_of_one_trace_is_its_best_so_far() {
        let pts = aggregate(&paths(vec![trace(0, &[3.0, 1.0, 2.0])])).unwrap();
        assert_eq!(pts.iter().map(|p| p.mean).collect::<Vec<_>>(), [3.0, 1.0, 1.0]);
        assert!(pts.iter().all(|p| p.std == 0.0));
    }

    #[test]
    fn identical_traces_have_zero_spread() {
        let pts = aggregate(&paths(vec![trace(0, &[3.0, 1.0]), trace(1, &[3.0, 1.0])])).unwrap();
        assert!(pts.iter().all(|p| p.std == 0.0 && p.n == 2));
    }

    #[test]
    fn population_std_of_zero_and_two_is_one() {
        let pts = aggregate(&paths(vec![trace(0, &[0.0]), trace(1, &[2.0])])).unwrap();
        assert_eq!((pts[0].mean, pts[0].std), (1.0, 1.0));
    }

    #[test]
    fn mismatched_budgets_name_the_file() {
        let err = aggregate(&paths(vec![trace(0, &[0.0, 1.0]), trace(1, &[2.0])])).unwrap_err();
        assert!(err.to_string().contains("run1.jsonl"), "{err}");
    }
}
