//! Trace files: JSON lines, one header line followed by one line per
//! evaluation.
//!
//! ```text
//! {"schema":"bvo-trace","version":1,"problem":"ising",...,"config":{...},"notes":[]}
//! {"iter":0,"x":[1,0,...],"y":0.53,"best":0.53,"t_fit_ms":0.0,"t_inner_ms":0.0,"seed":17,"elbo":null,"acq":null}
//! ```

use std::fs;
use std::path::Path;

use bvo_core::optimizer::{Method, MethodConfig, OptimizationTrace, TraceRecord};
use bvo_core::HardAssignment;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

pub const TRACE_SCHEMA: &str = "bvo-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub version: u32,
    pub problem: String,
    pub reg_lambda: f64,
    pub run: usize,
    pub instance_seed: u64,
    pub method: Method,
    pub seed: u64,
    pub config: MethodConfig,
    pub notes: Vec<String>,
    /// Set when the run aborted; `records` then holds what was evaluated
    /// before the failure (possibly nothing).
    #[serde(default)]
    pub failed: Option<String>,
}

/// On-disk form of one record: the trace record plus the run seed.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    iter: usize,
    x: HardAssignment,
    y: f64,
    best: f64,
    t_fit_ms: f64,
    t_inner_ms: f64,
    seed: u64,
    elbo: Option<f64>,
    acq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl TraceFile {
    pub fn new(problem: &str, reg_lambda: f64, run: usize, instance_seed: u64, trace: OptimizationTrace) -> Self {
        Self {
            header: TraceHeader {
                schema: TRACE_SCHEMA.into(),
                version: TRACE_VERSION,
                problem: problem.into(),
                reg_lambda,
                run,
                instance_seed,
                method: trace.method,
                seed: trace.seed,
                config: trace.config,
                notes: trace.notes,
                failed: None,
            },
            records: trace.records,
        }
    }

    /// Sum of fit and inner-loop time over the run.
    pub fn wall_ms(&self) -> f64 {
        self.records.iter().map(|r| r.t_fit_ms + r.t_inner_ms).sum()
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best).collect()
    }

    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            let line = RecordLine {
                iter: r.iter,
                x: r.x.clone(),
                y: r.y,
                best: r.best,
                t_fit_ms: r.t_fit_ms,
                t_inner_ms: r.t_inner_ms,
                seed: self.header.seed,
                elbo: r.elbo,
                acq: r.acq,
            };
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| HarnessError::format(path, "empty trace file"))?;
        let header: TraceHeader =
            serde_json::from_str(head).map_err(|e| HarnessError::format(path, format!("header: {e}")))?;
        if header.schema != TRACE_SCHEMA {
            return Err(HarnessError::format(path, format!("schema {:?} is not {TRACE_SCHEMA:?}", header.schema)));
        }
        if header.version != TRACE_VERSION {
            return Err(HarnessError::Version { what: "trace", found: header.version, expected: TRACE_VERSION });
        }
        let records = lines
            .enumerate()
            .map(|(i, l)| {
                let line: RecordLine =
                    serde_json::from_str(l).map_err(|e| HarnessError::format(path, format!("record {i}: {e}")))?;
                if line.seed != header.seed || line.iter != i {
                    return Err(HarnessError::format(path, format!("record {i} does not belong to this run")));
                }
                Ok(TraceRecord {
                    iter: line.iter,
                    x: line.x,
                    y: line.y,
                    best: line.best,
                    t_fit_ms: line.t_fit_ms,
                    t_inner_ms: line.t_inner_ms,
                    elbo: line.elbo,
                    acq: line.acq,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { header, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(path, &text)
    }
}
