//! Running an experiment: independent seeded runs on a worker pool, one
//! trace file per run, then a summary and curves computed from the files.

use std::fs;
use std::path::{Path, PathBuf};

use bvo_core::baselines::{random_search, simulated_annealing};
use bvo_core::benchmarks::Benchmark;
use bvo_core::optimizer::{run_bvo_with_clock, Clock, MethodConfig, NoClock, Objective, OptimizationTrace};
use rayon::prelude::*;

use crate::config::ExperimentSpec;
use crate::external::ExternalObjective;
use crate::summary::{aggregate, summarize, write_curves, write_summary, SummaryRow};
use crate::trace_io::TraceFile;
use crate::{HarnessError, Result, WallClock};

pub fn trace_file_name(problem: &str, method: &str, run: usize) -> String {
    format!("{problem}_{method}_run{run}.jsonl")
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: SummaryRow,
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    /// Absent when every run failed.
    pub curves_path: Option<PathBuf>,
}

/// One run of `config` on `objective`. `seed` drives random search; the
/// other methods carry their seed inside `config`.
pub fn run_method<O: Objective + ?Sized>(
    objective: &O,
    config: &MethodConfig,
    seed: u64,
    timing: bool,
) -> bvo_core::Result<OptimizationTrace> {
    match config {
        MethodConfig::Bvo(cfg) => {
            let clock: Box<dyn Clock> = if timing { Box::new(WallClock::start()) } else { Box::new(NoClock) };
            run_bvo_with_clock(objective, cfg, clock.as_ref())
        }
        MethodConfig::Rs { budget } => random_search(objective, *budget, seed),
        MethodConfig::Sa(cfg) => simulated_annealing(objective, cfg),
    }
}

fn run_one(spec: &ExperimentSpec, builtin: Option<&Benchmark>, run: usize) -> Result<TraceFile> {
    let config = spec.method_config(run)?;
    let seed = spec.run_seed(run);
    let trace = match builtin {
        Some(b) => run_method(b, &config, seed, spec.timing),
        None => match spawn_external(spec) {
            Ok(e) => run_method(&e, &config, seed, spec.timing),
            Err(e) => Err(to_core(e)),
        },
    };
    Ok(finish(spec, run, seed, config, trace))
}

fn to_core(e: HarnessError) -> bvo_core::Error {
    match e {
        HarnessError::Core(c) => c,
        other => bvo_core::Error::Evaluation(other.to_string()),
    }
}

fn spawn_external(spec: &ExperimentSpec) -> Result<ExternalObjective> {
    let cfg = spec.external.as_ref().ok_or_else(|| HarnessError::Config("missing [external] section".into()))?;
    ExternalObjective::spawn(cfg)
}

fn finish(
    spec: &ExperimentSpec,
    run: usize,
    seed: u64,
    config: MethodConfig,
    trace: bvo_core::Result<OptimizationTrace>,
) -> TraceFile {
    let problem = spec.problem.to_string();
    match trace {
        Ok(t) => TraceFile::new(&problem, spec.reg_lambda, run, spec.instance_seed, t),
        Err(e) => {
            let mut file = TraceFile::new(
                &problem,
                spec.reg_lambda,
                run,
                spec.instance_seed,
                OptimizationTrace::new(spec.method, seed, config),
            );
            file.header.failed = Some(e.to_string());
            file
        }
    }
}

/// Runs every repetition of `spec` and writes
/// `{problem}_{method}_run{r}.jsonl`, `{problem}_{method}_summary.csv` and
/// `{problem}_{method}_curves.csv` under `spec.out`. Failed runs still get
/// a trace file and are counted in the summary.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    fs::create_dir_all(&spec.out).map_err(|e| HarnessError::io(&spec.out, e))?;
    let builtin = match spec.problem.builtin() {
        Some(p) => Some(Benchmark::build(p, &spec.benchmarks, spec.instance_seed, spec.reg_lambda)?),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let (problem, method) = (spec.problem.to_string(), spec.method.to_string());
    let trace_paths: Vec<PathBuf> = pool.install(|| {
        (0..spec.runs)
            .into_par_iter()
            .map(|run| {
                let file = run_one(spec, builtin.as_ref(), run)?;
                let path = spec.out.join(trace_file_name(&problem, &method, run));
                file.write(&path)?;
                Ok(path)
            })
            .collect::<Result<_>>()
    })?;

    let (summary_path, curves_path) = summarize_files(&trace_paths, &spec.out, &format!("{problem}_{method}"))?;
    let summary = crate::summary::read_summary(&summary_path)?.remove(0);
    Ok(ExperimentOutcome { summary, trace_paths, summary_path, curves_path })
}

/// Reads trace files and writes `{stem}_summary.csv` and, if any run
/// succeeded, `{stem}_curves.csv` into `dir`.
pub fn summarize_files(paths: &[PathBuf], dir: &Path, stem: &str) -> Result<(PathBuf, Option<PathBuf>)> {
    let traces: Vec<(PathBuf, TraceFile)> =
        paths.iter().map(|p| Ok((p.clone(), TraceFile::read(p)?))).collect::<Result<_>>()?;
    let files: Vec<TraceFile> = traces.iter().map(|(_, t)| t.clone()).collect();
    let summary_path = dir.join(format!("{stem}_summary.csv"));
    write_summary(&summary_path, &summarize(&files))?;
    let curves_path = if files.iter().any(|t| t.header.failed.is_none()) {
        let p = dir.join(format!("{stem}_curves.csv"));
        write_curves(&p, &aggregate(&traces)?)?;
        Some(p)
    } else {
        None
    };
    Ok((summary_path, curves_path))
}
