//! Experiment and instance config files (TOML, versioned).
//!
//! Resolution order: built-in defaults, then the config file, then command
//! line flags. Method sections (`[bvo]`, `[sa]`) and `[benchmarks]` are
//! merged key by key over the defaults, so a file only lists what it
//! changes.
//!
//! ```toml
//! version = 1
//! problem = "contamination"
//! method = "bvo"
//! reg_lambda = 1e-4
//! runs = 10
//! iters = 250
//!
//! [bvo.surrogate.fit]
//! schedule = { steps = 300 }
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bvo_core::baselines::SaConfig;
use bvo_core::benchmarks::{BenchmarkConfig, Problem};
use bvo_core::optimizer::{BvoConfig, Method, MethodConfig};
use bvo_core::rng::run_seed;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::external::ExternalConfig;
use crate::{HarnessError, Result};

pub const SPEC_VERSION: u32 = 1;
pub const INSTANCE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Ising,
    Contamination,
    Pest,
    External,
}

impl ProblemKind {
    pub fn builtin(self) -> Option<Problem> {
        match self {
            Self::Ising => Some(Problem::Ising),
            Self::Contamination => Some(Problem::Contamination),
            Self::Pest => Some(Problem::Pest),
            Self::External => None,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.builtin() {
            Some(p) => p.fmt(f),
            None => f.write_str("external"),
        }
    }
}

impl FromStr for ProblemKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "external" {
            return Ok(Self::External);
        }
        match s.parse::<Problem>().map_err(|e| HarnessError::Config(e.to_string()))? {
            Problem::Ising => Ok(Self::Ising),
            Problem::Contamination => Ok(Self::Contamination),
            Problem::Pest => Ok(Self::Pest),
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub method: Method,
    pub reg_lambda: f64,
    pub runs: usize,
    pub init_points: usize,
    pub iters: usize,
    /// Master seed; run `r` uses `run_seed(seed, r)`.
    pub seed: u64,
    /// Seed of the benchmark instance, shared by every run and method.
    pub instance_seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    /// Record wall-clock timings in traces. Off by default so reruns are
    /// byte-identical.
    pub timing: bool,
    pub bvo: BvoConfig,
    pub sa: SaConfig,
    pub benchmarks: BenchmarkConfig,
    pub external: Option<ExternalConfig>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Ising,
            method: Method::Bvo,
            reg_lambda: 0.0,
            runs: 10,
            init_points: 20,
            iters: 150,
            seed: 0,
            instance_seed: 0,
            out: PathBuf::from("results"),
            jobs: 1,
            timing: false,
            bvo: BvoConfig::desk(),
            sa: SaConfig::default(),
            benchmarks: BenchmarkConfig::default(),
            external: None,
        }
    }
}

/// Values given on the command line; each one that is set wins over the
/// config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub problem: Option<ProblemKind>,
    pub method: Option<Method>,
    pub reg_lambda: Option<f64>,
    pub runs: Option<usize>,
    pub init_points: Option<usize>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub instance_seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub timing: Option<bool>,
    /// Standalone instance config file replacing `[benchmarks]`.
    pub instances: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    version: u32,
    problem: Option<ProblemKind>,
    method: Option<Method>,
    reg_lambda: Option<f64>,
    runs: Option<usize>,
    init_points: Option<usize>,
    iters: Option<usize>,
    seed: Option<u64>,
    instance_seed: Option<u64>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    timing: Option<bool>,
    bvo: Option<toml::Table>,
    sa: Option<toml::Table>,
    benchmarks: Option<toml::Table>,
    external: Option<ExternalConfig>,
}

/// Recursively overlays `over` onto `base`.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn overlay<T: Serialize + DeserializeOwned + Clone>(base: &T, over: Option<toml::Table>, what: &str) -> Result<T> {
    let Some(over) = over else { return Ok(base.clone()) };
    let mut value = toml::Value::try_from(base).map_err(|e| HarnessError::Config(format!("{what}: {e}")))?;
    merge(&mut value, toml::Value::Table(over));
    value.try_into().map_err(|e| HarnessError::Config(format!("[{what}]: {e}")))
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    toml::from_str(&text).map_err(|e| HarnessError::format(path, e))
}

fn check_version(path: &Path, what: &'static str, expected: u32) -> Result<()> {
    #[derive(Deserialize)]
    struct Versioned {
        version: Option<u32>,
    }
    let v: Versioned = read_toml(path)?;
    match v.version {
        Some(found) if found == expected => Ok(()),
        Some(found) => Err(HarnessError::Version { what, found, expected }),
        None => Err(HarnessError::format(path, "missing `version`")),
    }
}

impl ExperimentSpec {
    /// Defaults, then `file`, then `flags`.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut spec = Self::default();
        if let Some(path) = file {
            check_version(path, "experiment config", SPEC_VERSION)?;
            let f: ExperimentFile = read_toml(path)?;
            spec.apply_file(f)?;
        }
        if let Some(path) = &flags.instances {
            spec.benchmarks = load_instance_config(path)?;
        }
        spec.apply(flags);
        spec.validate()?;
        Ok(spec)
    }

    fn apply_file(&mut self, f: ExperimentFile) -> Result<()> {
        debug_assert_eq!(f.version, SPEC_VERSION);
        self.apply(&Overrides {
            problem: f.problem,
            method: f.method,
            reg_lambda: f.reg_lambda,
            runs: f.runs,
            init_points: f.init_points,
            iters: f.iters,
            seed: f.seed,
            instance_seed: f.instance_seed,
            out: f.out,
            jobs: f.jobs,
            timing: f.timing,
            instances: None,
        });
        self.bvo = overlay(&self.bvo, f.bvo, "bvo")?;
        self.sa = overlay(&self.sa, f.sa, "sa")?;
        self.benchmarks = overlay(&self.benchmarks, f.benchmarks, "benchmarks")?;
        if f.external.is_some() {
            self.external = f.external;
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = o.$field.clone() { self.$field = v; })* };
        }
        set!(problem, method, reg_lambda, runs, init_points, iters, seed, instance_seed, out, jobs, timing);
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(HarnessError::Config("runs must be >= 1".into()));
        }
        if self.init_points == 0 {
            return Err(HarnessError::Config("init_points must be >= 1".into()));
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return Err(HarnessError::Config(format!("reg_lambda must be finite and >= 0, got {}", self.reg_lambda)));
        }
        if self.problem == ProblemKind::External && self.external.is_none() {
            return Err(HarnessError::Config("problem = \"external\" needs an [external] section".into()));
        }
        if self.method == Method::Bvo {
            self.method_config(0).map(|_| ())?;
        }
        Ok(())
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        run_seed(self.seed, run)
    }

    /// Configuration of run `run`, with the shared budget and its own seed.
    pub fn method_config(&self, run: usize) -> Result<MethodConfig> {
        let seed = self.run_seed(run);
        Ok(match self.method {
            Method::Bvo => {
                let cfg = BvoConfig {
                    init_points: self.init_points,
                    outer_iters: self.iters,
                    master_seed: seed,
                    ..self.bvo.clone()
                };
                cfg.validate()?;
                MethodConfig::Bvo(cfg)
            }
            Method::Rs => MethodConfig::Rs { budget: self.init_points + self.iters },
            Method::Sa => MethodConfig::Sa(SaConfig { init_points: self.init_points, steps: self.iters, seed, ..self.sa }),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    #[serde(flatten)]
    benchmarks: BenchmarkConfig,
}

/// Standalone instance config: `version = 1` plus `[ising]`,
/// `[contamination]` and `[pest]` tables, each merged over the defaults.
pub fn load_instance_config(path: &Path) -> Result<BenchmarkConfig> {
    check_version(path, "instance config", INSTANCE_VERSION)?;
    let mut table: toml::Table = read_toml(path)?;
    table.remove("version");
    overlay(&BenchmarkConfig::default(), Some(table), "instances")
}

/// The default instance config as a TOML document.
pub fn default_instance_config() -> String {
    let file = InstanceFile { version: INSTANCE_VERSION, benchmarks: BenchmarkConfig::default() };
    toml::to_string_pretty(&file).expect("instance config serializes")
}
