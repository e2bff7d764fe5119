//! Seeded benchmark instances. Every source of randomness is drawn once at
//! construction, so each objective is a deterministic function of
//! `(instance, x)`.

mod contamination;
mod ising;
mod pest;

pub use contamination::{ContaminationConfig, ContaminationInstance};
pub use ising::{grid_edges, log_partition as ising_log_partition, IsingConfig, IsingInstance, ISING_EDGES, ISING_SPINS};
pub use pest::{PestConfig, PestInstance};

use alloc::format;

use rand::Rng;
use rand_distr::{Beta, Distribution as _};
use serde::{Deserialize, Serialize};

use crate::optimizer::Objective;
use crate::space::{HardAssignment, SearchSpace};
use crate::{Error, Result};

/// A scalar sampling law as written in instance config files, e.g.
/// `{ beta = [1.0, 30.0] }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Beta(f64, f64),
    Uniform(f64, f64),
    Constant(f64),
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Beta(a, b) => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Distribution::Uniform(lo, hi) => lo.is_finite() && hi.is_finite() && lo <= hi,
            Distribution::Constant(v) => v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!("invalid distribution {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Beta(a, b) => Beta::new(a, b).expect("validated").sample(rng),
            Distribution::Uniform(lo, hi) if lo < hi => rng.random_range(lo..hi),
            Distribution::Uniform(lo, _) => lo,
            Distribution::Constant(v) => v,
        }
    }

    pub(crate) fn within_unit(&self) -> bool {
        match *self {
            Distribution::Beta(..) => true,
            Distribution::Uniform(lo, hi) => lo >= 0.0 && hi <= 1.0,
            Distribution::Constant(v) => (0.0..=1.0).contains(&v),
        }
    }
}

/// All tunable benchmark constants in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BenchmarkConfig {
    #[serde(default)]
    pub ising: IsingConfig,
    #[serde(default)]
    pub contamination: ContaminationConfig,
    #[serde(default)]
    pub pest: PestConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Ising,
    Contamination,
    Pest,
}

impl core::str::FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ising" => Ok(Self::Ising),
            "contamination" => Ok(Self::Contamination),
            "pest" => Ok(Self::Pest),
            other => Err(Error::Contract(format!("unknown problem {other:?}"))),
        }
    }
}

impl core::fmt::Display for Problem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Problem::Ising => "ising",
            Problem::Contamination => "contamination",
            Problem::Pest => "pest",
        })
    }
}

/// Any of the built-in benchmarks behind one [`Objective`].
#[derive(Debug, Clone)]
pub enum Benchmark {
    Ising(IsingInstance),
    Contamination(ContaminationInstance),
    Pest(PestInstance),
}

impl Benchmark {
    /// Builds an instance. `reg_lambda` is ignored for pest control, which
    /// has no sparsity term.
    pub fn build(problem: Problem, config: &BenchmarkConfig, seed: u64, reg_lambda: f64) -> Result<Self> {
        Ok(match problem {
            Problem::Ising => Self::Ising(IsingInstance::new(&config.ising, seed, reg_lambda)?),
            Problem::Contamination => {
                Self::Contamination(ContaminationInstance::new(&config.contamination, seed, reg_lambda)?)
            }
            Problem::Pest => Self::Pest(PestInstance::new(&config.pest, seed)?),
        })
    }
}

impl Objective for Benchmark {
    fn space(&self) -> &SearchSpace {
        match self {
            Benchmark::Ising(b) => b.space(),
            Benchmark::Contamination(b) => b.space(),
            Benchmark::Pest(b) => b.space(),
        }
    }

    fn evaluate(&self, x: &HardAssignment) -> Result<f64> {
        match self {
            Benchmark::Ising(b) => b.evaluate(x),
            Benchmark::Contamination(b) => b.evaluate(x),
            Benchmark::Pest(b) => b.evaluate(x),
        }
    }
}

/// Largest space [`enumerate_optimum`] will walk.
pub const ENUMERATION_LIMIT: f64 = (1u64 << 24) as f64;

/// Exhaustive minimum; ties go to the lowest mixed-radix index.
pub fn enumerate_optimum<O: Objective + ?Sized>(objective: &O) -> Result<(HardAssignment, f64)> {
    let space = objective.space();
    let size = space.size();
    if size > ENUMERATION_LIMIT {
        return Err(Error::SpaceTooLarge(size));
    }
    let mut best: Option<(HardAssignment, f64)> = None;
    for i in 0..size as u64 {
        let x = space.point_at(i);
        let y = objective.evaluate(&x)?;
        if best.as_ref().is_none_or(|(_, b)| y < *b) {
            best = Some((x, y));
        }
    }
    Ok(best.expect("spaces are non-empty"))
}
