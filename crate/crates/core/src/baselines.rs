//! Random search and simulated annealing over the same evaluation budget.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::optimizer::{evaluate_checked, initial_design, Method, MethodConfig, Objective, OptimizationTrace};
use crate::rng::{open_uniform, SeedLadder};
use crate::space::{HardAssignment, SearchSpace};
use crate::stats::population_std;
use crate::{Error, Result};

/// `budget` distinct uniform points (duplicates only once the space is
/// effectively exhausted).
pub fn random_search<O: Objective + ?Sized>(objective: &O, budget: usize, seed: u64) -> Result<OptimizationTrace> {
    let mut trace = OptimizationTrace::new(Method::Rs, seed, MethodConfig::Rs { budget });
    let mut rng = SeedLadder::new(seed).child(0).rng();
    for x in initial_design(objective.space(), budget, &mut rng) {
        let y = evaluate_checked(objective, &x)?;
        trace.record(x, y, 0.0, 0.0, None, None);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    /// Uniform points evaluated first; the walk starts from the best.
    pub init_points: usize,
    /// Proposals evaluated after the initial design.
    pub steps: usize,
    pub initial_temp: f64,
    /// Geometric cooling factor per step.
    pub cooling: f64,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self { init_points: 20, steps: 150, initial_temp: 1.0, cooling: 0.99, seed: 0 }
    }
}

/// Metropolis rule for minimization: always accept improvements, otherwise
/// accept with probability `exp(-delta / temp)`.
pub fn metropolis_accept(delta: f64, temp: f64, u: f64) -> bool {
    delta <= 0.0 || (temp > 0.0 && u < math::exp(-delta / temp))
}

/// Copy of `x` with one uniformly chosen variable moved to a different
/// category.
pub fn neighbor<R: Rng + ?Sized>(space: &SearchSpace, x: &HardAssignment, rng: &mut R) -> HardAssignment {
    let mut y = x.clone();
    let i = rng.random_range(0..space.dims());
    let k = space.cardinalities()[i];
    let shift = rng.random_range(1..k);
    y.0[i] = (y.0[i] + shift) % k;
    y
}

/// Energy differences are divided by the spread of the initial design so a
/// single temperature schedule works across objective scales.
pub fn simulated_annealing<O: Objective + ?Sized>(objective: &O, cfg: &SaConfig) -> Result<OptimizationTrace> {
    if cfg.init_points == 0 || !(cfg.initial_temp >= 0.0) || !(cfg.cooling > 0.0 && cfg.cooling <= 1.0) {
        return Err(Error::Contract(alloc::format!("invalid annealing config {cfg:?}")));
    }
    let space = objective.space();
    let ladder = SeedLadder::new(cfg.seed);
    let mut trace = OptimizationTrace::new(Method::Sa, cfg.seed, MethodConfig::Sa(*cfg));
    let mut ys = Vec::with_capacity(cfg.init_points);
    for x in initial_design(space, cfg.init_points, &mut ladder.child(0).rng()) {
        let y = evaluate_checked(objective, &x)?;
        ys.push(y);
        trace.record(x, y, 0.0, 0.0, None, None);
    }
    let spread = match population_std(&ys) {
        s if s > 1e-12 => s,
        _ => 1.0,
    };
    let start = trace.best_point().expect("non-empty design");
    let (mut current, mut current_y) = (start.x.clone(), start.y);

    let mut rng = ladder.child(1).rng();
    let mut temp = cfg.initial_temp;
    for _ in 0..cfg.steps {
        let candidate = neighbor(space, &current, &mut rng);
        let y = evaluate_checked(objective, &candidate)?;
        let u = open_uniform(&mut rng);
        trace.record(candidate.clone(), y, 0.0, 0.0, None, None);
        if metropolis_accept((y - current_y) / spread, temp, u) {
            current = candidate;
            current_y = y;
        }
        temp *= cfg.cooling;
    }
    Ok(trace)
}
