//! Staged food-contamination control.
//!
//! At stage `i` the contaminated fraction moves as
//! `z_i = a_i (1 - x_i)(1 - z_{i-1}) + (1 - g_i x_i) z_{i-1}`, where `x_i = 1`
//! buys a prevention step at cost `c_i`, `a_i` is the contamination rate and
//! `g_i` the decontamination rate. Each of `T` replicates has its own rates
//! and starting fraction. The objective is
//! `sum_i [c_i x_i + (rho / T) sum_k 1{z_i^k > u}] + lambda * |x|_1`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Distribution;
use crate::optimizer::Objective;
use crate::rng::SeedLadder;
use crate::space::{HardAssignment, SearchSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationConfig {
    pub stages: usize,
    pub replicates: usize,
    pub threshold: f64,
    pub cost: f64,
    pub penalty: f64,
    pub init_fraction: Distribution,
    pub contamination_rate: Distribution,
    pub decontamination_rate: Distribution,
}

impl Default for ContaminationConfig {
    fn default() -> Self {
        Self {
            stages: 21,
            replicates: 100,
            threshold: 0.1,
            cost: 1.0,
            penalty: 1.0,
            init_fraction: Distribution::Beta(1.0, 30.0),
            contamination_rate: Distribution::Beta(1.0, 17.0 / 3.0),
            decontamination_rate: Distribution::Beta(1.0, 3.0 / 7.0),
        }
    }
}

impl ContaminationConfig {
    pub fn validate(&self) -> Result<()> {
        let laws = [self.init_fraction, self.contamination_rate, self.decontamination_rate];
        for law in laws {
            law.validate()?;
            if !law.within_unit() {
                return Err(Error::Contract(format!("contamination law {law:?} must stay in [0, 1]")));
            }
        }
        if self.stages == 0 || self.replicates == 0 || !self.cost.is_finite() || !self.penalty.is_finite() {
            return Err(Error::Contract(format!("invalid contamination config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ContaminationInstance {
    space: SearchSpace,
    config: ContaminationConfig,
    reg_lambda: f64,
    init: Vec<f64>,
    /// Stage-major: entry `i * replicates + k`.
    contamination: Vec<f64>,
    decontamination: Vec<f64>,
}

impl ContaminationInstance {
    pub fn new(config: &ContaminationConfig, seed: u64, reg_lambda: f64) -> Result<Self> {
        config.validate()?;
        if !(reg_lambda >= 0.0) {
            return Err(Error::Contract(format!("reg_lambda must be >= 0, got {reg_lambda}")));
        }
        let ladder = SeedLadder::new(seed).child(0xC0);
        let draw = |label: u64, law: Distribution, n: usize| {
            let mut rng = ladder.child(label).rng();
            (0..n).map(|_| law.sample(&mut rng)).collect::<Vec<f64>>()
        };
        let cells = config.stages * config.replicates;
        Ok(Self {
            space: SearchSpace::binary(config.stages)?,
            config: *config,
            reg_lambda,
            init: draw(0, config.init_fraction, config.replicates),
            contamination: draw(1, config.contamination_rate, cells),
            decontamination: draw(2, config.decontamination_rate, cells),
        })
    }

    pub fn config(&self) -> &ContaminationConfig {
        &self.config
    }

    /// Contaminated fraction after each stage, stage-major like the rates.
    pub fn trajectories(&self, x: &HardAssignment) -> Result<Vec<f64>> {
        self.space.check(x)?;
        let t = self.config.replicates;
        let mut z = self.init.clone();
        let mut out = Vec::with_capacity(self.contamination.len());
        for (i, &xi) in x.0.iter().enumerate() {
            let act = xi as f64;
            for (k, zk) in z.iter_mut().enumerate() {
                let a = self.contamination[i * t + k];
                let g = self.decontamination[i * t + k];
                *zk = a * (1.0 - act) * (1.0 - *zk) + (1.0 - g * act) * *zk;
                out.push(*zk);
            }
        }
        Ok(out)
    }
}

impl Objective for ContaminationInstance {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &HardAssignment) -> Result<f64> {
        let c = &self.config;
        let exceed = self.trajectories(x)?.iter().filter(|&&z| z > c.threshold).count();
        let used = x.count_nonzero() as f64;
        Ok(c.cost * used + c.penalty * exceed as f64 / c.replicates as f64 + self.reg_lambda * used)
    }
}
