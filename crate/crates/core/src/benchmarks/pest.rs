//! Staged pest control with four pesticides.
//!
//! Category 0 means no action, in which case the pest fraction spreads as
//! `z' = a + (1 - a) z`. Pesticide `l` instead gives `z' = (1 - r) z` with a
//! control rate `r ~ Beta(1, beta_l)`. Every prior use of a pesticide makes
//! pests more tolerant of it (`beta_l` grows by `tolerance_l / stages`) and
//! makes it cheaper (its price is multiplied by `1 - max_discount_l / stages`).
//! The objective is the total price paid plus `(penalty / T)` times the number
//! of (stage, replicate) pairs whose fraction ends above the threshold.
//!
//! Control rates come from frozen uniforms through the Beta(1, b) quantile
//! `1 - (1 - u)^(1/b)`, shared by all pesticides, so a pesticide with a
//! smaller `beta` controls at least as well on every replicate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Distribution;
use crate::math;
use crate::optimizer::Objective;
use crate::rng::{open_uniform, SeedLadder};
use crate::space::{HardAssignment, SearchSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pesticide {
    pub price: f64,
    /// Second shape parameter of the control-rate Beta law before any use.
    pub resistance: f64,
    pub tolerance: f64,
    pub max_discount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PestConfig {
    pub stages: usize,
    pub replicates: usize,
    pub threshold: f64,
    pub penalty: f64,
    pub init_fraction: Distribution,
    pub spread_rate: Distribution,
    pub pesticides: Vec<Pesticide>,
}

impl Default for PestConfig {
    fn default() -> Self {
        let p = |price, resistance, tolerance, max_discount| Pesticide { price, resistance, tolerance, max_discount };
        Self {
            stages: 21,
            replicates: 100,
            threshold: 0.1,
            penalty: 1.0,
            init_fraction: Distribution::Beta(1.0, 30.0),
            spread_rate: Distribution::Beta(1.0, 17.0 / 3.0),
            pesticides: vec![
                p(1.0, 2.0 / 7.0, 1.0 / 7.0, 0.2),
                p(0.8, 3.0 / 7.0, 2.5 / 7.0, 0.3),
                p(0.7, 3.0 / 7.0, 2.0 / 7.0, 0.3),
                p(0.5, 5.0 / 7.0, 0.5 / 7.0, 0.0),
            ],
        }
    }
}

impl PestConfig {
    pub fn validate(&self) -> Result<()> {
        for law in [self.init_fraction, self.spread_rate] {
            law.validate()?;
            if !law.within_unit() {
                return Err(Error::Contract(format!("pest law {law:?} must stay in [0, 1]")));
            }
        }
        let bad_pesticide = self.pesticides.iter().any(|p| {
            !(p.price >= 0.0 && p.resistance > 0.0 && p.tolerance >= 0.0 && (0.0..=self.stages as f64).contains(&p.max_discount))
        });
        if self.stages == 0 || self.replicates == 0 || self.pesticides.is_empty() || bad_pesticide {
            return Err(Error::Contract(format!("invalid pest config {self:?}")));
        }
        Ok(())
    }

    pub fn categories(&self) -> usize {
        self.pesticides.len() + 1
    }
}

#[derive(Debug, Clone)]
pub struct PestInstance {
    space: SearchSpace,
    config: PestConfig,
    init: Vec<f64>,
    /// Stage-major: entry `i * replicates + k`.
    spread: Vec<f64>,
    control_uniform: Vec<f64>,
}

impl PestInstance {
    pub fn new(config: &PestConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let ladder = SeedLadder::new(seed).child(0x9E57);
        let cells = config.stages * config.replicates;
        let mut rng = ladder.child(0).rng();
        let init = (0..config.replicates).map(|_| config.init_fraction.sample(&mut rng)).collect();
        let mut rng = ladder.child(1).rng();
        let spread = (0..cells).map(|_| config.spread_rate.sample(&mut rng)).collect();
        let mut rng = ladder.child(2).rng();
        let control_uniform = (0..cells).map(|_| open_uniform(&mut rng)).collect();
        Ok(Self {
            space: SearchSpace::categorical(config.stages, config.categories())?,
            config: config.clone(),
            init,
            spread,
            control_uniform,
        })
    }

    pub fn config(&self) -> &PestConfig {
        &self.config
    }

    pub fn initial_fractions(&self) -> &[f64] {
        &self.init
    }

    pub fn spread_rates(&self) -> &[f64] {
        &self.spread
    }

    pub fn control_uniforms(&self) -> &[f64] {
        &self.control_uniform
    }

    /// Total price paid and the threshold-exceedance count.
    pub fn simulate(&self, x: &HardAssignment) -> Result<(f64, usize)> {
        self.space.check(x)?;
        let c = &self.config;
        let t = c.replicates;
        let stages = c.stages as f64;
        let mut uses = vec![0usize; c.pesticides.len()];
        let mut z = self.init.clone();
        let mut paid = 0.0;
        let mut exceed = 0;
        for (i, &choice) in x.0.iter().enumerate() {
            let row = i * t..(i + 1) * t;
            if choice == 0 {
                for (zk, &a) in z.iter_mut().zip(&self.spread[row]) {
                    *zk = a + (1.0 - a) * *zk;
                }
            } else {
                let p = &c.pesticides[choice - 1];
                let n = uses[choice - 1];
                let beta = p.resistance + p.tolerance * n as f64 / stages;
                paid += p.price * math::powi(1.0 - p.max_discount / stages, n as i32);
                for (zk, &u) in z.iter_mut().zip(&self.control_uniform[row]) {
                    let rate = 1.0 - math::powf(1.0 - u, 1.0 / beta);
                    *zk *= 1.0 - rate;
                }
                uses[choice - 1] += 1;
            }
            exceed += z.iter().filter(|&&zk| zk > c.threshold).count();
        }
        Ok((paid, exceed))
    }
}

impl Objective for PestInstance {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &HardAssignment) -> Result<f64> {
        let (paid, exceed) = self.simulate(x)?;
        Ok(paid + self.config.penalty * exceed as f64 / self.config.replicates as f64)
    }
}
