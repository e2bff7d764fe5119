//! Sparsifying a zero-field Ising model on a 4x4 grid.
//!
//! Spins `z in {-1, +1}^16` follow `p(z) ∝ exp(z' J z)` with `J` symmetric,
//! so each of the 24 grid edges contributes `2 J_e z_a z_b`. A dropout vector
//! `x` keeps edge `e` when `x_e = 1`, giving the approximation `q` with
//! couplings `x_e J_e`. The objective is `KL(p || q) + lambda * |x|_1`.
//!
//! Writing `s_e = z_a z_b`, the divergence reduces to
//! `sum_e 2 J_e (1 - x_e) E_p[s_e] - log Z_p + log Z_q`. The correlations
//! `E_p[s_e]` come from one pass over the 2^16 states at construction; each
//! evaluation then needs only `log Z_q`, computed row by row with a 16x16
//! transfer matrix. The full state sum is kept as a second route.

use alloc::vec::Vec;
use alloc::{format, vec};

use serde::{Deserialize, Serialize};

use super::Distribution;
use crate::math;
use crate::optimizer::Objective;
use crate::rng::SeedLadder;
use crate::space::{HardAssignment, SearchSpace};
use crate::{Error, Result};

pub const ISING_SIDE: usize = 4;
pub const ISING_SPINS: usize = ISING_SIDE * ISING_SIDE;
pub const ISING_EDGES: usize = 2 * ISING_SIDE * (ISING_SIDE - 1);
const STATES: usize = 1 << ISING_SPINS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingConfig {
    pub coupling: Distribution,
}

impl Default for IsingConfig {
    fn default() -> Self {
        Self { coupling: Distribution::Uniform(0.05, 0.5) }
    }
}

/// Grid edges: horizontal ones row by row, then vertical ones.
pub fn grid_edges() -> Vec<(usize, usize)> {
    let at = |r: usize, c: usize| r * ISING_SIDE + c;
    let mut edges = Vec::with_capacity(ISING_EDGES);
    for r in 0..ISING_SIDE {
        for c in 0..ISING_SIDE - 1 {
            edges.push((at(r, c), at(r, c + 1)));
        }
    }
    for r in 0..ISING_SIDE - 1 {
        for c in 0..ISING_SIDE {
            edges.push((at(r, c), at(r + 1, c)));
        }
    }
    edges
}

#[derive(Debug, Clone)]
pub struct IsingInstance {
    space: SearchSpace,
    edges: Vec<(usize, usize)>,
    couplings: Vec<f64>,
    reg_lambda: f64,
    /// Bit `e` is set when the endpoints of edge `e` agree in that state.
    agree: Vec<u32>,
    log_z: f64,
    /// `E_p[z_a z_b]` per edge.
    correlations: Vec<f64>,
}

impl IsingInstance {
    pub fn new(config: &IsingConfig, seed: u64, reg_lambda: f64) -> Result<Self> {
        config.coupling.validate()?;
        let mut rng = SeedLadder::new(seed).child(0x151).rng();
        let couplings = (0..ISING_EDGES).map(|_| config.coupling.sample(&mut rng)).collect();
        Self::with_couplings(couplings, reg_lambda)
    }

    pub fn with_couplings(couplings: Vec<f64>, reg_lambda: f64) -> Result<Self> {
        if couplings.len() != ISING_EDGES || couplings.iter().any(|j| !j.is_finite()) {
            return Err(Error::Contract(format!("need {ISING_EDGES} finite couplings")));
        }
        if !(reg_lambda >= 0.0) {
            return Err(Error::Contract(format!("reg_lambda must be >= 0, got {reg_lambda}")));
        }
        let edges = grid_edges();
        let agree: Vec<u32> = (0..STATES as u32)
            .map(|state| {
                edges.iter().enumerate().fold(0u32, |m, (e, &(a, b))| {
                    let same = ((state >> a) ^ (state >> b)) & 1 == 0;
                    m | (u32::from(same) << e)
                })
            })
            .collect();
        let mut inst = Self {
            space: SearchSpace::binary(ISING_EDGES)?,
            edges,
            couplings,
            reg_lambda,
            agree,
            log_z: 0.0,
            correlations: vec![0.0; ISING_EDGES],
        };
        inst.log_z = log_partition(&inst.couplings);
        let mut corr = vec![0.0; ISING_EDGES];
        let tables = ByteTables::new(&inst.couplings);
        let total: f64 = inst.couplings.iter().sum();
        for &mask in &inst.agree {
            let p = math::exp(2.0 * (2.0 * tables.agree_sum(mask) - total) - inst.log_z);
            for (e, c) in corr.iter_mut().enumerate() {
                *c += if mask >> e & 1 == 1 { p } else { -p };
            }
        }
        inst.correlations = corr;
        Ok(inst)
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn reg_lambda(&self) -> f64 {
        self.reg_lambda
    }

    pub fn log_partition_p(&self) -> f64 {
        self.log_z
    }

    pub fn correlations(&self) -> &[f64] {
        &self.correlations
    }

    /// [`log_partition`] by direct summation over all 2^16 states.
    pub fn log_partition_by_enumeration(&self, weights: &[f64]) -> f64 {
        let tables = ByteTables::new(weights);
        let total: f64 = weights.iter().sum();
        // 4 * (largest possible agreeing weight) bounds every exponent.
        let shift = 4.0 * weights.iter().map(|w| w.max(0.0)).sum::<f64>();
        let sum: f64 = self.agree.iter().map(|&m| math::exp(4.0 * tables.agree_sum(m) - shift)).sum();
        shift - 2.0 * total + math::ln(sum)
    }

    /// `p(z)` for each of the 2^16 states; bit `s` of the index is spin `s`
    /// being `+1`.
    pub fn probabilities(&self) -> Vec<f64> {
        let tables = ByteTables::new(&self.couplings);
        let total: f64 = self.couplings.iter().sum();
        self.agree
            .iter()
            .map(|&m| math::exp(2.0 * (2.0 * tables.agree_sum(m) - total) - self.log_z))
            .collect()
    }

    pub fn kl(&self, x: &HardAssignment) -> Result<f64> {
        self.space.check(x)?;
        let mut kept = [0.0; ISING_EDGES];
        let mut dropped = 0.0;
        for (e, slot) in kept.iter_mut().enumerate() {
            if x.0[e] == 1 {
                *slot = self.couplings[e];
            } else {
                dropped += 2.0 * self.couplings[e] * self.correlations[e];
            }
        }
        Ok(dropped - self.log_z + log_partition(&kept))
    }
}

impl Objective for IsingInstance {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &HardAssignment) -> Result<f64> {
        Ok(self.kl(x)? + self.reg_lambda * x.count_nonzero() as f64)
    }
}

/// `log sum_z exp(2 sum_e w_e z_a z_b)` over the 4x4 grid, summing out one
/// row of spins at a time. Every edge factor is divided by `exp(2 |w_e|)` so
/// the running sums stay at most 1; the shift is added back at the end.
pub fn log_partition(weights: &[f64]) -> f64 {
    assert_eq!(weights.len(), ISING_EDGES, "one weight per grid edge");
    const ROW_STATES: usize = 1 << ISING_SIDE;
    let mut agree = [0.0; ISING_EDGES];
    let mut differ = [0.0; ISING_EDGES];
    for (e, &w) in weights.iter().enumerate() {
        agree[e] = math::exp(2.0 * w - 2.0 * w.abs());
        differ[e] = math::exp(-2.0 * w - 2.0 * w.abs());
    }
    let factor = |e: usize, same: bool| if same { agree[e] } else { differ[e] };
    let horizontal = |r: usize| r * (ISING_SIDE - 1);
    let vertical = |r: usize| ISING_SIDE * (ISING_SIDE - 1) + r * ISING_SIDE;

    // Weight of the horizontal edges inside row `r` in state `s`.
    let row_weight = |r: usize, s: usize| {
        (0..ISING_SIDE - 1).fold(1.0, |acc, c| {
            acc * factor(horizontal(r) + c, (s >> c ^ s >> (c + 1)) & 1 == 0)
        })
    };
    let mut alpha = [0.0; ROW_STATES];
    for (s, a) in alpha.iter_mut().enumerate() {
        *a = row_weight(0, s);
    }
    for r in 0..ISING_SIDE - 1 {
        // Vertical edges between rows r and r+1 depend only on which columns differ.
        let mut link = [0.0; ROW_STATES];
        for (d, l) in link.iter_mut().enumerate() {
            *l = (0..ISING_SIDE).fold(1.0, |acc, c| {
                acc * factor(vertical(r) + c, d >> c & 1 == 0)
            });
        }
        let mut next = [0.0; ROW_STATES];
        for (t, n) in next.iter_mut().enumerate() {
            let inflow: f64 = alpha.iter().enumerate().map(|(s, a)| a * link[s ^ t]).sum();
            *n = inflow * row_weight(r + 1, t);
        }
        alpha = next;
    }
    let shift: f64 = weights.iter().map(|w| 2.0 * w.abs()).sum();
    shift + math::ln(alpha.iter().sum())
}

/// Subset sums of the weights, one table per byte of the agreement mask.
struct ByteTables([[f64; 256]; 3]);

impl ByteTables {
    fn new(weights: &[f64]) -> Self {
        let mut t = [[0.0; 256]; 3];
        for (k, table) in t.iter_mut().enumerate() {
            for (byte, slot) in table.iter_mut().enumerate() {
                *slot = (0..8)
                    .filter(|b| byte >> b & 1 == 1)
                    .filter_map(|b| weights.get(8 * k + b))
                    .sum();
            }
        }
        Self(t)
    }

    #[inline]
    fn agree_sum(&self, mask: u32) -> f64 {
        self.0[0][(mask & 0xff) as usize] + self.0[1][(mask >> 8 & 0xff) as usize] + self.0[2][(mask >> 16 & 0xff) as usize]
    }
}
