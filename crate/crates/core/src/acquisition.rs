//! Monte-Carlo acquisition utilities under a single Thompson weight draw.
//!
//! Everything follows the minimization convention with utilities oriented
//! so that larger is better: the inner loop ascends. The predictive
//! distribution is `y ~ N(M_theta(x), obs_sigma^2)` and expectations use a
//! fixed set of standard-normal draws, so values are smooth in the
//! predicted mean and can be compared across candidates with common random
//! numbers.

use alloc::format;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Graph, NodeId};
use crate::math;
use crate::relaxation::{RelaxedAssignment, RelaxedObjective};
use crate::rng::standard_normal;
use crate::surrogate::{MlpArchitecture, Predictor, WeightSample};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    /// Expected improvement `E[max(0, y* - y)]`.
    Ei,
    /// Probability of improvement with a sigmoid in place of the indicator.
    Pi,
    /// Simple regret, `-E[y]`.
    Sr,
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ei" => Ok(Self::Ei),
            "pi" => Ok(Self::Pi),
            "sr" => Ok(Self::Sr),
            other => Err(Error::Contract(format!("unknown acquisition kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub kind: AcquisitionKind,
    /// Best observed objective, in the same units as the predictions.
    pub incumbent: f64,
    pub mc_y_samples: usize,
    pub pi_sharpness: f64,
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_y_samples == 0 || !(self.pi_sharpness > 0.0) || !self.incumbent.is_finite() {
            return Err(Error::Contract(format!("invalid acquisition config {self:?}")));
        }
        Ok(())
    }
}

/// Utility value and its derivative with respect to the predicted mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcqValue {
    pub value: f64,
    pub d_mean: f64,
}

/// Acquisition at `mean` with the standard-normal draws `eps`.
pub fn acq_value_with_noise(cfg: &AcquisitionConfig, mean: f64, obs_sigma: f64, eps: &[f64]) -> Result<AcqValue> {
    cfg.validate()?;
    if cfg.kind == AcquisitionKind::Sr {
        return Ok(AcqValue { value: -mean, d_mean: -1.0 });
    }
    if eps.is_empty() {
        return Err(Error::Contract("Monte-Carlo acquisition needs at least one draw".into()));
    }
    let (mut value, mut d_mean) = (0.0, 0.0);
    for &e in eps {
        let gap = cfg.incumbent - (mean + obs_sigma * e);
        match cfg.kind {
            AcquisitionKind::Ei => {
                if gap > 0.0 {
                    value += gap;
                    d_mean -= 1.0;
                }
            }
            AcquisitionKind::Pi => {
                let s = math::sigmoid(cfg.pi_sharpness * gap);
                value += s;
                d_mean -= cfg.pi_sharpness * s * (1.0 - s);
            }
            AcquisitionKind::Sr => unreachable!(),
        }
    }
    let m = eps.len() as f64;
    Ok(AcqValue { value: value / m, d_mean: d_mean / m })
}

/// `mc_y_samples` standard-normal draws (none for SR, which is closed form).
pub fn draw_y_noise<R: Rng + ?Sized>(cfg: &AcquisitionConfig, rng: &mut R) -> Vec<f64> {
    match cfg.kind {
        AcquisitionKind::Sr => Vec::new(),
        _ => (0..cfg.mc_y_samples).map(|_| standard_normal(rng)).collect(),
    }
}

/// Acquisition at `mean` with fresh reparameterized draws.
pub fn acq_value<R: Rng + ?Sized>(cfg: &AcquisitionConfig, mean: f64, obs_sigma: f64, rng: &mut R) -> Result<AcqValue> {
    let eps = draw_y_noise(cfg, rng);
    acq_value_with_noise(cfg, mean, obs_sigma, &eps)
}

/// Appends the acquisition of the scalar node `mean` to `graph`.
pub fn append_acquisition(
    graph: &mut Graph,
    mean: NodeId,
    cfg: &AcquisitionConfig,
    obs_sigma: f64,
    eps: &[f64],
) -> Result<NodeId> {
    cfg.validate()?;
    if cfg.kind == AcquisitionKind::Sr {
        return graph.scale(mean, -1.0);
    }
    if eps.is_empty() {
        return Err(Error::Contract("Monte-Carlo acquisition needs at least one draw".into()));
    }
    let spread: Vec<f64> = eps.iter().map(|e| obs_sigma * e).collect();
    let spread = graph.constant(&spread);
    let y = graph.add_scalar(spread, mean)?;
    let neg = graph.scale(y, -1.0)?;
    let gap = graph.shift(neg, cfg.incumbent)?;
    let utility = match cfg.kind {
        AcquisitionKind::Ei => graph.max_const(gap, 0.0)?,
        AcquisitionKind::Pi => {
            let sharp = graph.scale(gap, cfg.pi_sharpness)?;
            graph.sigmoid(sharp)?
        }
        AcquisitionKind::Sr => unreachable!(),
    };
    let total = graph.sum(utility)?;
    graph.scale(total, 1.0 / eps.len() as f64)
}

/// The acquisition of the surrogate under one weight draw, as a function of
/// a relaxed input.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateAcquisition<'a> {
    pub arch: &'a MlpArchitecture,
    pub theta: &'a WeightSample,
    pub cfg: &'a AcquisitionConfig,
    pub obs_sigma: f64,
    pub eps: &'a [f64],
}

impl RelaxedObjective for SurrogateAcquisition<'_> {
    fn append(&self, graph: &mut Graph, relaxed: NodeId) -> Result<NodeId> {
        let theta = graph.constant(&self.theta.0);
        let mean = self.arch.append(graph, theta, relaxed)?;
        append_acquisition(graph, mean, self.cfg, self.obs_sigma, self.eps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchAcquisition {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Index of the first maximal value.
    pub best: usize,
}

/// Evaluates `predict` then the acquisition for each sample of a batch.
pub fn expected_acq_over_batch(
    samples: &[RelaxedAssignment],
    theta: &WeightSample,
    arch: &MlpArchitecture,
    cfg: &AcquisitionConfig,
    obs_sigma: f64,
    eps: &[f64],
) -> Result<BatchAcquisition> {
    if samples.is_empty() {
        return Err(Error::Contract("empty candidate batch".into()));
    }
    let mut predictor = Predictor::new(arch, theta)?;
    let mut values = Vec::with_capacity(samples.len());
    for s in samples {
        let mean = predictor.predict(&s.0)?;
        values.push(acq_value_with_noise(cfg, mean, obs_sigma, eps)?.value);
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(BatchAcquisition { values, mean, best })
}
