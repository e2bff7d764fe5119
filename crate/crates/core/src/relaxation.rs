//! Concrete (Gumbel-softmax) relaxation of the proposal distribution over a
//! discrete search space.
//!
//! Each variable `i` carries `k_i` logits. A relaxed sample of variable `i`
//! is `softmax((logits_i + g) / temperature)` with Gumbel noise `g`; binary
//! variables use the same two-category form so every input the surrogate
//! sees is a concatenation of simplex vectors. The scalar binary-concrete
//! sampler is kept for parity checks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::diffcore::{softmax_into, Graph, NodeId};
use crate::math;
use crate::rng::{open_uniform, standard_normal};
pub use crate::space::{HardAssignment, SearchSpace};
use crate::{Error, Result};

/// Logits of the relaxed proposal `q(x | alpha)` (flattened per-variable
/// blocks, `alpha = exp(logits)`) and the concrete temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalParams {
    pub logits: Vec<f64>,
    pub temperature: f64,
}

/// Concatenated per-variable simplex vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedAssignment(pub Vec<f64>);

impl ProposalParams {
    pub fn new(space: &SearchSpace, logits: Vec<f64>, temperature: f64) -> Result<Self> {
        if logits.len() != space.one_hot_width() {
            return Err(Error::Shape(format!(
                "{} logits for one-hot width {}",
                logits.len(),
                space.one_hot_width()
            )));
        }
        check_temperature(temperature)?;
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Contract("proposal logits must be finite".into()));
        }
        Ok(Self { logits, temperature })
    }

    /// Independent `N(0, 1)` logits.
    pub fn random<R: Rng + ?Sized>(space: &SearchSpace, temperature: f64, rng: &mut R) -> Result<Self> {
        let logits = (0..space.one_hot_width()).map(|_| standard_normal(rng)).collect();
        Self::new(space, logits, temperature)
    }

    /// Logits of variable `dim`.
    pub fn block(&self, space: &SearchSpace, dim: usize) -> &[f64] {
        let start: usize = space.cardinalities()[..dim].iter().sum();
        &self.logits[start..start + space.cardinalities()[dim]]
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Contract(format!("temperature {t} must be positive")))
    }
}

/// `-ln(-ln u)`.
#[inline]
pub fn gumbel_from_uniform(u: f64) -> f64 {
    -math::ln(-math::ln(u))
}

pub fn fill_gumbel<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    out.iter_mut().for_each(|g| *g = gumbel_from_uniform(open_uniform(rng)));
}

/// `n` Gumbel draws from clamped uniforms.
pub fn sample_gumbel<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut g = vec![0.0; n];
    fill_gumbel(rng, &mut g);
    g
}

/// Relaxed sample of variable `dim` given its Gumbel noise `g`.
pub fn sample_concrete(params: &ProposalParams, space: &SearchSpace, g: &[f64], dim: usize) -> Result<Vec<f64>> {
    check_temperature(params.temperature)?;
    let logits = params.block(space, dim);
    if g.len() != logits.len() {
        return Err(Error::Shape(format!("{} noise values for {} categories", g.len(), logits.len())));
    }
    let z: Vec<f64> = logits.iter().zip(g).map(|(l, g)| (l + g) / params.temperature).collect();
    let mut out = vec![0.0; z.len()];
    softmax_into(&mut out, &z);
    Ok(out)
}

/// Relaxed sample of every variable; `g` spans the full one-hot width.
pub fn sample_concrete_all(params: &ProposalParams, space: &SearchSpace, g: &[f64]) -> Result<RelaxedAssignment> {
    check_temperature(params.temperature)?;
    if g.len() != params.logits.len() {
        return Err(Error::Shape(format!("{} noise values for {} logits", g.len(), params.logits.len())));
    }
    let z: Vec<f64> = params.logits.iter().zip(g).map(|(l, g)| (l + g) / params.temperature).collect();
    let mut out = vec![0.0; z.len()];
    let mut at = 0;
    for &k in space.cardinalities() {
        softmax_into(&mut out[at..at + k], &z[at..at + k]);
        at += k;
    }
    Ok(RelaxedAssignment(out))
}

/// Scalar binary-concrete sample `sigmoid((log_alpha + logit(u)) / temperature)`.
pub fn sample_binary_concrete(log_alpha: f64, temperature: f64, u: f64) -> f64 {
    let g = math::ln(u) - math::ln(1.0 - u);
    math::sigmoid((log_alpha + g) / temperature)
}

/// First index of the maximum.
fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn discretize_blocks(values: &[f64], space: &SearchSpace) -> HardAssignment {
    let mut at = 0;
    let cats = space
        .cardinalities()
        .iter()
        .map(|&k| {
            let c = argmax_first(&values[at..at + k]);
            at += k;
            c
        })
        .collect();
    HardAssignment(cats)
}

/// Mode of the proposal: per-variable argmax of the logits (ties to the
/// lowest index).
pub fn discretize_logits(params: &ProposalParams, space: &SearchSpace) -> HardAssignment {
    discretize_blocks(&params.logits, space)
}

/// Per-variable argmax of a relaxed sample (ties to the lowest index).
pub fn discretize(relaxed: &RelaxedAssignment, space: &SearchSpace) -> HardAssignment {
    discretize_blocks(&relaxed.0, space)
}

/// A scalar function of a relaxed assignment that can be expressed on a
/// [`Graph`]. `append` receives the node holding the relaxed input and
/// returns a scalar node; any constants it needs become graph leaves.
pub trait RelaxedObjective {
    fn append(&self, graph: &mut Graph, relaxed: NodeId) -> Result<NodeId>;
}

/// Reusable graph `logits, noise -> concrete sample -> objective`.
#[derive(Debug, Clone)]
pub struct ConcreteGraph {
    graph: Graph,
    logits: NodeId,
    noise: NodeId,
    inv_temp: NodeId,
    relaxed: NodeId,
    output: NodeId,
}

impl ConcreteGraph {
    pub fn new<O: RelaxedObjective + ?Sized>(space: &SearchSpace, objective: &O) -> Result<Self> {
        let width = space.one_hot_width();
        let mut graph = Graph::new();
        let logits = graph.variable(width);
        let noise = graph.input(width);
        let inv_temp = graph.input(1);
        let shifted = graph.add(logits, noise)?;
        let scaled = graph.mul_scalar(shifted, inv_temp)?;
        let relaxed = graph.softmax_blocks(scaled, space.cardinalities())?;
        let output = objective.append(&mut graph, relaxed)?;
        if graph.value(output).len() != 1 {
            return Err(Error::Shape("relaxed objective must return a scalar node".into()));
        }
        Ok(Self { graph, logits, noise, inv_temp, relaxed, output })
    }

    fn load(&mut self, logits: &[f64], noise: &[f64], temperature: f64) -> Result<()> {
        check_temperature(temperature)?;
        self.graph.set(self.logits, logits)?;
        self.graph.set(self.noise, noise)?;
        self.graph.set(self.inv_temp, &[1.0 / temperature])?;
        self.graph.forward()
    }

    pub fn value(&mut self, logits: &[f64], noise: &[f64], temperature: f64) -> Result<f64> {
        self.load(logits, noise, temperature)?;
        Ok(self.graph.value(self.output)[0])
    }

    /// Objective value; its gradient w.r.t. the logits is added to `grad`.
    pub fn value_and_grad(&mut self, logits: &[f64], noise: &[f64], temperature: f64, grad: &mut [f64]) -> Result<f64> {
        self.load(logits, noise, temperature)?;
        self.graph.backward(self.output)?;
        grad.iter_mut().zip(self.graph.adjoint(self.logits)).for_each(|(g, a)| *g += a);
        Ok(self.graph.value(self.output)[0])
    }

    /// Relaxed sample from the last evaluation.
    pub fn relaxed(&self) -> &[f64] {
        self.graph.value(self.relaxed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathwiseEstimate {
    /// Monte-Carlo mean of the objective over the batch.
    pub value: f64,
    /// Monte-Carlo mean of the per-sample pathwise gradients.
    pub grad: Vec<f64>,
}

/// Reparameterized gradient of `E_q[objective]` w.r.t. the logits, averaged
/// over `batch` Gumbel draws.
pub fn pathwise_grad<O, R>(
    objective: &O,
    params: &ProposalParams,
    space: &SearchSpace,
    batch: usize,
    rng: &mut R,
) -> Result<PathwiseEstimate>
where
    O: RelaxedObjective + ?Sized,
    R: Rng + ?Sized,
{
    if batch == 0 {
        return Err(Error::Contract("pathwise_grad needs batch >= 1".into()));
    }
    let mut cg = ConcreteGraph::new(space, objective)?;
    let width = space.one_hot_width();
    let mut noise = vec![0.0; width];
    let mut grad = vec![0.0; width];
    let mut sample_grad = vec![0.0; width];
    let mut total = 0.0;
    for s in 0..batch {
        fill_gumbel(rng, &mut noise);
        sample_grad.iter_mut().for_each(|g| *g = 0.0);
        total += cg
            .value_and_grad(&params.logits, &noise, params.temperature, &mut sample_grad)
            .map_err(|e| match e {
                Error::NonFiniteNode { .. } => Error::NonFiniteGradient { sample: s },
                other => other,
            })?;
        if sample_grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { sample: s });
        }
        grad.iter_mut().zip(&sample_grad).for_each(|(g, s)| *g += s);
    }
    let n = batch as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok(PathwiseEstimate { value: total / n, grad })
}
