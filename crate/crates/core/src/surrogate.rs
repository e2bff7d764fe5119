//! Mean-field variational Bayesian neural network surrogate.
//!
//! Weights follow `q(theta) = N(mu, diag(sigma^2))` with
//! `sigma = softplus(rho)`. Training maximizes
//! `E_q[log p(D | theta)] - kl_weight * KL(q || N(0, prior_sigma^2))`
//! with reparameterized draws for the likelihood and the closed-form
//! Gaussian KL. Targets are standardized over the dataset before fitting.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::diffcore::{Graph, NodeId};
use crate::math;
use crate::rng::{fill_standard_normal, standard_normal};
use crate::space::{HardAssignment, SearchSpace};
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

/// Fully connected network with a scalar output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

/// Location of one dense layer inside the flat parameter vector: a
/// row-major `rows x cols` weight block followed by `rows` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub bias: usize,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, activation: Activation) -> Result<Self> {
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::Contract(format!("layer sizes must be >= 1: {input_dim} -> {hidden:?}")));
        }
        Ok(Self { input_dim, hidden, activation })
    }

    /// Network over the one-hot encoding of `space`.
    pub fn for_space(space: &SearchSpace, hidden: Vec<usize>, activation: Activation) -> Result<Self> {
        Self::new(space.one_hot_width(), hidden, activation)
    }

    pub fn layers(&self) -> Vec<LayerSlot> {
        let mut slots = Vec::with_capacity(self.hidden.len() + 1);
        let mut cols = self.input_dim;
        let mut offset = 0;
        for &rows in self.hidden.iter().chain(core::iter::once(&1)) {
            slots.push(LayerSlot { offset, rows, cols, bias: offset + rows * cols });
            offset += rows * cols + rows;
            cols = rows;
        }
        slots
    }

    pub fn num_params(&self) -> usize {
        self.layers().last().map_or(0, |l| l.bias + l.rows)
    }

    /// Appends the network applied to `x`, reading weights from `theta`.
    pub fn append(&self, graph: &mut Graph, theta: NodeId, x: NodeId) -> Result<NodeId> {
        let layers = self.layers();
        let mut h = x;
        for (i, l) in layers.iter().enumerate() {
            h = graph.matvec(theta, l.offset, l.rows, l.cols, Some(l.bias), h)?;
            if i + 1 < layers.len() {
                h = match self.activation {
                    Activation::Tanh => graph.tanh(h)?,
                    Activation::Relu => graph.relu(h)?,
                };
            }
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalPosterior {
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
}

impl VariationalPosterior {
    /// `mu ~ N(0, mu_std^2)`, every `sigma = init_sigma`.
    pub fn init<R: Rng + ?Sized>(arch: &MlpArchitecture, mu_std: f64, init_sigma: f64, rng: &mut R) -> Self {
        let n = arch.num_params();
        let mu = (0..n).map(|_| mu_std * standard_normal(rng)).collect();
        Self { mu, rho: vec![math::softplus_inv(init_sigma); n] }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.rho.iter().map(|&r| math::softplus(r)).collect()
    }

    pub fn validate(&self, arch: &MlpArchitecture) -> Result<()> {
        if self.mu.len() != self.rho.len() || self.mu.len() != arch.num_params() {
            return Err(Error::Shape(format!(
                "posterior lengths {}/{} for {} parameters",
                self.mu.len(),
                self.rho.len(),
                arch.num_params()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodConfig {
    /// Observation noise of the Gaussian likelihood (standardized units).
    pub obs_sigma: f64,
    /// Weight on the KL term; `None` means `1 / |D|`.
    #[serde(default)]
    pub kl_weight: Option<f64>,
    pub prior_sigma: f64,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self { obs_sigma: 0.1, kl_weight: None, prior_sigma: 1.0 }
    }
}

impl LikelihoodConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.obs_sigma > 0.0) || !(self.prior_sigma > 0.0) || self.kl_weight.is_some_and(|w| !(w >= 0.0)) {
            return Err(Error::Contract(format!("invalid likelihood config {self:?}")));
        }
        Ok(())
    }

    pub fn effective_kl_weight(&self, n: usize) -> f64 {
        self.kl_weight.unwrap_or(1.0 / n.max(1) as f64)
    }
}

/// One weight draw `theta = mu + sigma * eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSample(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct DataRow {
    pub x: HardAssignment,
    pub one_hot: Vec<f64>,
    pub y: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    rows: Vec<DataRow>,
    seen: BTreeSet<HardAssignment>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, space: &SearchSpace, x: HardAssignment, y: f64, iteration: usize) -> Result<()> {
        space.check(&x)?;
        if !y.is_finite() {
            return Err(Error::Contract(format!("non-finite target {y}")));
        }
        let one_hot = space.encode(&x);
        self.seen.insert(x.clone());
        self.rows.push(DataRow { x, one_hot, y, iteration });
        Ok(())
    }

    pub fn rows(&self) -> &[DataRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, x: &HardAssignment) -> bool {
        self.seen.contains(x)
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    pub fn best(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.y).reduce(f64::min)
    }
}

/// Affine map between raw objective values and zero-mean unit-variance
/// targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    pub fn from_targets(ys: &[f64]) -> Self {
        if ys.is_empty() {
            return Self::identity();
        }
        let std = stats::population_std(ys);
        Self { mean: stats::mean(ys), std: if std > 1e-12 { std } else { 1.0 } }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Closed-form `KL(N(mu, sigma^2) || N(0, prior_sigma^2))` summed over weights.
pub fn kl_divergence(posterior: &VariationalPosterior, prior_sigma: f64) -> f64 {
    let p2 = prior_sigma * prior_sigma;
    posterior
        .mu
        .iter()
        .zip(&posterior.rho)
        .map(|(&m, &r)| {
            let s = math::softplus(r);
            math::ln(prior_sigma / s) + (s * s + m * m) / (2.0 * p2) - 0.5
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElboEstimate {
    pub value: f64,
    pub log_likelihood: f64,
    pub kl: f64,
    pub grad_mu: Vec<f64>,
    pub grad_rho: Vec<f64>,
}

/// ELBO over a fixed-size batch of rows. Built once and re-run with new
/// inputs, targets and noise.
#[derive(Debug, Clone)]
struct ElboGraph {
    graph: Graph,
    mu: NodeId,
    rho: NodeId,
    eps: NodeId,
    inputs: Vec<NodeId>,
    targets: NodeId,
    lik_scale: NodeId,
    neg_kl_weight: NodeId,
    log_lik: NodeId,
    kl: NodeId,
    elbo: NodeId,
}

impl ElboGraph {
    fn new(arch: &MlpArchitecture, cfg: &LikelihoodConfig, batch: usize) -> Result<Self> {
        let n = arch.num_params();
        let mut g = Graph::new();
        let mu = g.variable(n);
        let rho = g.variable(n);
        let eps = g.input(n);
        let sigma = g.softplus(rho)?;
        let noise = g.mul(sigma, eps)?;
        let theta = g.add(mu, noise)?;

        let mut inputs = Vec::with_capacity(batch);
        let mut preds = Vec::with_capacity(batch);
        for _ in 0..batch {
            let x = g.input(arch.input_dim);
            preds.push(arch.append(&mut g, theta, x)?);
            inputs.push(x);
        }
        let targets = g.input(batch);
        let pred = g.concat(&preds)?;
        let resid = g.sub(pred, targets)?;
        let sq = g.mul(resid, resid)?;
        let sse = g.sum(sq)?;
        let s2 = cfg.obs_sigma * cfg.obs_sigma;
        let ll = g.scale(sse, -0.5 / s2)?;
        let log_lik = g.shift(ll, -0.5 * batch as f64 * (math::LN_2PI + math::ln(s2)))?;

        let p2 = cfg.prior_sigma * cfg.prior_sigma;
        let log_sigma = g.log(sigma)?;
        let sig2 = g.mul(sigma, sigma)?;
        let mu2 = g.mul(mu, mu)?;
        let second = g.add(sig2, mu2)?;
        let quad = g.scale(second, 0.5 / p2)?;
        let per_weight = g.sub(quad, log_sigma)?;
        let total = g.sum(per_weight)?;
        let kl = g.shift(total, n as f64 * (math::ln(cfg.prior_sigma) - 0.5))?;

        let lik_scale = g.input(1);
        let neg_kl_weight = g.input(1);
        let lik_term = g.mul_scalar(log_lik, lik_scale)?;
        let kl_term = g.mul_scalar(kl, neg_kl_weight)?;
        let elbo = g.add(lik_term, kl_term)?;
        Ok(Self { graph: g, mu, rho, eps, inputs, targets, lik_scale, neg_kl_weight, log_lik, kl, elbo })
    }

    fn load_posterior(&mut self, posterior: &VariationalPosterior) -> Result<()> {
        self.graph.set(self.mu, &posterior.mu)?;
        self.graph.set(self.rho, &posterior.rho)
    }

    /// Runs forward and backward for one noise draw; the likelihood is scaled
    /// by `lik_scale` (dataset size over batch size).
    fn run(&mut self, rows: &[&[f64]], targets: &[f64], eps: &[f64], lik_scale: f64, kl_weight: f64) -> Result<f64> {
        for (node, x) in self.inputs.iter().zip(rows) {
            self.graph.set(*node, x)?;
        }
        self.graph.set(self.targets, targets)?;
        self.graph.set(self.eps, eps)?;
        self.graph.set(self.lik_scale, &[lik_scale])?;
        self.graph.set(self.neg_kl_weight, &[-kl_weight])?;
        self.graph.forward()?;
        self.graph.backward(self.elbo)?;
        Ok(self.graph.value(self.elbo)[0])
    }
}

/// ELBO of `posterior` on the whole dataset (raw targets) with the given
/// noise draws, one per Monte-Carlo sample. Gradients are averaged over
/// draws.
pub fn elbo_with_noise(
    posterior: &VariationalPosterior,
    arch: &MlpArchitecture,
    cfg: &LikelihoodConfig,
    data: &Dataset,
    noise: &[Vec<f64>],
) -> Result<ElboEstimate> {
    if data.is_empty() {
        return Err(Error::Contract("ELBO of an empty dataset".into()));
    }
    if noise.is_empty() {
        return Err(Error::Contract("ELBO needs at least one Monte-Carlo sample".into()));
    }
    cfg.validate()?;
    posterior.validate(arch)?;
    let mut eg = ElboGraph::new(arch, cfg, data.len())?;
    eg.load_posterior(posterior)?;
    let rows: Vec<&[f64]> = data.rows().iter().map(|r| r.one_hot.as_slice()).collect();
    let targets = data.targets();
    let kl_weight = cfg.effective_kl_weight(data.len());
    let n = posterior.len();
    let mut est = ElboEstimate { value: 0.0, log_likelihood: 0.0, kl: 0.0, grad_mu: vec![0.0; n], grad_rho: vec![0.0; n] };
    for eps in noise {
        est.value += eg.run(&rows, &targets, eps, 1.0, kl_weight)?;
        est.log_likelihood += eg.graph.value(eg.log_lik)[0];
        est.kl = eg.graph.value(eg.kl)[0];
        est.grad_mu.iter_mut().zip(eg.graph.adjoint(eg.mu)).for_each(|(g, a)| *g += a);
        est.grad_rho.iter_mut().zip(eg.graph.adjoint(eg.rho)).for_each(|(g, a)| *g += a);
    }
    let m = noise.len() as f64;
    est.value /= m;
    est.log_likelihood /= m;
    est.grad_mu.iter_mut().chain(est.grad_rho.iter_mut()).for_each(|g| *g /= m);
    Ok(est)
}

/// Reparameterized Monte-Carlo ELBO on the whole dataset.
pub fn elbo<R: Rng + ?Sized>(
    posterior: &VariationalPosterior,
    arch: &MlpArchitecture,
    cfg: &LikelihoodConfig,
    data: &Dataset,
    mc_samples: usize,
    rng: &mut R,
) -> Result<ElboEstimate> {
    let noise: Vec<Vec<f64>> = (0..mc_samples)
        .map(|_| {
            let mut e = vec![0.0; posterior.len()];
            fill_standard_normal(rng, &mut e);
            e
        })
        .collect();
    elbo_with_noise(posterior, arch, cfg, data, &noise)
}

/// How long to train per call to [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSchedule {
    /// Full passes over the data; cost grows with `|D|`.
    Epochs(usize),
    /// A fixed number of minibatch steps regardless of `|D|`.
    Steps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub schedule: FitSchedule,
    pub lr: f64,
    pub batch: usize,
    pub mc_samples: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { schedule: FitSchedule::Epochs(200), lr: 1e-2, batch: 32, mc_samples: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub posterior: VariationalPosterior,
    pub standardizer: Standardizer,
    /// Minibatch ELBO estimate (standardized targets) at the last step, or
    /// `None` when no step was taken.
    pub final_elbo: Option<f64>,
}

/// Stochastic gradient ascent on the ELBO, starting from `init` (warm
/// start) or from a fresh initialization.
pub fn fit<R: Rng + ?Sized>(
    data: &Dataset,
    arch: &MlpArchitecture,
    cfg: &LikelihoodConfig,
    settings: &FitSettings,
    init: Option<VariationalPosterior>,
    rng: &mut R,
) -> Result<FitOutcome> {
    if data.is_empty() {
        return Err(Error::Contract("cannot fit an empty dataset".into()));
    }
    cfg.validate()?;
    if settings.batch == 0 || settings.mc_samples == 0 {
        return Err(Error::Contract("fit needs batch >= 1 and mc_samples >= 1".into()));
    }
    let mut posterior = match init {
        Some(p) => p,
        None => VariationalPosterior::init(arch, 0.05, 0.01, rng),
    };
    posterior.validate(arch)?;
    let standardizer = Standardizer::from_targets(&data.targets());
    let n_data = data.len();
    let batch = settings.batch.min(n_data);
    let steps_per_epoch = n_data.div_ceil(batch);
    let (epochs, total_steps) = match settings.schedule {
        FitSchedule::Epochs(e) => (e, e * steps_per_epoch),
        FitSchedule::Steps(s) => (s.div_ceil(steps_per_epoch), s),
    };
    if total_steps == 0 {
        return Ok(FitOutcome { posterior, standardizer, final_elbo: None });
    }

    let n = posterior.len();
    let targets: Vec<f64> = data.rows().iter().map(|r| standardizer.forward(r.y)).collect();
    let kl_weight = cfg.effective_kl_weight(n_data);
    let lik_scale = n_data as f64 / batch as f64;
    let mut eg = ElboGraph::new(arch, cfg, batch)?;
    let mut mu_opt = Adam::new(n, settings.lr);
    let mut rho_opt = Adam::new(n, settings.lr);
    let mut order: Vec<usize> = (0..n_data).collect();
    let mut eps = vec![0.0; n];
    let mut grad_mu = vec![0.0; n];
    let mut grad_rho = vec![0.0; n];
    let mut rows: Vec<&[f64]> = Vec::with_capacity(batch);
    let mut ys = vec![0.0; batch];
    let mut last = None;
    let mut step = 0;

    'outer: for epoch in 0..epochs {
        order.shuffle(rng);
        for b in 0..steps_per_epoch {
            if step == total_steps {
                break 'outer;
            }
            rows.clear();
            for j in 0..batch {
                let idx = order[(b * batch + j) % n_data];
                rows.push(&data.rows()[idx].one_hot);
                ys[j] = targets[idx];
            }
            eg.load_posterior(&posterior)?;
            grad_mu.iter_mut().chain(grad_rho.iter_mut()).for_each(|g| *g = 0.0);
            let mut value = 0.0;
            for _ in 0..settings.mc_samples {
                fill_standard_normal(rng, &mut eps);
                value += eg
                    .run(&rows, &ys, &eps, lik_scale, kl_weight)
                    .map_err(|_| Error::Training { epoch, batch: b })?;
                // Ascent on the ELBO, normalized per datum.
                let scale = -1.0 / (n_data as f64 * settings.mc_samples as f64);
                grad_mu.iter_mut().zip(eg.graph.adjoint(eg.mu)).for_each(|(g, a)| *g += scale * a);
                grad_rho.iter_mut().zip(eg.graph.adjoint(eg.rho)).for_each(|(g, a)| *g += scale * a);
            }
            value /= settings.mc_samples as f64;
            if !value.is_finite() || grad_mu.iter().chain(&grad_rho).any(|g| !g.is_finite()) {
                return Err(Error::Training { epoch, batch: b });
            }
            mu_opt.step(&mut posterior.mu, &grad_mu);
            rho_opt.step(&mut posterior.rho, &grad_rho);
            last = Some(value);
            step += 1;
        }
    }
    Ok(FitOutcome { posterior, standardizer, final_elbo: last })
}

/// One posterior draw `theta = mu + softplus(rho) * eps`, `eps ~ N(0, I)`.
pub fn thompson_sample<R: Rng + ?Sized>(posterior: &VariationalPosterior, rng: &mut R) -> WeightSample {
    WeightSample(
        posterior
            .mu
            .iter()
            .zip(&posterior.rho)
            .map(|(&m, &r)| m + math::softplus(r) * standard_normal(rng))
            .collect(),
    )
}

/// Network evaluation for a fixed weight draw, differentiable in the input.
#[derive(Debug, Clone)]
pub struct Predictor {
    graph: Graph,
    x: NodeId,
    out: NodeId,
}

impl Predictor {
    pub fn new(arch: &MlpArchitecture, theta: &WeightSample) -> Result<Self> {
        if theta.0.len() != arch.num_params() {
            return Err(Error::Shape(format!("{} weights for {} parameters", theta.0.len(), arch.num_params())));
        }
        let mut graph = Graph::new();
        let theta = graph.constant(&theta.0);
        let x = graph.variable(arch.input_dim);
        let out = arch.append(&mut graph, theta, x)?;
        Ok(Self { graph, x, out })
    }

    pub fn predict(&mut self, x: &[f64]) -> Result<f64> {
        self.graph.set(self.x, x)?;
        self.graph.forward()?;
        Ok(self.graph.value(self.out)[0])
    }

    pub fn predict_with_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let y = self.predict(x)?;
        self.graph.backward(self.out)?;
        Ok((y, self.graph.adjoint(self.x).to_vec()))
    }
}

/// `M_theta(x)` for a relaxed (or one-hot) input.
pub fn predict(theta: &WeightSample, arch: &MlpArchitecture, x_relaxed: &[f64]) -> Result<f64> {
    Predictor::new(arch, theta)?.predict(x_relaxed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedLadder;

    fn tiny_arch() -> MlpArchitecture {
        MlpArchitecture::new(2, vec![3], Activation::Tanh).unwrap()
    }

    #[test]
    fn parameter_layout() {
        let a = MlpArchitecture::new(4, vec![3, 2], Activation::Relu).unwrap();
        let l = a.layers();
        assert_eq!(l[0], LayerSlot { offset: 0, rows: 3, cols: 4, bias: 12 });
        assert_eq!(l[1], LayerSlot { offset: 15, rows: 2, cols: 3, bias: 21 });
        assert_eq!(l[2], LayerSlot { offset: 23, rows: 1, cols: 2, bias: 25 });
        assert_eq!(a.num_params(), 26);
        assert!(MlpArchitecture::new(4, vec![0], Activation::Relu).is_err());
    }

    #[test]
    fn kl_closed_form_cases() {
        let q = VariationalPosterior { mu: vec![0.0; 5], rho: vec![math::softplus_inv(1.0); 5] };
        assert!(kl_divergence(&q, 1.0).abs() < 1e-12);
        let q = VariationalPosterior { mu: vec![1.0], rho: vec![math::softplus_inv(1.0)] };
        assert!((kl_divergence(&q, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_predict_zero() {
        let a = tiny_arch();
        let theta = WeightSample(vec![0.0; a.num_params()]);
        assert_eq!(predict(&theta, &a, &[0.3, 0.9]).unwrap(), 0.0);
        assert!(matches!(predict(&theta, &a, &[0.3]), Err(Error::Shape(_))));
    }

    #[test]
    fn hand_computed_single_layer() {
        // One hidden relu unit: h = relu(2 x0 - x1 + 0.5), y = 3 h - 1.
        let a = MlpArchitecture::new(2, vec![1], Activation::Relu).unwrap();
        let theta = WeightSample(vec![2.0, -1.0, 0.5, 3.0, -1.0]);
        assert!((predict(&theta, &a, &[1.0, 0.5]).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(predict(&theta, &a, &[0.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn zero_net_log_likelihood_at_mean() {
        let a = tiny_arch();
        let space = SearchSpace::binary(1).unwrap();
        let mut d = Dataset::new();
        d.push(&space, HardAssignment(vec![1]), 0.0, 0).unwrap();
        // sigma ~ 4e-18 and eps = 0, so theta is exactly zero.
        let noise = vec![vec![0.0; a.num_params()]];
        let q = VariationalPosterior { mu: vec![0.0; a.num_params()], rho: vec![-40.0; a.num_params()] };
        let cfg = LikelihoodConfig { obs_sigma: 1.0, kl_weight: Some(0.0), prior_sigma: 1.0 };
        let est = elbo_with_noise(&q, &a, &cfg, &d, &noise).unwrap();
        assert!((est.log_likelihood + 0.5 * math::LN_2PI).abs() < 1e-12);
        assert_eq!(est.value, est.log_likelihood);
    }

    #[test]
    fn empty_dataset_is_a_contract_error() {
        let a = tiny_arch();
        let q = VariationalPosterior::init(&a, 0.05, 0.01, &mut SeedLadder::new(0).rng());
        let cfg = LikelihoodConfig::default();
        let mut rng = SeedLadder::new(0).rng();
        assert!(matches!(elbo(&q, &a, &cfg, &Dataset::new(), 1, &mut rng), Err(Error::Contract(_))));
        let s = FitSettings::default();
        assert!(matches!(fit(&Dataset::new(), &a, &cfg, &s, None, &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_epochs_returns_init() {
        let a = tiny_arch();
        let space = SearchSpace::binary(1).unwrap();
        let mut d = Dataset::new();
        d.push(&space, HardAssignment(vec![1]), 2.0, 0).unwrap();
        let init = VariationalPosterior::init(&a, 0.05, 0.01, &mut SeedLadder::new(4).rng());
        let s = FitSettings { schedule: FitSchedule::Epochs(0), ..FitSettings::default() };
        let out = fit(&d, &a, &LikelihoodConfig::default(), &s, Some(init.clone()), &mut SeedLadder::new(5).rng()).unwrap();
        assert_eq!(out.posterior, init);
        assert_eq!(out.final_elbo, None);
    }

    #[test]
    fn thompson_degenerates_to_mean() {
        let q = VariationalPosterior { mu: vec![0.5, -1.0], rho: vec![-60.0, -60.0] };
        let t = thompson_sample(&q, &mut SeedLadder::new(1).rng());
        assert_eq!(t.0, q.mu);
    }

    #[test]
    fn standardizer_round_trip() {
        let s = Standardizer::from_targets(&[1.0, 2.0, 3.0]);
        assert!((s.inverse(s.forward(2.7)) - 2.7).abs() < 1e-15);
        assert_eq!(Standardizer::from_targets(&[4.0, 4.0]).std, 1.0);
    }
}
