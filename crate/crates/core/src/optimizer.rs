//! The BVO outer loop.
//!
//! Each round fits the surrogate to every evaluated point, draws one weight
//! vector from the posterior, then runs several restarts of gradient ascent
//! on `E_q[acquisition]` over the logits of a concrete proposal `q(x | alpha)`.
//! The minimization bound on the acquisition turns into a maximization here
//! because utilities are oriented so that larger is better. Each restart's
//! final relaxed batch is discretized, every hard candidate (plus the
//! proposal mode) is re-scored on its exact one-hot encoding, and the best
//! candidate that has not been evaluated yet is sent to the objective.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{acq_value_with_noise, draw_y_noise, AcquisitionConfig, AcquisitionKind, SurrogateAcquisition};
use crate::adam::Adam;
use crate::baselines::SaConfig;
use crate::relaxation::{discretize, discretize_logits, fill_gumbel, ConcreteGraph, ProposalParams, RelaxedAssignment};
use crate::rng::SeedLadder;
use crate::space::{HardAssignment, SearchSpace};
use crate::surrogate::{
    fit, thompson_sample, Activation, Dataset, FitSchedule, FitSettings, LikelihoodConfig, MlpArchitecture, Predictor,
    VariationalPosterior, WeightSample,
};
use crate::{Error, Result};

/// A black-box function over a discrete space, to be minimized.
pub trait Objective {
    fn space(&self) -> &SearchSpace;
    fn evaluate(&self, x: &HardAssignment) -> Result<f64>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn space(&self) -> &SearchSpace {
        (**self).space()
    }

    fn evaluate(&self, x: &HardAssignment) -> Result<f64> {
        (**self).evaluate(x)
    }
}

/// Adapts a closure into an [`Objective`].
pub struct FnObjective<F> {
    space: SearchSpace,
    f: F,
}

impl<F> fmt::Debug for FnObjective<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective").field("space", &self.space).finish_non_exhaustive()
    }
}

impl<F: Fn(&HardAssignment) -> f64> FnObjective<F> {
    pub fn new(space: SearchSpace, f: F) -> Self {
        Self { space, f }
    }
}

impl<F: Fn(&HardAssignment) -> f64> Objective for FnObjective<F> {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &HardAssignment) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// Source of wall-clock time. The core has no clock of its own; the harness
/// passes one in when timings should be recorded.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Records every timing as zero, which keeps traces reproducible byte for byte.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSettings {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub likelihood: LikelihoodConfig,
    pub fit: FitSettings,
    /// Continue from the previous round's posterior instead of re-initializing.
    pub warm_start: bool,
    pub init_mu_std: f64,
    pub init_sigma: f64,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        Self {
            hidden: vec![100, 100, 100],
            activation: Activation::Relu,
            likelihood: LikelihoodConfig::default(),
            fit: FitSettings::default(),
            warm_start: true,
            init_mu_std: 0.05,
            init_sigma: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSettings {
    pub kind: AcquisitionKind,
    pub mc_y_samples: usize,
    pub pi_sharpness: f64,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        Self { kind: AcquisitionKind::Ei, mc_y_samples: 16, pi_sharpness: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSettings {
    pub temperature: f64,
    /// When set, the temperature moves linearly to this value over the
    /// inner-loop steps.
    #[serde(default)]
    pub anneal_to: Option<f64>,
}

impl Default for RelaxationSettings {
    fn default() -> Self {
        Self { temperature: 0.5, anneal_to: None }
    }
}

impl RelaxationSettings {
    pub fn temperature_at(&self, step: usize, steps: usize) -> f64 {
        match self.anneal_to {
            Some(end) if steps > 1 => {
                let frac = step as f64 / (steps - 1) as f64;
                self.temperature + (end - self.temperature) * frac
            }
            _ => self.temperature,
        }
    }

    pub fn final_temperature(&self) -> f64 {
        self.anneal_to.unwrap_or(self.temperature)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvoConfig {
    pub init_points: usize,
    pub outer_iters: usize,
    pub inner_steps: usize,
    pub inner_lr: f64,
    pub proposal_batch: usize,
    pub restarts: usize,
    pub surrogate: SurrogateSettings,
    pub acquisition: AcquisitionSettings,
    pub relaxation: RelaxationSettings,
    pub master_seed: u64,
}

impl Default for BvoConfig {
    fn default() -> Self {
        Self {
            init_points: 20,
            outer_iters: 150,
            inner_steps: 100,
            inner_lr: 0.1,
            proposal_batch: 128,
            restarts: 16,
            surrogate: SurrogateSettings::default(),
            acquisition: AcquisitionSettings::default(),
            relaxation: RelaxationSettings::default(),
            master_seed: 0,
        }
    }
}

impl BvoConfig {
    /// Lighter profile for single-core desk runs: two hidden layers of 50
    /// units trained for a fixed number of minibatch steps per round, fewer
    /// and shorter restarts, simple regret under the Thompson draw, a tighter
    /// likelihood and a temperature annealed from 0.5 to 0.1.
    pub fn desk() -> Self {
        Self {
            inner_steps: 30,
            proposal_batch: 16,
            restarts: 4,
            surrogate: SurrogateSettings {
                hidden: vec![50, 50],
                likelihood: LikelihoodConfig { obs_sigma: 0.05, ..LikelihoodConfig::default() },
                fit: FitSettings { schedule: FitSchedule::Steps(300), lr: 1e-2, batch: 32, mc_samples: 1 },
                ..SurrogateSettings::default()
            },
            acquisition: AcquisitionSettings { kind: AcquisitionKind::Sr, ..AcquisitionSettings::default() },
            relaxation: RelaxationSettings { temperature: 0.5, anneal_to: Some(0.1) },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [self.init_points, self.proposal_batch, self.restarts];
        if counts.contains(&0) || !(self.inner_lr > 0.0) {
            return Err(Error::Contract(format!(
                "init_points, proposal_batch and restarts must be >= 1 and inner_lr > 0: {self:?}"
            )));
        }
        if !(self.relaxation.temperature > 0.0) || self.relaxation.anneal_to.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Contract("temperatures must be positive".into()));
        }
        self.surrogate.likelihood.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bvo,
    Rs,
    Sa,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bvo => "bvo",
            Method::Rs => "rs",
            Method::Sa => "sa",
        })
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bvo" => Ok(Self::Bvo),
            "rs" => Ok(Self::Rs),
            "sa" => Ok(Self::Sa),
            other => Err(Error::Contract(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    Bvo(BvoConfig),
    Rs { budget: usize },
    Sa(SaConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub x: HardAssignment,
    pub y: f64,
    pub best: f64,
    pub t_fit_ms: f64,
    pub t_inner_ms: f64,
    /// Final minibatch ELBO of the round's surrogate fit.
    pub elbo: Option<f64>,
    /// Acquisition value of the selected candidate.
    pub acq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub method: Method,
    pub seed: u64,
    pub config: MethodConfig,
    pub records: Vec<TraceRecord>,
    /// Non-fatal events (discarded restarts, duplicate fallbacks, ...).
    #[serde(default)]
    pub notes: Vec<String>,
}

impl OptimizationTrace {
    pub fn new(method: Method, seed: u64, config: MethodConfig) -> Self {
        Self { method, seed, config, records: Vec::new(), notes: Vec::new() }
    }

    /// Appends an evaluation, maintaining the running minimum.
    pub fn record(&mut self, x: HardAssignment, y: f64, t_fit_ms: f64, t_inner_ms: f64, elbo: Option<f64>, acq: Option<f64>) {
        let best = self.records.last().map_or(y, |r| r.best.min(y));
        let iter = self.records.len();
        self.records.push(TraceRecord { iter, x, y, best, t_fit_ms, t_inner_ms, elbo, acq });
    }

    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best)
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best).collect()
    }

    pub fn best_point(&self) -> Option<&TraceRecord> {
        self.records.iter().fold(None, |acc: Option<&TraceRecord>, r| match acc {
            Some(b) if b.y <= r.y => Some(b),
            _ => Some(r),
        })
    }
}

/// Evaluates `x`, turning non-finite results into errors that carry `x`.
pub fn evaluate_checked<O: Objective + ?Sized>(objective: &O, x: &HardAssignment) -> Result<f64> {
    let y = objective.evaluate(x)?;
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFiniteObjective { x: x.clone(), value: y })
    }
}

/// `n` uniform points, de-duplicated by resampling for up to `100 n`
/// attempts; after that duplicates are accepted.
pub fn initial_design<R: Rng + ?Sized>(space: &SearchSpace, n: usize, rng: &mut R) -> Vec<HardAssignment> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        let x = space.sample_uniform(rng);
        attempts += 1;
        if seen.insert(x.clone()) || attempts > 100 * n {
            out.push(x);
        }
    }
    out
}

/// Inner-loop settings, split out of [`BvoConfig`] so the inner loop can be
/// driven on its own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSettings {
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub restarts: usize,
    pub relaxation: RelaxationSettings,
}

impl From<&BvoConfig> for InnerSettings {
    fn from(c: &BvoConfig) -> Self {
        Self {
            steps: c.inner_steps,
            lr: c.inner_lr,
            batch: c.proposal_batch,
            restarts: c.restarts,
            relaxation: c.relaxation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub x: HardAssignment,
    pub acq: f64,
    /// True when every candidate had already been evaluated.
    pub duplicate: bool,
    /// Restarts dropped because the acquisition went non-finite.
    pub discarded_restarts: usize,
}

struct Candidate {
    x: HardAssignment,
    acq: f64,
}

/// Maximizes the acquisition of `theta` over the proposal logits and returns
/// the best discrete candidate, preferring points not in `data`.
#[allow(clippy::too_many_arguments)]
pub fn inner_optimize(
    theta: &WeightSample,
    arch: &MlpArchitecture,
    space: &SearchSpace,
    acq: &AcquisitionConfig,
    obs_sigma: f64,
    settings: &InnerSettings,
    data: &Dataset,
    ladder: SeedLadder,
) -> Result<InnerResult> {
    acq.validate()?;
    let eps = draw_y_noise(acq, &mut ladder.child(u64::MAX).rng());
    let objective = SurrogateAcquisition { arch, theta, cfg: acq, obs_sigma, eps: &eps };
    let mut graph = ConcreteGraph::new(space, &objective)?;
    let mut predictor = Predictor::new(arch, theta)?;
    let width = space.one_hot_width();
    let mut noise = vec![0.0; width];
    let mut grad = vec![0.0; width];
    let mut neg = vec![0.0; width];
    let mut one_hot = vec![0.0; width];
    let mut best_new: Option<Candidate> = None;
    let mut best_any: Option<Candidate> = None;
    let mut discarded = 0;

    let mut score = |x: HardAssignment, best_new: &mut Option<Candidate>, best_any: &mut Option<Candidate>| -> Result<()> {
        space.encode_into(&x, &mut one_hot);
        let mean = predictor.predict(&one_hot)?;
        let value = acq_value_with_noise(acq, mean, obs_sigma, &eps)?.value;
        if !value.is_finite() {
            return Err(Error::NonFiniteGradient { sample: 0 });
        }
        let fresh = !data.contains(&x);
        let slot = if fresh { best_new } else { best_any };
        if slot.as_ref().is_none_or(|c| value > c.acq) {
            *slot = Some(Candidate { x, acq: value });
        }
        Ok(())
    };

    for r in 0..settings.restarts {
        let mut rng = ladder.child(r as u64).rng();
        let mut params = ProposalParams::random(space, settings.relaxation.temperature, &mut rng)?;
        let mut opt = Adam::new(width, settings.lr);
        let mut ok = true;
        'steps: for step in 0..settings.steps {
            let temp = settings.relaxation.temperature_at(step, settings.steps);
            grad.iter_mut().for_each(|g| *g = 0.0);
            for _ in 0..settings.batch {
                fill_gumbel(&mut rng, &mut noise);
                if graph.value_and_grad(&params.logits, &noise, temp, &mut grad).is_err() {
                    ok = false;
                    break 'steps;
                }
            }
            if grad.iter().any(|g| !g.is_finite()) {
                ok = false;
                break;
            }
            let inv = 1.0 / settings.batch as f64;
            neg.iter_mut().zip(&grad).for_each(|(n, g)| *n = -g * inv);
            opt.step(&mut params.logits, &neg);
        }
        if !ok {
            discarded += 1;
            continue;
        }
        params.temperature = settings.relaxation.final_temperature();
        let mut candidates = vec![discretize_logits(&params, space)];
        for _ in 0..settings.batch {
            fill_gumbel(&mut rng, &mut noise);
            if graph.value(&params.logits, &noise, params.temperature).is_err() {
                continue;
            }
            candidates.push(discretize(&RelaxedAssignment(graph.relaxed().to_vec()), space));
        }
        candidates.sort();
        candidates.dedup();
        let mut failed = false;
        for c in candidates {
            if score(c, &mut best_new, &mut best_any).is_err() {
                failed = true;
            }
        }
        if failed {
            discarded += 1;
        }
    }

    match (best_new, best_any) {
        (Some(c), _) => Ok(InnerResult { x: c.x, acq: c.acq, duplicate: false, discarded_restarts: discarded }),
        (None, Some(c)) => Ok(InnerResult { x: c.x, acq: c.acq, duplicate: true, discarded_restarts: discarded }),
        (None, None) => Err(Error::Contract(format!("all {} inner restarts were discarded", settings.restarts))),
    }
}

/// Runs BVO without recording timings.
pub fn run_bvo<O: Objective + ?Sized>(objective: &O, cfg: &BvoConfig) -> Result<OptimizationTrace> {
    run_bvo_with_clock(objective, cfg, &NoClock)
}

pub fn run_bvo_with_clock<O: Objective + ?Sized, C: Clock + ?Sized>(
    objective: &O,
    cfg: &BvoConfig,
    clock: &C,
) -> Result<OptimizationTrace> {
    cfg.validate()?;
    let space = objective.space();
    let ladder = SeedLadder::new(cfg.master_seed);
    let mut trace = OptimizationTrace::new(Method::Bvo, cfg.master_seed, MethodConfig::Bvo(cfg.clone()));
    let mut data = Dataset::new();

    for x in initial_design(space, cfg.init_points, &mut ladder.child(0).rng()) {
        let y = evaluate_checked(objective, &x)?;
        data.push(space, x.clone(), y, trace.records.len())?;
        trace.record(x, y, 0.0, 0.0, None, None);
    }

    let s = &cfg.surrogate;
    let arch = MlpArchitecture::for_space(space, s.hidden.clone(), s.activation)?;
    let inner = InnerSettings::from(cfg);
    let mut posterior: Option<VariationalPosterior> = None;

    for t in 0..cfg.outer_iters {
        let round = ladder.child(1).child(t as u64);
        let start = clock.now_ms();
        let init = match posterior.take() {
            Some(p) if s.warm_start => p,
            _ => VariationalPosterior::init(&arch, s.init_mu_std, s.init_sigma, &mut round.child(3).rng()),
        };
        let fitted = fit(&data, &arch, &s.likelihood, &s.fit, Some(init), &mut round.child(0).rng())?;
        let fitted_at = clock.now_ms();

        let theta = thompson_sample(&fitted.posterior, &mut round.child(1).rng());
        let incumbent = fitted.standardizer.forward(data.best().unwrap_or(0.0));
        let acq = AcquisitionConfig {
            kind: cfg.acquisition.kind,
            incumbent,
            mc_y_samples: cfg.acquisition.mc_y_samples,
            pi_sharpness: cfg.acquisition.pi_sharpness,
        };
        let picked = inner_optimize(&theta, &arch, space, &acq, s.likelihood.obs_sigma, &inner, &data, round.child(2))?;
        let done = clock.now_ms();
        if picked.discarded_restarts > 0 {
            trace.notes.push(format!("round {t}: discarded {} restart(s)", picked.discarded_restarts));
        }
        if picked.duplicate {
            trace.notes.push(format!("round {t}: no unevaluated candidate, re-evaluating {:?}", picked.x.0));
        }

        let y = evaluate_checked(objective, &picked.x)?;
        data.push(space, picked.x.clone(), y, trace.records.len())?;
        trace.record(picked.x, y, fitted_at - start, done - fitted_at, fitted.final_elbo, Some(picked.acq));
        posterior = Some(fitted.posterior);
    }
    Ok(trace)
}
