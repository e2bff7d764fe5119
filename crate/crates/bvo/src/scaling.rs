//! Wall time of one BVO round (surrogate fit plus inner optimization)
//! against problem dimension or dataset size, with log-log slopes.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use bvo_core::acquisition::AcquisitionConfig;
use bvo_core::optimizer::{inner_optimize, BvoConfig, FnObjective, InnerSettings, Objective};
use bvo_core::rng::{standard_normal, SeedLadder};
use bvo_core::stats::{log_log_slope, normalize_to_head};
use bvo_core::surrogate::{fit, thompson_sample, Dataset, FitSchedule, MlpArchitecture};
use bvo_core::{HardAssignment, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::summary::{read_csv, write_csv, SCALING_SCHEMA};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Dimension,
    DataSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// A fixed number of minibatch steps per fit.
    FixedBatches,
    /// A fixed number of passes over the data per fit.
    FixedEpochs,
}

macro_rules! text_enum {
    ($t:ty { $($v:ident => $s:literal),* }) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$v => $s),* })
            }
        }
        impl FromStr for $t {
            type Err = HarnessError;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok(Self::$v),)*
                    other => Err(HarnessError::Config(format!("unknown {} {other:?}", stringify!($t).to_lowercase()))),
                }
            }
        }
    };
}

text_enum!(Axis { Dimension => "dimension", DataSize => "data_size" });
text_enum!(Mode { FixedBatches => "fixed_batches", FixedEpochs => "fixed_epochs" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub axis: Axis,
    pub mode: Mode,
    pub size: usize,
    pub wall_ms: f64,
    /// `wall_ms` over the mean of the first three points.
    pub normalized: f64,
    /// Log-log slope of the whole series; repeated on every row.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSettings {
    pub categories: usize,
    /// Dimension held fixed while the data size varies.
    pub base_dims: usize,
    /// Data size held fixed while the dimension varies.
    pub base_data: usize,
    pub fit_steps: usize,
    pub fit_epochs: usize,
    pub repeats: usize,
    pub bvo: BvoConfig,
    pub seed: u64,
}

impl Default for ScalingSettings {
    fn default() -> Self {
        Self {
            categories: 5,
            base_dims: 20,
            base_data: 100,
            fit_steps: 100,
            fit_epochs: 2,
            repeats: 3,
            bvo: BvoConfig::desk(),
            seed: 0,
        }
    }
}

pub const DIMENSIONS: [usize; 5] = [20, 40, 80, 160, 320];
pub const DATA_SIZES: [usize; 5] = [100, 200, 400, 800, 1600];

/// Points below this many milliseconds are flagged as near timer noise.
pub const MIN_RELIABLE_MS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingStudy {
    pub records: Vec<ScalingRecord>,
    pub warnings: Vec<String>,
}

impl ScalingStudy {
    pub fn slope(&self) -> f64 {
        self.records.first().map_or(f64::NAN, |r| r.slope)
    }
}

/// Normalizes `times` and fits the slope of `ln t` against `ln size`.
pub fn fit_series(axis: Axis, mode: Mode, sizes: &[usize], times: &[f64]) -> Result<Vec<ScalingRecord>> {
    if sizes.len() < 4 || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(HarnessError::Config(format!("need at least 4 increasing positive sizes, got {sizes:?}")));
    }
    if times.len() != sizes.len() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(HarnessError::Config(format!("need one positive time per size, got {times:?}")));
    }
    let xs: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let slope = log_log_slope(&xs, times);
    Ok(sizes
        .iter()
        .zip(times)
        .zip(normalize_to_head(times))
        .map(|((&size, &wall_ms), normalized)| ScalingRecord { axis, mode, size, wall_ms, normalized, slope })
        .collect())
}

/// Times of an exact `c n^3` law, the cost shape of a Gaussian process
/// solve on `n` points.
pub fn cubic_reference(sizes: &[usize]) -> Vec<f64> {
    sizes.iter().map(|&s| (s as f64).powi(3)).collect()
}

/// Additive objective over `dims` categorical variables with Gaussian
/// per-category costs.
pub fn synthetic_problem(dims: usize, categories: usize, seed: u64) -> Result<FnObjective<impl Fn(&HardAssignment) -> f64>> {
    let space = SearchSpace::categorical(dims, categories)?;
    let mut rng = SeedLadder::new(seed).rng();
    let costs: Vec<f64> = (0..dims * categories).map(|_| standard_normal(&mut rng)).collect();
    Ok(FnObjective::new(space, move |x: &HardAssignment| {
        x.0.iter().enumerate().map(|(i, &c)| costs[i * categories + c]).sum()
    }))
}

/// Median wall time in milliseconds of one round on a synthetic problem
/// with `dims` variables and `n_data` observations. Building the problem
/// and the dataset is not timed.
pub fn time_round(settings: &ScalingSettings, mode: Mode, dims: usize, n_data: usize) -> Result<f64> {
    let ladder = SeedLadder::new(settings.seed).child(dims as u64).child(n_data as u64);
    let problem = synthetic_problem(dims, settings.categories, ladder.child(0).seed())?;
    let space = problem.space().clone();
    let mut data = Dataset::new();
    let mut rng = ladder.child(1).rng();
    for i in 0..n_data {
        let x = space.sample_uniform(&mut rng);
        let y = problem.evaluate(&x)?;
        data.push(&space, x, y, i)?;
    }
    let s = &settings.bvo.surrogate;
    let arch = MlpArchitecture::for_space(&space, s.hidden.clone(), s.activation)?;
    let mut fit_cfg = s.fit;
    fit_cfg.schedule = match mode {
        Mode::FixedBatches => FitSchedule::Steps(settings.fit_steps),
        Mode::FixedEpochs => FitSchedule::Epochs(settings.fit_epochs),
    };
    let inner = InnerSettings::from(&settings.bvo);

    let mut samples = Vec::with_capacity(settings.repeats.max(1));
    for r in 0..settings.repeats.max(1) {
        let round = ladder.child(2).child(r as u64);
        let start = Instant::now();
        let fitted = fit(&data, &arch, &s.likelihood, &fit_cfg, None, &mut round.child(0).rng())?;
        let theta = thompson_sample(&fitted.posterior, &mut round.child(1).rng());
        let acq = AcquisitionConfig {
            kind: settings.bvo.acquisition.kind,
            incumbent: fitted.standardizer.forward(data.best().unwrap_or(0.0)),
            mc_y_samples: settings.bvo.acquisition.mc_y_samples,
            pi_sharpness: settings.bvo.acquisition.pi_sharpness,
        };
        inner_optimize(&theta, &arch, &space, &acq, s.likelihood.obs_sigma, &inner, &data, round.child(2))?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[samples.len() / 2])
}

/// Times one round at each size along `axis` and fits the slope.
pub fn scaling_study(axis: Axis, sizes: &[usize], mode: Mode, settings: &ScalingSettings) -> Result<ScalingStudy> {
    fit_series(axis, mode, sizes, &vec![1.0; sizes.len()])?;
    let mut times = Vec::with_capacity(sizes.len());
    let mut warnings = Vec::new();
    for &size in sizes {
        let (dims, n_data) = match axis {
            Axis::Dimension => (size, settings.base_data),
            Axis::DataSize => (settings.base_dims, size),
        };
        let t = time_round(settings, mode, dims, n_data)?;
        if t < MIN_RELIABLE_MS {
            warnings.push(format!("{axis} {size}: {t:.3} ms is below the {MIN_RELIABLE_MS} ms timer-noise floor"));
        }
        times.push(t);
    }
    Ok(ScalingStudy { records: fit_series(axis, mode, sizes, &times)?, warnings })
}

pub fn write_scaling(path: &std::path::Path, records: &[ScalingRecord]) -> Result<()> {
    write_csv(path, SCALING_SCHEMA, records)
}

pub fn read_scaling(path: &std::path::Path) -> Result<Vec<ScalingRecord>> {
    read_csv(path, SCALING_SCHEMA)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stub_has_flat_slope() {
        let sizes = DIMENSIONS;
        // Jittered constant timings, as from a model whose cost ignores size.
        let times = [10.3, 9.8, 10.1, 9.9, 10.2];
        let recs = fit_series(Axis::Dimension, Mode::FixedBatches, &sizes, &times).unwrap();
        assert!(recs[0].slope.abs() <= 0.15);
        let head: f64 = recs[..3].iter().map(|r| r.normalized).sum::<f64>() / 3.0;
        assert!((head - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_law_has_slope_two() {
        let sizes = DATA_SIZES;
        let times: Vec<f64> = sizes.iter().map(|&n| 3e-4 * (n * n) as f64).collect();
        let recs = fit_series(Axis::DataSize, Mode::FixedEpochs, &sizes, &times).unwrap();
        assert!((recs[0].slope - 2.0).abs() <= 0.01);
        let cubic = fit_series(Axis::Dimension, Mode::FixedBatches, &sizes, &cubic_reference(&sizes)).unwrap();
        assert!((cubic[0].slope - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sizes_are_validated() {
        assert!(fit_series(Axis::Dimension, Mode::FixedBatches, &[1, 2, 3], &[1.0; 3]).is_err());
        assert!(fit_series(Axis::Dimension, Mode::FixedBatches, &[1, 3, 2, 4], &[1.0; 4]).is_err());
        assert!(fit_series(Axis::Dimension, Mode::FixedBatches, &[1, 2, 3, 4], &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn names_parse() {
        assert_eq!("data_size".parse::<Axis>().unwrap(), Axis::DataSize);
        assert_eq!(Mode::FixedEpochs.to_string(), "fixed_epochs");
        assert!("rows".parse::<Axis>().is_err());
    }
}
