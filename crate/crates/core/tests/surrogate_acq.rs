use bvo_core::acquisition::{acq_value, acq_value_with_noise, expected_acq_over_batch, AcquisitionConfig, AcquisitionKind};
use bvo_core::diffcore::grad_check;
use bvo_core::math::softplus_inv;
use bvo_core::relaxation::RelaxedAssignment;
use bvo_core::rng::{fill_standard_normal, SeedLadder};
use bvo_core::surrogate::{
    elbo_with_noise, fit, kl_divergence, predict, thompson_sample, Activation, Dataset, FitSchedule, FitSettings,
    LikelihoodConfig, MlpArchitecture, Predictor, VariationalPosterior, WeightSample,
};
use bvo_core::{HardAssignment, SearchSpace};
use proptest::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn small_data(space: &SearchSpace, n: usize, seed: u64) -> Dataset {
    let mut rng = SeedLadder::new(seed).rng();
    let mut d = Dataset::new();
    for i in 0..n {
        let x = space.sample_uniform(&mut rng);
        let y = 2.0 * x.count_nonzero() as f64 + 0.3 * x.0[0] as f64;
        d.push(space, x, y, i).unwrap();
    }
    d
}

fn ei_cfg(incumbent: f64, draws: usize) -> AcquisitionConfig {
    AcquisitionConfig { kind: AcquisitionKind::Ei, incumbent, mc_y_samples: draws, pi_sharpness: 10.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kl_is_nonnegative(mu in prop::collection::vec(-3.0f64..3.0, 5), rho in prop::collection::vec(-6.0f64..3.0, 5), prior in 0.1f64..3.0) {
        let q = VariationalPosterior { mu, rho };
        prop_assert!(kl_divergence(&q, prior) >= 0.0);
    }

    #[test]
    fn elbo_gradient_with_frozen_noise(seed in any::<u64>()) {
        let space = SearchSpace::binary(3).unwrap();
        let arch = MlpArchitecture::for_space(&space, vec![4, 3], Activation::Tanh).unwrap();
        let data = small_data(&space, 5, seed);
        let cfg = LikelihoodConfig { obs_sigma: 0.5, kl_weight: Some(0.2), prior_sigma: 1.0 };
        let mut rng = SeedLadder::new(seed).child(1).rng();
        let q = VariationalPosterior::init(&arch, 0.3, 0.1, &mut rng);
        let n = q.len();
        let noise: Vec<Vec<f64>> = (0..2).map(|_| { let mut e = vec![0.0; n]; fill_standard_normal(&mut rng, &mut e); e }).collect();
        let f = |p: &[f64]| {
            let q = VariationalPosterior { mu: p[..n].to_vec(), rho: p[n..].to_vec() };
            let est = elbo_with_noise(&q, &arch, &cfg, &data, &noise)?;
            Ok((est.value, est.grad_mu.into_iter().chain(est.grad_rho).collect()))
        };
        let point: Vec<f64> = q.mu.iter().chain(&q.rho).copied().collect();
        let err = grad_check(f, &point, 1e-6).unwrap();
        prop_assert!(err < 1e-4, "err {err}");
    }

    #[test]
    fn predict_input_gradient(seed in any::<u64>()) {
        let arch = MlpArchitecture::new(5, vec![6, 4], Activation::Tanh).unwrap();
        let mut rng = SeedLadder::new(seed).rng();
        let mut theta = vec![0.0; arch.num_params()];
        fill_standard_normal(&mut rng, &mut theta);
        let mut x = vec![0.0; 5];
        fill_standard_normal(&mut rng, &mut x);
        let mut p = Predictor::new(&arch, &WeightSample(theta.clone())).unwrap();
        let (v, g) = p.predict_with_grad(&x).unwrap();
        let (v2, g2) = p.predict_with_grad(&x).unwrap();
        prop_assert_eq!(v.to_bits(), v2.to_bits());
        prop_assert_eq!(&g, &g2);
        let err = grad_check(|x: &[f64]| p.predict_with_grad(x), &x, 1e-6).unwrap();
        prop_assert!(err < 1e-4, "err {err}");
    }

    #[test]
    fn ei_is_nonincreasing_in_the_mean(seed in any::<u64>(), incumbent in -2.0f64..2.0) {
        let c = ei_cfg(incumbent, 64);
        let mut rng = SeedLadder::new(seed).rng();
        let mut eps = vec![0.0; 64];
        fill_standard_normal(&mut rng, &mut eps);
        let mut last = f64::INFINITY;
        for i in 0..60 {
            let mean = -3.0 + 0.1 * i as f64;
            let v = acq_value_with_noise(&c, mean, 0.4, &eps).unwrap().value;
            prop_assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn utilities_scale_with_the_objective(seed in any::<u64>(), c in 0.1f64..10.0) {
        let mut rng = SeedLadder::new(seed).rng();
        let mut eps = vec![0.0; 32];
        fill_standard_normal(&mut rng, &mut eps);
        for kind in [AcquisitionKind::Ei, AcquisitionKind::Sr] {
            let base = AcquisitionConfig { kind, incumbent: 0.3, mc_y_samples: 32, pi_sharpness: 10.0 };
            let scaled = AcquisitionConfig { incumbent: 0.3 * c, ..base };
            for mean in [-1.0, 0.2, 0.9] {
                let a = acq_value_with_noise(&base, mean, 0.5, &eps).unwrap().value;
                let b = acq_value_with_noise(&scaled, c * mean, 0.5 * c, &eps).unwrap().value;
                prop_assert!((b - c * a).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn kl_vanishes_at_the_prior() {
    let q = VariationalPosterior { mu: vec![0.0; 7], rho: vec![softplus_inv(1.3); 7] };
    assert!(kl_divergence(&q, 1.3).abs() <= 1e-12);
}

#[test]
fn graph_kl_matches_closed_form_and_duplicates_double_the_likelihood() {
    let space = SearchSpace::binary(3).unwrap();
    let arch = MlpArchitecture::for_space(&space, vec![4], Activation::Relu).unwrap();
    let data = small_data(&space, 6, 2);
    let mut doubled = Dataset::new();
    for round in 0..2 {
        for r in data.rows() {
            doubled.push(&space, r.x.clone(), r.y, round).unwrap();
        }
    }
    let cfg = LikelihoodConfig { obs_sigma: 0.5, kl_weight: Some(0.0), prior_sigma: 1.0 };
    let mut rng = SeedLadder::new(3).rng();
    let q = VariationalPosterior::init(&arch, 0.3, 0.1, &mut rng);
    let mut eps = vec![0.0; q.len()];
    fill_standard_normal(&mut rng, &mut eps);
    let single = elbo_with_noise(&q, &arch, &cfg, &data, &[eps.clone()]).unwrap();
    let double = elbo_with_noise(&q, &arch, &cfg, &doubled, &[eps]).unwrap();
    assert!((double.log_likelihood - 2.0 * single.log_likelihood).abs() < 1e-9);
    assert!((single.kl - kl_divergence(&q, 1.0)).abs() < 1e-9);
    // With kl_weight = 0 the bound is the likelihood term alone.
    assert_eq!(single.value, single.log_likelihood);
}

#[test]
fn fit_recovers_a_counting_function() {
    let space = SearchSpace::binary(8).unwrap();
    let mut rng = SeedLadder::new(5).rng();
    let mut data = Dataset::new();
    while data.len() < 50 {
        let x = space.sample_uniform(&mut rng);
        if !data.contains(&x) {
            let y = 2.0 * x.count_nonzero() as f64;
            data.push(&space, x, y, data.len()).unwrap();
        }
    }
    let arch = MlpArchitecture::for_space(&space, vec![50, 50], Activation::Relu).unwrap();
    let cfg = LikelihoodConfig { kl_weight: Some(1e-3), ..LikelihoodConfig::default() };
    let settings = FitSettings { schedule: FitSchedule::Epochs(300), ..FitSettings::default() };
    let out = fit(&data, &arch, &cfg, &settings, None, &mut rng).unwrap();
    let mean = WeightSample(out.posterior.mu.clone());
    let sq: f64 = data
        .rows()
        .iter()
        .map(|r| {
            let pred = out.standardizer.inverse(predict(&mean, &arch, &r.one_hot).unwrap());
            (pred - r.y).powi(2)
        })
        .sum();
    let rmse = (sq / data.len() as f64).sqrt();
    assert!(rmse < 0.5, "rmse {rmse}");
}

#[test]
fn thompson_draws_average_to_the_mean() {
    let q = VariationalPosterior { mu: vec![2.0], rho: vec![softplus_inv(0.1)] };
    let mut rng = SeedLadder::new(8).rng();
    let n = 100_000;
    let mean = (0..n).map(|_| thompson_sample(&q, &mut rng).0[0]).sum::<f64>() / n as f64;
    assert!((mean - 2.0).abs() < 0.01);
    let a = thompson_sample(&q, &mut SeedLadder::new(9).rng());
    let b = thompson_sample(&q, &mut SeedLadder::new(9).rng());
    assert_eq!(a, b);
}

fn closed_form_ei(incumbent: f64, mean: f64, sigma: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let z = (incumbent - mean) / sigma;
    (incumbent - mean) * n.cdf(z) + sigma * n.pdf(z)
}

#[test]
fn monte_carlo_ei_converges_to_closed_form() {
    let draws = 10_000;
    for (incumbent, mean, sigma) in [(0.0, 0.0, 1.0), (1.0, 0.3, 0.5), (-0.5, 0.4, 0.8), (2.0, 0.0, 0.3)] {
        let c = ei_cfg(incumbent, draws);
        let mut rng = SeedLadder::new(31).rng();
        let mut eps = vec![0.0; draws];
        fill_standard_normal(&mut rng, &mut eps);
        let mc = acq_value_with_noise(&c, mean, sigma, &eps).unwrap().value;
        let per_draw: Vec<f64> = eps.iter().map(|&e| acq_value_with_noise(&c, mean, sigma, &[e]).unwrap().value).collect();
        let m = per_draw.iter().sum::<f64>() / draws as f64;
        let var = per_draw.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        let exact = closed_form_ei(incumbent, mean, sigma);
        assert!((mc - exact).abs() < 3.0 * se, "mc {mc} exact {exact} se {se}");
    }
    let at_incumbent = acq_value(&ei_cfg(0.0, 100_000), 0.0, 1.0, &mut SeedLadder::new(32).rng()).unwrap();
    assert!((at_incumbent.value - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 0.01);
}

#[test]
fn batch_scoring() {
    let space = SearchSpace::categorical(3, 3).unwrap();
    let arch = MlpArchitecture::for_space(&space, vec![5], Activation::Tanh).unwrap();
    let mut rng = SeedLadder::new(40).rng();
    let mut theta = vec![0.0; arch.num_params()];
    fill_standard_normal(&mut rng, &mut theta);
    let theta = WeightSample(theta);
    let samples: Vec<RelaxedAssignment> = (0..12).map(|_| RelaxedAssignment(space.encode(&space.sample_uniform(&mut rng)))).collect();
    let mut eps = vec![0.0; 16];
    fill_standard_normal(&mut rng, &mut eps);

    let same = vec![samples[0].clone(); 4];
    let c = ei_cfg(0.1, 16);
    let b = expected_acq_over_batch(&same, &theta, &arch, &c, 0.3, &eps).unwrap();
    assert!(b.values.iter().all(|&v| v == b.values[0]) && b.mean == b.values[0]);

    let sr = AcquisitionConfig { kind: AcquisitionKind::Sr, ..c };
    let b = expected_acq_over_batch(&samples, &theta, &arch, &sr, 0.3, &[]).unwrap();
    let means: Vec<f64> = samples.iter().map(|s| predict(&theta, &arch, &s.0).unwrap()).collect();
    for i in 0..samples.len() {
        for j in 0..samples.len() {
            assert_eq!(b.values[i] > b.values[j], means[i] < means[j]);
        }
    }

    // Second route: hand-rolled EI over the same draws.
    let b = expected_acq_over_batch(&samples, &theta, &arch, &c, 0.3, &eps).unwrap();
    let brute: Vec<f64> = means
        .iter()
        .map(|m| eps.iter().map(|e| (0.1 - (m + 0.3 * e)).max(0.0)).sum::<f64>() / eps.len() as f64)
        .collect();
    let best = (0..brute.len()).fold(0, |b, i| if brute[i] > brute[b] { i } else { b });
    assert_eq!(b.best, best);
}

#[test]
fn hard_points_are_encoded_one_hot() {
    let space = SearchSpace::new(vec![2, 3]).unwrap();
    assert_eq!(space.encode(&HardAssignment(vec![1, 2])), [0.0, 1.0, 0.0, 0.0, 1.0]);
}
