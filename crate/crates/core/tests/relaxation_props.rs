use bvo_core::diffcore::{grad_check, Graph, NodeId};
use bvo_core::relaxation::{
    discretize, pathwise_grad, sample_binary_concrete, sample_concrete, sample_concrete_all, sample_gumbel,
    ConcreteGraph, ProposalParams, RelaxedObjective,
};
use bvo_core::rng::{open_uniform, SeedLadder};
use bvo_core::{Result, SearchSpace};
use proptest::prelude::*;

/// `sum_i w_i (x_i - t_i)^2` over the relaxed one-hot vector.
struct Quadratic {
    target: Vec<f64>,
    weight: Vec<f64>,
}

impl RelaxedObjective for Quadratic {
    fn append(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let t = g.constant(&self.target);
        let w = g.constant(&self.weight);
        let d = g.sub(x, t)?;
        let sq = g.mul(d, d)?;
        let weighted = g.mul(sq, w)?;
        g.sum(weighted)
    }
}

fn quadratic(space: &SearchSpace) -> Quadratic {
    let n = space.one_hot_width();
    Quadratic {
        target: (0..n).map(|i| ((i * 7) % 5) as f64 / 4.0).collect(),
        weight: (0..n).map(|i| 1.0 + (i % 3) as f64).collect(),
    }
}

fn mixed_space() -> SearchSpace {
    SearchSpace::new(vec![2, 3, 5, 2]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn samples_lie_inside_the_simplex(seed in any::<u64>(), temp in 0.1f64..1.0) {
        let space = mixed_space();
        let mut rng = SeedLadder::new(seed).rng();
        let params = ProposalParams::random(&space, temp, &mut rng).unwrap();
        let g = sample_gumbel(space.one_hot_width(), &mut rng);
        let x = sample_concrete_all(&params, &space, &g).unwrap();
        let mut at = 0;
        for &k in space.cardinalities() {
            let block = &x.0[at..at + k];
            prop_assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            // The dominant entry may round to exactly 1.0 at low temperature.
            prop_assert!(block.iter().all(|&v| v > 0.0 && v <= 1.0));
            at += k;
        }
        prop_assert!(space.contains(&discretize(&x, &space)));
    }

    #[test]
    fn logit_shift_invariance(seed in any::<u64>(), c in -5.0f64..5.0) {
        let space = mixed_space();
        let mut rng = SeedLadder::new(seed).rng();
        let params = ProposalParams::random(&space, 0.5, &mut rng).unwrap();
        let g = sample_gumbel(space.one_hot_width(), &mut rng);
        let mut shifted = params.clone();
        shifted.logits[2..5].iter_mut().for_each(|l| *l += c);
        let a = sample_concrete(&params, &space, &g[2..5], 1).unwrap();
        let b = sample_concrete(&shifted, &space, &g[2..5], 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let xa = sample_concrete_all(&params, &space, &g).unwrap();
        let xb = sample_concrete_all(&shifted, &space, &g).unwrap();
        prop_assert_eq!(discretize(&xa, &space), discretize(&xb, &space));
    }

    #[test]
    fn per_sample_pathwise_gradient(seed in any::<u64>(), temp in 0.3f64..1.0) {
        let space = mixed_space();
        let objective = quadratic(&space);
        let mut rng = SeedLadder::new(seed).rng();
        let params = ProposalParams::random(&space, temp, &mut rng).unwrap();
        let noise = sample_gumbel(space.one_hot_width(), &mut rng);
        let mut cg = ConcreteGraph::new(&space, &objective).unwrap();
        let f = |logits: &[f64]| -> Result<(f64, Vec<f64>)> {
            let mut grad = vec![0.0; logits.len()];
            let v = cg.value_and_grad(logits, &noise, temp, &mut grad)?;
            Ok((v, grad))
        };
        let err = grad_check(f, &params.logits, 1e-6).unwrap();
        prop_assert!(err < 1e-4, "err {err}");
    }
}

#[test]
fn gumbel_mean_is_euler_mascheroni() {
    let g = sample_gumbel(1_000_000, &mut SeedLadder::new(11).rng());
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    assert!((mean - 0.577_215_664_9).abs() < 0.01, "mean {mean}");
}

#[test]
fn binary_concrete_median_at_zero_logit() {
    let mut rng = SeedLadder::new(12).rng();
    let n = 100_000;
    let above = (0..n).filter(|_| sample_binary_concrete(0.0, 0.5, open_uniform(&mut rng)) > 0.5).count();
    assert!((above as f64 / n as f64 - 0.5).abs() < 0.01);
}

fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        worst = worst.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    worst
}

#[test]
fn binary_concrete_matches_two_category_concrete() {
    let space = SearchSpace::binary(1).unwrap();
    let n = 100_000;
    for (log_alpha, temp) in [(0.0, 0.5), (1.3, 0.3), (-0.7, 1.0)] {
        let params = ProposalParams::new(&space, vec![log_alpha, 0.0], temp).unwrap();
        let mut rng = SeedLadder::new(13).rng();
        let scalar: Vec<f64> = (0..n).map(|_| sample_binary_concrete(log_alpha, temp, open_uniform(&mut rng))).collect();
        let mut rng = SeedLadder::new(14).rng();
        let blocks: Vec<f64> = (0..n)
            .map(|_| sample_concrete(&params, &space, &sample_gumbel(2, &mut rng), 0).unwrap()[0])
            .collect();
        let ks = ks_statistic(scalar, blocks);
        assert!(ks < 0.02, "KS {ks} at log_alpha {log_alpha}, temp {temp}");
    }
}

#[test]
fn large_batch_gradient_matches_smoothed_expectation() {
    let space = mixed_space();
    let objective = quadratic(&space);
    let params = ProposalParams::random(&space, 0.5, &mut SeedLadder::new(21).rng()).unwrap();
    let batch = 4096;
    let est = pathwise_grad(&objective, &params, &space, batch, &mut SeedLadder::new(22).rng()).unwrap();

    // Oracle: central differences of the sample mean under the same noise,
    // evaluated through the plain softmax sampler rather than the graph.
    let mut rng = SeedLadder::new(22).rng();
    let noises: Vec<Vec<f64>> = (0..batch).map(|_| sample_gumbel(space.one_hot_width(), &mut rng)).collect();
    let smoothed = |logits: &[f64]| {
        let p = ProposalParams::new(&space, logits.to_vec(), 0.5).unwrap();
        noises
            .iter()
            .map(|g| {
                let x = sample_concrete_all(&p, &space, g).unwrap();
                x.0.iter()
                    .zip(&objective.target)
                    .zip(&objective.weight)
                    .map(|((x, t), w)| w * (x - t) * (x - t))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / batch as f64
    };
    assert!((smoothed(&params.logits) - est.value).abs() < 1e-10);
    let h = 1e-5;
    let norm = est.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    for i in 0..params.logits.len() {
        let mut up = params.logits.clone();
        let mut down = params.logits.clone();
        up[i] += h;
        down[i] -= h;
        let fd = (smoothed(&up) - smoothed(&down)) / (2.0 * h);
        assert!((fd - est.grad[i]).abs() <= 0.05 * est.grad[i].abs().max(0.01 * norm), "coordinate {i}: {fd} vs {}", est.grad[i]);
    }
}
