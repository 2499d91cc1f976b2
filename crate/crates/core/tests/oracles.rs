//! Brute-force oracles for the enumeration code and the analytic derivatives.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sciss_core::conditional::{
    d_project_d_eta, project_score, AugParams, ConditionalModel, FeatureTransform, PosParams, Surrogate,
    SurrogateFamily,
};
use sciss_core::ising::{conditional_logodds, joint_pmf, log_unnormalized, IsingParams, OutcomeConfig};
use sciss_core::sciss::{intrinsic_gradient, intrinsic_objective};
use sciss_core::supervised::fit_sl;
use sciss_core::{LabeledSample, SolverConfig};

fn random_theta(q: usize, w_len: usize, scale: f64, rng: &mut impl Rng) -> IsingParams {
    let mut t = IsingParams::zeros(q, w_len).unwrap();
    for j in 0..q {
        for c in t.node_mut(j) {
            *c = rng.random_range(-scale..scale);
        }
        for k in j + 1..q {
            t.set_pair(j, k, rng.random_range(-scale..scale));
        }
    }
    t
}

fn random_w(w_len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut w = vec![1.0];
    w.extend((1..w_len).map(|_| rng.random_range(-1.0..1.0)));
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmf_is_normalized_and_proportional(q in 1usize..=8, w_len in 1usize..=3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_theta(q, w_len, 2.0, &mut rng);
        let w = random_w(w_len, &mut rng);
        let pmf = joint_pmf(&theta, &w).unwrap();
        let total: f64 = pmf.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        let base = OutcomeConfig::all(q).next().unwrap();
        let lb = log_unnormalized(&theta, base, &w).unwrap();
        for y in OutcomeConfig::all(q) {
            let expect = (log_unnormalized(&theta, y, &w).unwrap() - lb).exp();
            let got = pmf.prob(y) / pmf.prob(base);
            prop_assert!((got - expect).abs() <= 1e-9 * expect.max(1.0));
        }
    }

    #[test]
    fn node_permutation_permutes_the_pmf(q in 2usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_theta(q, 1, 1.5, &mut rng);
        let mut perm: Vec<usize> = (0..q).collect();
        for i in (1..q).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut permuted = IsingParams::zeros(q, 1).unwrap();
        for j in 0..q {
            permuted.node_mut(perm[j]).copy_from_slice(theta.node(j));
            for k in j + 1..q {
                permuted.set_pair(perm[j], perm[k], theta.pair(j, k));
            }
        }
        let a = joint_pmf(&theta, &[1.0]).unwrap();
        let b = joint_pmf(&permuted, &[1.0]).unwrap();
        for y in OutcomeConfig::all(q) {
            let mut py = OutcomeConfig::all(q).next().unwrap();
            for j in 0..q {
                py = py.with(perm[j], y.get(j));
            }
            prop_assert!((a.prob(y) - b.prob(py)).abs() < 1e-12);
        }
    }
}

#[test]
fn logodds_match_pmf_ratios_exhaustively() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for q in 1..=6 {
        for _ in 0..5 {
            let theta = random_theta(q, 2, 2.0, &mut rng);
            let w = random_w(2, &mut rng);
            let pmf = joint_pmf(&theta, &w).unwrap();
            for y in OutcomeConfig::all(q) {
                for j in 0..q {
                    let on = pmf.prob(y.with(j, true));
                    let off = pmf.prob(y.with(j, false));
                    let lo = conditional_logodds(&theta, j, y, &w).unwrap();
                    assert!((lo - (on / off).ln()).abs() < 1e-9, "q={q} j={j}");
                }
            }
        }
    }
}

/// Labeled data from the three-node model with Gaussian features `x_k = 2 y_k + ε`.
fn gaussian_data(n: usize, seed: u64) -> Vec<LabeledSample> {
    let m = sciss_core::Mat::from_rows(&[&[0.1, 0.3, -0.6], &[0.3, -0.3, 0.4], &[-0.6, 0.4, 0.2]]).unwrap();
    let theta = IsingParams::from_matrix(&m).unwrap();
    let pmf = joint_pmf(&theta, &[1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y = pmf.draw(&mut rng);
            let x = (0..3).map(|k| 2.0 * y.value(k) + rng.random_range(-1.0..1.0)).collect();
            LabeledSample { y, x, w: vec![1.0] }
        })
        .collect()
}

fn random_aug(rng: &mut impl Rng) -> AugParams {
    let m = AugParams::zeros(3, 3, 1, FeatureTransform::Identity).unwrap();
    let eta: Vec<f64> = (0..m.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    m.with_params(&eta).unwrap()
}

fn random_pos(rng: &mut impl Rng) -> PosParams {
    let theta = random_theta(3, 1, 1.0, rng);
    let families = [SurrogateFamily::Gaussian, SurrogateFamily::Logistic, SurrogateFamily::Poisson];
    PosParams {
        theta,
        surrogates: families
            .iter()
            .map(|&family| Surrogate {
                family,
                coef: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                log_var: rng.random_range(-0.5..0.5),
                clamped: false,
                iterations: 0,
            })
            .collect(),
    }
}

#[test]
fn projection_matches_explicit_summation() {
    let data = gaussian_data(400, 3);
    let sl = fit_sl(&data, 3, &SolverConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let model = random_aug(&mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..3.0)).collect();
        let dist = model.predict(&x, &[1.0]).unwrap();
        for j in 0..3 {
            let m = project_score(&dist, &sl.nodes, j, &[1.0]).unwrap();
            let mut explicit = vec![0.0; m.len()];
            for y in OutcomeConfig::all(3) {
                let s = sl.nodes.score(j, y, &[1.0]);
                for (e, v) in explicit.iter_mut().zip(s) {
                    *e += dist.prob(y) * v;
                }
            }
            for (a, b) in m.iter().zip(&explicit) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

fn check_jacobian<M: ConditionalModel + Clone>(model: &M, x: &[f64], data_fit: &sciss_core::NodewiseFit) {
    let eta = model.params();
    let h = 1e-5;
    for j in 0..3 {
        let jac = d_project_d_eta(model, x, &[1.0], data_fit, j).unwrap();
        for c in 0..eta.len() {
            let mut plus = eta.clone();
            let mut minus = eta.clone();
            plus[c] += h;
            minus[c] -= h;
            let dp = model.with_params(&plus).unwrap().predict(x, &[1.0]).unwrap();
            let dm = model.with_params(&minus).unwrap().predict(x, &[1.0]).unwrap();
            let mp = project_score(&dp, data_fit, j, &[1.0]).unwrap();
            let mm = project_score(&dm, data_fit, j, &[1.0]).unwrap();
            for r in 0..mp.len() {
                let fd = (mp[r] - mm[r]) / (2.0 * h);
                assert!((jac[(r, c)] - fd).abs() < 1e-4, "node {j} row {r} param {c}: {} vs {fd}", jac[(r, c)]);
            }
        }
    }
}

#[test]
fn projection_jacobian_matches_finite_differences() {
    let data = gaussian_data(300, 5);
    let sl = fit_sl(&data, 3, &SolverConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..3.0)).collect();
        check_jacobian(&random_aug(&mut rng), &x, &sl.nodes);
        // Poisson and logistic surrogates need counts and bits.
        let xp = vec![rng.random_range(-1.0..3.0), f64::from(rng.random_bool(0.5)), f64::from(rng.random_range(0..5u8))];
        check_jacobian(&random_pos(&mut rng), &xp, &sl.nodes);
    }
}

#[test]
fn intrinsic_gradient_matches_finite_differences() {
    let data = gaussian_data(200, 7);
    let sl = fit_sl(&data, 3, &SolverConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let model = random_aug(&mut rng);
        let eta = model.params();
        for (j, k) in [(0, 1), (1, 2)] {
            let g = intrinsic_gradient(&model, &eta, &data, &sl.nodes, j, k).unwrap();
            let h = 1e-5;
            for c in 0..eta.len() {
                let mut plus = eta.clone();
                let mut minus = eta.clone();
                plus[c] += h;
                minus[c] -= h;
                let fd = (intrinsic_objective(&model, &plus, &data, &sl.nodes, j, k).unwrap()
                    - intrinsic_objective(&model, &minus, &data, &sl.nodes, j, k).unwrap())
                    / (2.0 * h);
                assert!((g[c] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "param {c}: {} vs {fd}", g[c]);
            }
        }
    }
}

#[test]
fn conditional_distributions_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let aug = random_aug(&mut rng);
        let pos = random_pos(&mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..4.0)).collect();
        let xp = vec![x[0], 1.0, 3.0];
        for d in [aug.predict(&x, &[1.0]).unwrap(), pos.predict(&xp, &[1.0]).unwrap()] {
            assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}
