//! Supervised pseudo-likelihood estimation.
//!
//! Each node is regressed on the stacked vector `(y_1, …, y_{j-1}, wᵀ, y_{j+1}, …, y_q)`
//! by logistic regression and the two estimates of every pair coefficient are
//! averaged. The per-subject score `Σ̂_j⁻¹ ψ (y_j − g(θ_jᵀψ))` drives both the
//! variance estimate and the semi-supervised correction.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::glm::{logistic_information, GlmProblem, Link};
use crate::ising::{IsingParams, OutcomeConfig, StackedLayout};
use crate::linalg::{dot, Mat, SolverConfig};
use crate::math;

/// Fills `out` with node `j`'s stacked regressors for outcome `y` and adjustment `w`.
pub fn stack_regressors(layout: &StackedLayout, j: usize, y: OutcomeConfig, w: &[f64], out: &mut [f64]) {
    debug_assert_eq!(layout.pair_width, 1);
    out[layout.node_block(j)].copy_from_slice(w);
    for k in (0..layout.q).filter(|&k| k != j) {
        out[layout.pair_pos(j, k)] = y.value(k);
    }
}

/// One node's logistic fit: `θ̌_j` and the empirical hessian `Σ̂_{θ_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    pub coef: Vec<f64>,
    pub hessian: Mat,
    pub hessian_inv: Mat,
    pub iterations: usize,
}

/// Node-wise fits for all `q` nodes plus the observation weights they used.
#[derive(Debug, Clone, PartialEq)]
pub struct NodewiseFit {
    pub layout: StackedLayout,
    pub nodes: Vec<NodeFit>,
    pub weights: Option<Vec<f64>>,
}

impl NodewiseFit {
    pub fn q(&self) -> usize {
        self.layout.q
    }

    /// Unweighted score `Σ̂_j⁻¹ ψ (y_j − g(θ̌_jᵀψ))` for one outcome configuration.
    pub fn score(&self, j: usize, y: OutcomeConfig, w: &[f64]) -> Vec<f64> {
        let mut psi = vec![0.0; self.layout.dim()];
        stack_regressors(&self.layout, j, y, w, &mut psi);
        let node = &self.nodes[j];
        let resid = y.value(j) - math::sigmoid(dot(&node.coef, &psi));
        psi.iter_mut().for_each(|v| *v *= resid);
        node.hessian_inv.mul_vec(&psi)
    }

    /// Scores of node `j` for every configuration, one row per [`OutcomeConfig`].
    pub fn config_scores(&self, j: usize, w: &[f64]) -> Mat {
        let q = self.q();
        let dim = self.layout.dim();
        let mut m = Mat::zeros(1 << q, dim);
        for y in OutcomeConfig::all(q) {
            m.row_mut(y.0 as usize).copy_from_slice(&self.score(j, y, w));
        }
        m
    }

    /// Node estimates `θ̌_j` in stacked order.
    pub fn stacked_estimates(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|n| n.coef.clone()).collect()
    }
}

/// Symmetrized supervised estimate together with its node-wise ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct SlFit {
    pub theta: IsingParams,
    pub nodes: NodewiseFit,
}

fn node_design(data: &[LabeledSample], layout: &StackedLayout, j: usize) -> (Mat, Vec<f64>) {
    let dim = layout.dim();
    let mut x = Mat::zeros(data.len(), dim);
    let mut y = Vec::with_capacity(data.len());
    for (i, s) in data.iter().enumerate() {
        stack_regressors(layout, j, s.y, &s.w, x.row_mut(i));
        y.push(s.y.value(j));
    }
    (x, y)
}

fn layout_for(data: &[LabeledSample], q: usize) -> Result<StackedLayout> {
    let first = data.first().ok_or(Error::EmptyLabeled)?;
    let layout = StackedLayout::ising(q, first.w.len());
    if data.len() < layout.dim() + 1 {
        return Err(Error::InvalidConfig(alloc::format!(
            "need at least {} labeled subjects for {} nodes, found {}",
            layout.dim() + 1,
            q,
            data.len()
        )));
    }
    Ok(layout)
}

/// Logistic regression of `y_j` on its stacked regressors, started from zero.
pub fn fit_node_logistic(
    data: &[LabeledSample],
    q: usize,
    j: usize,
    ridge: f64,
    cfg: &SolverConfig,
) -> Result<NodeFit> {
    fit_node_weighted(data, q, j, ridge, None, cfg)
}

fn fit_node_weighted(
    data: &[LabeledSample],
    q: usize,
    j: usize,
    ridge: f64,
    weights: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<NodeFit> {
    let layout = layout_for(data, q)?;
    if j >= q {
        return Err(Error::DimensionMismatch {
            what: "node index",
            expected: q,
            found: j,
        });
    }
    let (x, y) = node_design(data, &layout, j);
    let fit = GlmProblem {
        design: &x,
        response: &y,
        weights,
        link: Link::Logistic,
        ridge,
        bound: None,
    }
    .fit(&vec![0.0; layout.dim()], cfg)?;
    let hessian = logistic_information(&x, weights, &fit.coef);
    let hessian_inv = hessian.inverse()?;
    Ok(NodeFit {
        coef: fit.coef,
        hessian,
        hessian_inv,
        iterations: fit.iterations,
    })
}

fn fit_all(
    data: &[LabeledSample],
    q: usize,
    weights: Option<Vec<f64>>,
    cfg: &SolverConfig,
) -> Result<SlFit> {
    let layout = layout_for(data, q)?;
    let nodes = (0..q)
        .map(|j| fit_node_weighted(data, q, j, 0.0, weights.as_deref(), cfg).map_err(|e| e.at_node(j)))
        .collect::<Result<Vec<_>>>()?;
    let nodes = NodewiseFit {
        layout,
        nodes,
        weights,
    };
    let theta = IsingParams::symmetrize(q, layout.node_width, &nodes.stacked_estimates())?;
    Ok(SlFit { theta, nodes })
}

/// Supervised (labeled-only) estimator.
pub fn fit_sl(data: &[LabeledSample], q: usize, cfg: &SolverConfig) -> Result<SlFit> {
    fit_all(data, q, None, cfg)
}

/// Weighted pseudo-likelihood, solving `(1/n) Σ wᵢ ψᵢ (y_ij − g(θ_jᵀψᵢ)) = 0` per node.
pub fn fit_sl_weighted(
    data: &[LabeledSample],
    q: usize,
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<SlFit> {
    if weights.len() != data.len() {
        return Err(Error::DimensionMismatch {
            what: "observation weights",
            expected: data.len(),
            found: weights.len(),
        });
    }
    fit_all(data, q, Some(weights.to_vec()), cfg)
}

/// Per-subject scores of node `j` (one row per labeled subject). Weighted fits
/// multiply each row by the subject's weight.
pub fn score_rows(data: &[LabeledSample], fit: &NodewiseFit, j: usize) -> Mat {
    let dim = fit.layout.dim();
    let mut m = Mat::zeros(data.len(), dim);
    for (i, s) in data.iter().enumerate() {
        let mut row = fit.score(j, s.y, &s.w);
        if let Some(w) = &fit.weights {
            row.iter_mut().for_each(|v| *v *= w[i]);
        }
        m.row_mut(i).copy_from_slice(&row);
    }
    m
}

/// Asymptotic variances of the supervised estimator (multiply by `1/n` for squared SEs).
#[derive(Debug, Clone, PartialEq)]
pub struct SlVariance {
    /// `Ω̂_jk = (1/4)(1/n) Σ (s_jk + s_kj)²`; diagonal unused.
    pub pair: Mat,
    /// `(1/n) Σ s²` per coordinate of each node block.
    pub node: Vec<Vec<f64>>,
}

pub fn var_sl(data: &[LabeledSample], fit: &NodewiseFit) -> SlVariance {
    let q = fit.q();
    let layout = fit.layout;
    let n = data.len() as f64;
    let rows: Vec<Mat> = (0..q).map(|j| score_rows(data, fit, j)).collect();
    let mut pair = Mat::zeros(q, q);
    for j in 0..q {
        for k in j + 1..q {
            let (a, b) = (layout.pair_pos(j, k), layout.pair_pos(k, j));
            let omega = (0..data.len())
                .map(|i| {
                    let s = rows[j][(i, a)] + rows[k][(i, b)];
                    s * s
                })
                .sum::<f64>()
                / (4.0 * n);
            pair[(j, k)] = omega;
            pair[(k, j)] = omega;
        }
    }
    let node = (0..q)
        .map(|j| {
            layout
                .node_block(j)
                .map(|c| (0..data.len()).map(|i| rows[j][(i, c)] * rows[j][(i, c)]).sum::<f64>() / n)
                .collect()
        })
        .collect();
    SlVariance { pair, node }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{sample, IsingParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simulate(theta: &IsingParams, n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample(theta, &[1.0], &mut rng, n)
            .unwrap()
            .into_iter()
            .map(|y| LabeledSample {
                y,
                x: vec![],
                w: vec![1.0],
            })
            .collect()
    }

    #[test]
    fn null_single_node() {
        let theta = IsingParams::zeros(1, 1).unwrap();
        let data = simulate(&theta, 10_000, 1);
        let fit = fit_sl(&data, 1, &SolverConfig::default()).unwrap();
        assert!(fit.theta.node(0)[0].abs() < 0.05);
        let var = var_sl(&data, &fit.nodes);
        // Inverse Fisher information of Bernoulli(1/2) on the logit scale.
        assert!((var.node[0][0] - 4.0).abs() < 0.1);
    }

    #[test]
    fn two_node_consistency() {
        let mut theta = IsingParams::zeros(2, 1).unwrap();
        theta.node_mut(0)[0] = -0.5;
        theta.node_mut(1)[0] = 0.3;
        theta.set_pair(0, 1, 0.8);
        let data = simulate(&theta, 100_000, 2);
        let node = fit_node_logistic(&data, 2, 0, 0.0, &SolverConfig::default()).unwrap();
        let truth = theta.stacked(0);
        for (a, b) in node.coef.iter().zip(&truth) {
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_response_fails() {
        let data: Vec<LabeledSample> = (0..50)
            .map(|i| LabeledSample {
                y: OutcomeConfig(1 | ((i % 2) << 1)),
                x: vec![],
                w: vec![1.0],
            })
            .collect();
        let err = fit_sl(&data, 2, &SolverConfig::default()).unwrap_err();
        assert_eq!(err, err.clone());
        assert!(matches!(err, Error::Node { node: 0, .. }));
        assert!(matches!(err.root(), Error::NoConvergence { .. }));
    }

    #[test]
    fn scores_vanish_at_fit_and_variance_is_duplication_invariant() {
        let m = Mat::from_rows(&[&[0.1, 0.3, -0.6], &[0.3, -0.3, 0.4], &[-0.6, 0.4, 0.2]]).unwrap();
        let theta = IsingParams::from_matrix(&m).unwrap();
        let data = simulate(&theta, 400, 3);
        let fit = fit_sl(&data, 3, &SolverConfig::default()).unwrap();
        for j in 0..3 {
            let rows = score_rows(&data, &fit.nodes, j);
            for c in 0..rows.cols() {
                let mean = rows.column(c).iter().sum::<f64>() / rows.rows() as f64;
                assert!(mean.abs() < 1e-8);
            }
        }
        assert!(fit.theta.to_matrix().is_symmetric(0.0));
        let var = var_sl(&data, &fit.nodes);
        let doubled: Vec<LabeledSample> = data.iter().chain(data.iter()).cloned().collect();
        let fit2 = fit_sl(&doubled, 3, &SolverConfig::default()).unwrap();
        let var2 = var_sl(&doubled, &fit2.nodes);
        for j in 0..3 {
            for k in 0..3 {
                assert!((var.pair[(j, k)] - var2.pair[(j, k)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn score_with_identity_hessian() {
        let layout = StackedLayout::ising(2, 1);
        let fit = NodewiseFit {
            layout,
            nodes: vec![
                NodeFit {
                    coef: vec![0.0, 0.0],
                    hessian: Mat::identity(2),
                    hessian_inv: Mat::identity(2),
                    iterations: 0,
                };
                2
            ],
            weights: None,
        };
        let y = OutcomeConfig(0b11);
        // ψ for node 0 is (w, y_2) = (1, 1); residual 1 - g(0) = 0.5.
        assert_eq!(fit.score(0, y, &[1.0]), vec![0.5, 0.5]);
    }
}
