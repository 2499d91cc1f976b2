//! Augmented Ising model: Ising coefficients that vary linearly with `x`.
//!
//! `P(y | z) ∝ exp( Σ_j η_jj(z) y_j + Σ_{j<k} η_jk(x) y_j y_k )` with
//! `η_jj(z) = (xᵀ, wᵀ) η_jj` and `η_jk(x) = xᵀ η_jk`. Fitted node-wise by
//! ridge-penalized logistic regression, pair blocks averaged across nodes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{ConditionalModel, FeatureTransform};
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::glm::{GlmProblem, Link};
use crate::ising::{check_q, OutcomeConfig, StackedLayout};
use crate::linalg::{dot, Mat, SolverConfig};

/// `λ_n = n^{-3/4}`.
pub fn default_lambda(n: usize) -> f64 {
    libm::pow(n as f64, -0.75)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugDiagnostics {
    pub iterations: Vec<usize>,
    /// Coefficients per node regression.
    pub params_per_node: usize,
    /// More than `n / 5` coefficients per node regression.
    pub overparameterized: bool,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugParams {
    q: usize,
    p: usize,
    w_len: usize,
    transform: FeatureTransform,
    /// `q` blocks of `p + w_len`.
    node: Vec<f64>,
    /// One block of `p` per unordered pair `j < k`, shared by `(j, k)` and `(k, j)`.
    pair: Vec<f64>,
    pub diagnostics: AugDiagnostics,
}

fn pair_index(q: usize, j: usize, k: usize) -> usize {
    let (a, b) = if j < k { (j, k) } else { (k, j) };
    a * (2 * q - a - 1) / 2 + (b - a - 1)
}

impl AugParams {
    pub fn zeros(q: usize, p: usize, w_len: usize, transform: FeatureTransform) -> Result<Self> {
        check_q(q)?;
        Ok(Self {
            q,
            p,
            w_len,
            transform,
            node: vec![0.0; q * (p + w_len)],
            pair: vec![0.0; q * (q - 1) / 2 * p],
            diagnostics: AugDiagnostics::default(),
        })
    }

    pub fn transform(&self) -> FeatureTransform {
        self.transform
    }

    pub fn fit_layout(&self) -> StackedLayout {
        StackedLayout {
            q: self.q,
            pair_width: self.p,
            node_width: self.p + self.w_len,
        }
    }

    pub fn node_coefs(&self, j: usize) -> &[f64] {
        let width = self.p + self.w_len;
        &self.node[j * width..(j + 1) * width]
    }

    pub fn pair_coefs(&self, j: usize, k: usize) -> &[f64] {
        let idx = pair_index(self.q, j, k);
        &self.pair[idx * self.p..(idx + 1) * self.p]
    }

    fn terms(&self, x: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let xt = self.transform.apply(x);
        let node: Vec<f64> = (0..self.q)
            .map(|j| {
                let c = self.node_coefs(j);
                dot(&c[..self.p], &xt) + dot(&c[self.p..], w)
            })
            .collect();
        let pair: Vec<f64> = self.pair.chunks(self.p.max(1)).map(|c| dot(c, &xt)).collect();
        (xt, node, pair)
    }
}

impl ConditionalModel for AugParams {
    fn q(&self) -> usize {
        self.q
    }
    fn p(&self) -> usize {
        self.p
    }
    fn w_len(&self) -> usize {
        self.w_len
    }
    fn n_params(&self) -> usize {
        self.node.len() + self.pair.len()
    }
    fn params(&self) -> Vec<f64> {
        let mut v = self.node.clone();
        v.extend_from_slice(&self.pair);
        v
    }
    fn set_params(&mut self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                what: "augmented model parameters",
                expected: self.n_params(),
                found: eta.len(),
            });
        }
        let (a, b) = eta.split_at(self.node.len());
        self.node.copy_from_slice(a);
        self.pair.copy_from_slice(b);
        Ok(())
    }

    fn check_features(&self, x: &[f64], w: &[f64]) -> Result<()> {
        super::check_dims(self.p, self.w_len, x, w)?;
        self.transform.check(x)
    }

    fn log_weights(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let (_, node, pair) = self.terms(x, w);
        for y in OutcomeConfig::all(self.q) {
            let mut e = 0.0;
            for j in (0..self.q).filter(|&j| y.get(j)) {
                e += node[j];
                for k in (j + 1..self.q).filter(|&k| y.get(k)) {
                    if self.p > 0 {
                        e += pair[pair_index(self.q, j, k)];
                    }
                }
            }
            out[y.0 as usize] = e;
        }
    }

    fn log_weight_gradients(&self, x: &[f64], w: &[f64], out: &mut Mat) {
        let xt = self.transform.apply(x);
        let width = self.p + self.w_len;
        let pair_offset = self.node.len();
        for y in OutcomeConfig::all(self.q) {
            let row = out.row_mut(y.0 as usize);
            row.iter_mut().for_each(|v| *v = 0.0);
            for j in (0..self.q).filter(|&j| y.get(j)) {
                let block = &mut row[j * width..(j + 1) * width];
                block[..self.p].copy_from_slice(&xt);
                block[self.p..].copy_from_slice(w);
                for k in (j + 1..self.q).filter(|&k| y.get(k)) {
                    let start = pair_offset + pair_index(self.q, j, k) * self.p;
                    row[start..start + self.p].copy_from_slice(&xt);
                }
            }
        }
    }
}

/// Node `j`'s regressors `(xᵀy_1, …, (xᵀ, wᵀ), …, xᵀy_q)`.
fn stack_aug(layout: &StackedLayout, j: usize, y: OutcomeConfig, xt: &[f64], w: &[f64], out: &mut [f64]) {
    let p = layout.pair_width;
    let node = layout.node_block(j);
    out[node.start..node.start + p].copy_from_slice(xt);
    out[node.start + p..node.end].copy_from_slice(w);
    for k in (0..layout.q).filter(|&k| k != j) {
        let yk = y.value(k);
        for (o, v) in out[layout.pair_block(j, k)].iter_mut().zip(xt) {
            *o = v * yk;
        }
    }
}

/// Fits the augmented Ising model on the labeled sample.
pub fn fit_aug(
    data: &[LabeledSample],
    q: usize,
    lambda: f64,
    transform: FeatureTransform,
    cfg: &SolverConfig,
) -> Result<AugParams> {
    check_q(q)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("ridge must be nonnegative, got {lambda}")));
    }
    let first = data.first().ok_or(Error::EmptyLabeled)?;
    let (p, w_len) = (first.x.len(), first.w.len());
    let mut params = AugParams::zeros(q, p, w_len, transform)?;
    let layout = params.fit_layout();
    let dim = layout.dim();

    let xts = data.iter().map(|s| transform.try_apply(&s.x)).collect::<Result<Vec<_>>>()?;
    let mut node_coefs = Vec::with_capacity(q);
    let mut iterations = Vec::with_capacity(q);
    for j in 0..q {
        let mut design = Mat::zeros(data.len(), dim);
        let mut response = Vec::with_capacity(data.len());
        for (i, s) in data.iter().enumerate() {
            if s.x.len() != p || s.w.len() != w_len {
                return Err(Error::DimensionMismatch {
                    what: "labeled record",
                    expected: p + w_len,
                    found: s.x.len() + s.w.len(),
                });
            }
            stack_aug(&layout, j, s.y, &xts[i], &s.w, design.row_mut(i));
            response.push(s.y.value(j));
        }
        let fit = GlmProblem {
            design: &design,
            response: &response,
            weights: None,
            link: Link::Logistic,
            ridge: lambda,
            bound: None,
        }
        .fit(&vec![0.0; dim], cfg)
        .map_err(|e| e.at_node(j))?;
        iterations.push(fit.iterations);
        node_coefs.push(fit.coef);
    }

    let width = p + w_len;
    for (j, coef) in node_coefs.iter().enumerate() {
        params.node[j * width..(j + 1) * width].copy_from_slice(&coef[layout.node_block(j)]);
    }
    for j in 0..q {
        for k in j + 1..q {
            let idx = pair_index(q, j, k);
            let a = &node_coefs[j][layout.pair_block(j, k)];
            let b = &node_coefs[k][layout.pair_block(k, j)];
            for c in 0..p {
                params.pair[idx * p + c] = 0.5 * (a[c] + b[c]);
            }
        }
    }
    params.diagnostics = AugDiagnostics {
        iterations,
        params_per_node: dim,
        overparameterized: dim * 5 > data.len(),
        lambda,
    };
    Ok(params)
}
