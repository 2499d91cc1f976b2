//! Conditional models for `P(ȳ | z)` and the projected score they induce.
//!
//! Both models are log-linear over the `2^q` outcome configurations, so a
//! model only has to report per-configuration log-weights and their gradients
//! with respect to its flattened parameter vector. Normalization, projection
//! and the parameter Jacobian of the projection are shared.

mod aug;
mod pos;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use aug::{default_lambda, fit_aug, AugDiagnostics, AugParams};
pub use pos::{fit_pos, PosParams, Surrogate, SurrogateFamily, LOG_LINK_BOUND};

use crate::error::{Error, Result};
use crate::ising::ConfigDistribution;
use crate::linalg::Mat;
use crate::supervised::NodewiseFit;

pub type CondDistribution = ConfigDistribution;

/// Preprocessing applied to the auxiliary features before a model sees them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureTransform {
    #[default]
    Identity,
    /// `log(x + 1)`, for skewed count features.
    Log1p,
}

impl FeatureTransform {
    pub fn apply(self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureTransform::Identity => x.to_vec(),
            FeatureTransform::Log1p => x.iter().map(|&v| crate::math::ln_1p(v)).collect(),
        }
    }

    /// [`apply`](Self::apply) after checking that every feature is in the domain.
    pub fn try_apply(self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.apply(x))
    }

    pub fn check(self, x: &[f64]) -> Result<()> {
        if self == FeatureTransform::Log1p {
            if let Some(v) = x.iter().find(|&&v| !(v > -1.0)) {
                return Err(Error::InvalidConfig(format!("log(x + 1) needs x > -1, found {v}")));
            }
        }
        Ok(())
    }
}

fn check_dims(p: usize, w_len: usize, x: &[f64], w: &[f64]) -> Result<()> {
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            what: "auxiliary features x",
            expected: p,
            found: x.len(),
        });
    }
    if w.len() != w_len {
        return Err(Error::DimensionMismatch {
            what: "adjustment vector w",
            expected: w_len,
            found: w.len(),
        });
    }
    crate::ising::check_intercept(w)
}

pub trait ConditionalModel {
    fn q(&self) -> usize;
    fn p(&self) -> usize;
    fn w_len(&self) -> usize;
    fn n_params(&self) -> usize;
    /// Flattened parameter vector `η`.
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, eta: &[f64]) -> Result<()>;
    /// Unnormalized log-probabilities of every configuration given `z = (x, w)`.
    fn log_weights(&self, x: &[f64], w: &[f64], out: &mut [f64]);
    /// `∂ log-weight / ∂η`, one row per configuration.
    fn log_weight_gradients(&self, x: &[f64], w: &[f64], out: &mut Mat);

    fn check_features(&self, x: &[f64], w: &[f64]) -> Result<()> {
        check_dims(self.p(), self.w_len(), x, w)
    }

    fn predict(&self, x: &[f64], w: &[f64]) -> Result<CondDistribution> {
        crate::ising::check_q(self.q())?;
        self.check_features(x, w)?;
        let mut lw = vec![0.0; 1 << self.q()];
        self.log_weights(x, w, &mut lw);
        CondDistribution::from_log_weights(self.q(), &lw)
    }

    fn with_params(&self, eta: &[f64]) -> Result<Self>
    where
        Self: Sized + Clone,
    {
        let mut m = self.clone();
        m.set_params(eta)?;
        Ok(m)
    }
}

/// Either fitted conditional model.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionalFit {
    Aug(AugParams),
    Pos(PosParams),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            ConditionalFit::Aug($m) => $e,
            ConditionalFit::Pos($m) => $e,
        }
    };
}

impl ConditionalModel for ConditionalFit {
    fn q(&self) -> usize {
        dispatch!(self, m => m.q())
    }
    fn p(&self) -> usize {
        dispatch!(self, m => m.p())
    }
    fn w_len(&self) -> usize {
        dispatch!(self, m => m.w_len())
    }
    fn n_params(&self) -> usize {
        dispatch!(self, m => m.n_params())
    }
    fn params(&self) -> Vec<f64> {
        dispatch!(self, m => m.params())
    }
    fn set_params(&mut self, eta: &[f64]) -> Result<()> {
        dispatch!(self, m => m.set_params(eta))
    }
    fn log_weights(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        dispatch!(self, m => m.log_weights(x, w, out))
    }
    fn log_weight_gradients(&self, x: &[f64], w: &[f64], out: &mut Mat) {
        dispatch!(self, m => m.log_weight_gradients(x, w, out))
    }
}

/// `m̂_j(z) = Σ_ȳ P(ȳ | z) Ŝ_j(ȳ_w)`.
pub fn project_score(dist: &CondDistribution, fit: &NodewiseFit, j: usize, w: &[f64]) -> Result<Vec<f64>> {
    if dist.q() != fit.q() {
        return Err(Error::DimensionMismatch {
            what: "distribution nodes",
            expected: fit.q(),
            found: dist.q(),
        });
    }
    Ok(project_with_scores(dist, &fit.config_scores(j, w)))
}

/// Projection against a precomputed table of configuration scores
/// (see [`NodewiseFit::config_scores`]).
pub fn project_with_scores(dist: &CondDistribution, scores: &Mat) -> Vec<f64> {
    let mut m = vec![0.0; scores.cols()];
    for (i, &p) in dist.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (acc, s) in m.iter_mut().zip(scores.row(i)) {
            *acc += p * s;
        }
    }
    m
}

/// `∂m̂_j / ∂η` at `z`, shape `dim × n_params`.
///
/// With `P(ȳ) ∝ exp ℓ(ȳ)`, the derivative is the covariance under `P`
/// between the configuration scores and `∂ℓ/∂η`.
pub fn d_project_d_eta<M: ConditionalModel + ?Sized>(
    model: &M,
    x: &[f64],
    w: &[f64],
    fit: &NodewiseFit,
    j: usize,
) -> Result<Mat> {
    let dist = model.predict(x, w)?;
    let mut grads = Mat::zeros(1 << model.q(), model.n_params());
    model.log_weight_gradients(x, w, &mut grads);
    Ok(projection_jacobian(&dist, &grads, &fit.config_scores(j, w)))
}

pub(crate) fn projection_jacobian(dist: &CondDistribution, grads: &Mat, scores: &Mat) -> Mat {
    let np = grads.cols();
    let mut mean_grad = vec![0.0; np];
    for (i, &p) in dist.probs().iter().enumerate() {
        for (a, g) in mean_grad.iter_mut().zip(grads.row(i)) {
            *a += p * g;
        }
    }
    let mut jac = Mat::zeros(scores.cols(), np);
    let mut centered = vec![0.0; np];
    for (i, &p) in dist.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for ((c, g), m) in centered.iter_mut().zip(grads.row(i)).zip(&mean_grad) {
            *c = g - m;
        }
        for (r, s) in scores.row(i).iter().enumerate() {
            let ps = p * s;
            if ps == 0.0 {
                continue;
            }
            for (o, c) in jac.row_mut(r).iter_mut().zip(&centered) {
                *o += ps * c;
            }
        }
    }
    jac
}
