//! Density-ratio baseline.
//!
//! A logistic regression of sample membership (unlabeled = 1) on the features
//! gives weights `exp(η̂_drᵀ x)` for the labeled subjects, normalized to mean
//! one. The weighted pseudo-likelihood is then solved node by node.

use alloc::vec::Vec;

use crate::conditional::FeatureTransform;
use crate::data::{LabeledSample, UnlabeledSample};
use crate::error::{Error, Result};
use crate::glm::{GlmProblem, Link};
use crate::linalg::{dot, Mat, SolverConfig};
use crate::math;
use crate::pipeline::Method;
use crate::sciss::{report_sl, EstimateReport};
use crate::supervised::fit_sl_weighted;

#[derive(Debug, Clone, PartialEq)]
pub struct DrWeights {
    /// Normalized weight per labeled subject; mean exactly one up to rounding.
    pub weights: Vec<f64>,
    /// Membership coefficients, intercept first.
    pub membership: Vec<f64>,
    /// Mean of the raw weights before normalization.
    pub raw_mean: f64,
    pub iterations: usize,
}

/// Membership regression and normalized labeled weights.
pub fn dr_weights(
    labeled: &[LabeledSample],
    unlabeled: &[UnlabeledSample],
    transform: FeatureTransform,
    cfg: &SolverConfig,
) -> Result<DrWeights> {
    let first = labeled.first().ok_or(Error::EmptyLabeled)?;
    if unlabeled.is_empty() {
        return Err(Error::EmptyUnlabeled);
    }
    let p = first.x.len();
    let rows = labeled.len() + unlabeled.len();
    let mut design = Mat::zeros(rows, p + 1);
    let mut response = Vec::with_capacity(rows);
    let xs = labeled.iter().map(|s| (&s.x, 0.0)).chain(unlabeled.iter().map(|s| (&s.x, 1.0)));
    for (i, (x, member)) in xs.enumerate() {
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                what: "auxiliary features x",
                expected: p,
                found: x.len(),
            });
        }
        let row = design.row_mut(i);
        row[0] = 1.0;
        row[1..].copy_from_slice(&transform.try_apply(x)?);
        response.push(member);
    }
    let mut start = alloc::vec![0.0; p + 1];
    start[0] = math::ln(unlabeled.len() as f64 / labeled.len() as f64);
    let fit = GlmProblem {
        design: &design,
        response: &response,
        weights: None,
        link: Link::Logistic,
        ridge: 0.0,
        bound: None,
    }
    .fit(&start, cfg)?;
    let slope = &fit.coef[1..];
    let raw: Vec<f64> = (0..labeled.len())
        .map(|i| math::exp(dot(&design.row(i)[1..], slope)))
        .collect();
    let raw_mean = raw.iter().sum::<f64>() / raw.len() as f64;
    if !(raw_mean.is_finite() && raw_mean > 0.0) {
        return Err(Error::NoConvergence {
            iterations: fit.iterations,
            residual: raw_mean,
        });
    }
    Ok(DrWeights {
        weights: raw.iter().map(|w| w / raw_mean).collect(),
        membership: fit.coef,
        raw_mean,
        iterations: fit.iterations,
    })
}

/// Density-ratio weighted pseudo-likelihood estimate with sandwich SEs.
pub fn fit_dr(
    labeled: &[LabeledSample],
    unlabeled: &[UnlabeledSample],
    q: usize,
    transform: FeatureTransform,
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    let weights = dr_weights(labeled, unlabeled, transform, cfg)?;
    fit_dr_with_weights(labeled, q, &weights.weights, cfg)
}

pub fn fit_dr_with_weights(
    labeled: &[LabeledSample],
    q: usize,
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<EstimateReport> {
    let sl = fit_sl_weighted(labeled, q, weights, cfg)?;
    report_sl(labeled, &sl, Method::Dr)
}
