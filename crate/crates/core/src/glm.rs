//! Newton solvers for the small generalized linear models used throughout:
//! (weighted, ridge-penalized) logistic regression, Poisson log-linear
//! regression and ordinary least squares.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, newton_root, solve_linear, Mat, SolverConfig};
use crate::math;

/// Unpenalized logistic coefficients beyond this magnitude signal separation.
pub(crate) const SEPARATION_BOUND: f64 = 15.0;

/// Curvature of the quadratic hinge that keeps linear predictors inside the box.
const BOX_STIFFNESS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Link {
    Logistic,
    Poisson,
}

impl Link {
    #[inline]
    fn mean(self, eta: f64) -> f64 {
        match self {
            Link::Logistic => math::sigmoid(eta),
            Link::Poisson => math::exp(eta),
        }
    }

    #[inline]
    fn variance(self, eta: f64) -> f64 {
        match self {
            Link::Logistic => {
                let p = math::sigmoid(eta);
                p * (1.0 - p)
            }
            Link::Poisson => math::exp(eta),
        }
    }
}

pub(crate) struct GlmProblem<'a> {
    pub design: &'a Mat,
    pub response: &'a [f64],
    pub weights: Option<&'a [f64]>,
    pub link: Link,
    pub ridge: f64,
    /// Keeps every fitted linear predictor within `[-bound, bound]`.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct GlmFit {
    pub coef: Vec<f64>,
    pub iterations: usize,
    /// At least one linear predictor sits on the box boundary.
    pub clamped: bool,
}

impl GlmProblem<'_> {
    fn n(&self) -> f64 {
        self.response.len() as f64
    }

    #[inline]
    fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    /// Gradient of the per-observation penalized log-likelihood.
    fn score(&self, beta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; beta.len()];
        for i in 0..self.design.rows() {
            let v = self.design.row(i);
            let eta = dot(v, beta);
            let mut r = self.weight(i) * (self.response[i] - self.link.mean(eta));
            if let Some(b) = self.bound {
                if eta < -b {
                    r += BOX_STIFFNESS * (-b - eta);
                } else if eta > b {
                    r -= BOX_STIFFNESS * (eta - b);
                }
            }
            for (gk, vk) in g.iter_mut().zip(v) {
                *gk += r * vk;
            }
        }
        let n = self.n();
        for (gk, bk) in g.iter_mut().zip(beta) {
            *gk = *gk / n - self.ridge * bk;
        }
        g
    }

    fn jacobian(&self, beta: &[f64]) -> Mat {
        let dim = beta.len();
        let mut h = Mat::zeros(dim, dim);
        for i in 0..self.design.rows() {
            let v = self.design.row(i);
            let eta = dot(v, beta);
            let mut c = self.weight(i) * self.link.variance(eta);
            if let Some(b) = self.bound {
                if eta < -b || eta > b {
                    c += BOX_STIFFNESS;
                }
            }
            h.add_outer(-c, v);
        }
        h.scale(1.0 / self.n());
        h.add_diagonal(-self.ridge);
        h
    }

    pub fn fit(&self, start: &[f64], cfg: &SolverConfig) -> Result<GlmFit> {
        let dim = self.design.cols();
        if start.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "starting coefficients",
                expected: dim,
                found: start.len(),
            });
        }
        if self.response.len() != self.design.rows() {
            return Err(Error::DimensionMismatch {
                what: "response",
                expected: self.design.rows(),
                found: self.response.len(),
            });
        }
        let root = newton_root(|b| self.score(b), |b| self.jacobian(b), start, cfg)?;
        let unpenalized = self.ridge == 0.0 && self.bound.is_none();
        if unpenalized && self.link == Link::Logistic {
            let max = root.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max > SEPARATION_BOUND {
                return Err(Error::NoConvergence {
                    iterations: root.iterations,
                    residual: root.residual,
                });
            }
        }
        let clamped = self.bound.is_some_and(|b| {
            (0..self.design.rows()).any(|i| dot(self.design.row(i), &root.x).abs() >= b - 1e-6)
        });
        Ok(GlmFit {
            coef: root.x,
            iterations: root.iterations,
            clamped,
        })
    }
}

/// Fisher information `(1/n) Σ w_i ġ(ηᵢ) v_i v_iᵀ` of a logistic fit.
pub(crate) fn logistic_information(design: &Mat, weights: Option<&[f64]>, beta: &[f64]) -> Mat {
    let dim = beta.len();
    let mut h = Mat::zeros(dim, dim);
    for i in 0..design.rows() {
        let v = design.row(i);
        let p = math::sigmoid(dot(v, beta));
        h.add_outer(weights.map_or(1.0, |w| w[i]) * p * (1.0 - p), v);
    }
    h.scale(1.0 / design.rows() as f64);
    h
}

/// Ordinary least squares via the normal equations; returns `(coef, rss)`.
pub(crate) fn least_squares(design: &Mat, response: &[f64]) -> Result<(Vec<f64>, f64)> {
    let dim = design.cols();
    let mut xtx = Mat::zeros(dim, dim);
    let mut xty = vec![0.0; dim];
    for i in 0..design.rows() {
        let v = design.row(i);
        xtx.add_outer(1.0, v);
        for (a, vk) in xty.iter_mut().zip(v) {
            *a += vk * response[i];
        }
    }
    let n = design.rows() as f64;
    xtx.scale(1.0 / n);
    xty.iter_mut().for_each(|a| *a /= n);
    let coef = solve_linear(&xtx, &xty)?;
    let rss = (0..design.rows())
        .map(|i| {
            let r = response[i] - dot(design.row(i), &coef);
            r * r
        })
        .sum();
    Ok((coef, rss))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(rows: &[[f64; 2]]) -> Mat {
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Mat::from_vec(rows.len(), 2, data).unwrap()
    }

    #[test]
    fn logistic_closed_form_two_groups() {
        // Group A (x=0): 3/10 successes, group B (x=1): 6/10.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            rows.push([1.0, 0.0]);
            y.push(if i < 3 { 1.0 } else { 0.0 });
            rows.push([1.0, 1.0]);
            y.push(if i < 6 { 1.0 } else { 0.0 });
        }
        let x = design(&rows);
        let fit = GlmProblem {
            design: &x,
            response: &y,
            weights: None,
            link: Link::Logistic,
            ridge: 0.0,
            bound: None,
        }
        .fit(&[0.0, 0.0], &SolverConfig::default())
        .unwrap();
        let logit = |p: f64| libm::log(p / (1.0 - p));
        assert!((fit.coef[0] - logit(0.3)).abs() < 1e-6);
        assert!((fit.coef[1] - (logit(0.6) - logit(0.3))).abs() < 1e-6);
    }

    #[test]
    fn poisson_box_keeps_degenerate_stratum_finite() {
        // x is identically zero when the indicator is off.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            rows.push([1.0, 0.0]);
            y.push(0.0);
            rows.push([1.0, 1.0]);
            y.push((i % 7) as f64);
        }
        let x = design(&rows);
        let fit = GlmProblem {
            design: &x,
            response: &y,
            weights: None,
            link: Link::Poisson,
            ridge: 0.0,
            bound: Some(15.0),
        }
        .fit(&[0.0, 0.0], &SolverConfig::default())
        .unwrap();
        assert!(fit.clamped);
        assert!((fit.coef[0] + 15.0).abs() < 1e-4);
        let mean_on: f64 = y.iter().skip(1).step_by(2).sum::<f64>() / 40.0;
        assert!((fit.coef[0] + fit.coef[1] - libm::log(mean_on)).abs() < 1e-6);
    }

    #[test]
    fn least_squares_recovers_line() {
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [1.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 + 0.5 * i as f64).collect();
        let (coef, rss) = least_squares(&design(&rows), &y).unwrap();
        assert!((coef[0] - 2.0).abs() < 1e-10 && (coef[1] - 0.5).abs() < 1e-10);
        assert!(rss < 1e-18);
    }
}
