//! Ising model for `y` times per-outcome surrogate models for `x`.
//!
//! `P(ȳ | z) ∝ exp(Ising energy of ȳ) · Π_j f_j(x_j | ȳ_j, w)`, each `f_j` a
//! regression of surrogate `x_j` on `(wᵀ, y_j)` from a Gaussian, logistic or
//! Poisson family.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::ConditionalModel;
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::glm::{least_squares, GlmProblem, Link};
use crate::ising::{check_q, IsingParams, OutcomeConfig};
use crate::linalg::{dot, Mat, SolverConfig};
use crate::math;

/// Box on the log-link linear predictors of logistic and Poisson surrogates.
pub const LOG_LINK_BOUND: f64 = 15.0;

/// Residual variances below this make a Gaussian surrogate degenerate.
const MIN_VARIANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateFamily {
    Gaussian,
    Logistic,
    Poisson,
}

/// Fitted `f_j`. Coefficients act on `(wᵀ, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub family: SurrogateFamily,
    pub coef: Vec<f64>,
    /// `log σ²` for the Gaussian family, unused otherwise.
    pub log_var: f64,
    /// Some linear predictor was held on the box boundary during fitting.
    pub clamped: bool,
    pub iterations: usize,
}

impl Surrogate {
    fn n_params(&self) -> usize {
        self.coef.len() + usize::from(self.family == SurrogateFamily::Gaussian)
    }

    fn linear(&self, w: &[f64], yj: f64) -> f64 {
        dot(&self.coef[..w.len()], w) + self.coef[w.len()] * yj
    }

    fn log_density(&self, xj: f64, w: &[f64], yj: f64) -> f64 {
        let eta = self.linear(w, yj);
        match self.family {
            SurrogateFamily::Gaussian => {
                let r = xj - eta;
                -0.5 * (math::LN_2PI + self.log_var) - 0.5 * r * r * math::exp(-self.log_var)
            }
            SurrogateFamily::Logistic => xj * eta + math::log_sigmoid(-eta),
            SurrogateFamily::Poisson => xj * eta - math::exp(eta) - math::ln_gamma(xj + 1.0),
        }
    }

    /// `∂ log f / ∂ξ` written into `out` (length [`Self::n_params`]).
    fn gradient(&self, xj: f64, w: &[f64], yj: f64, out: &mut [f64]) {
        let eta = self.linear(w, yj);
        let d_eta = match self.family {
            SurrogateFamily::Gaussian => (xj - eta) * math::exp(-self.log_var),
            SurrogateFamily::Logistic => xj - math::sigmoid(eta),
            SurrogateFamily::Poisson => xj - math::exp(eta),
        };
        let wl = w.len();
        for (o, v) in out[..wl].iter_mut().zip(w) {
            *o = d_eta * v;
        }
        out[wl] = d_eta * yj;
        if self.family == SurrogateFamily::Gaussian {
            let r = xj - eta;
            out[wl + 1] = -0.5 + 0.5 * r * r * math::exp(-self.log_var);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosParams {
    pub theta: IsingParams,
    pub surrogates: Vec<Surrogate>,
}

impl PosParams {
    pub fn any_clamped(&self) -> bool {
        self.surrogates.iter().any(|s| s.clamped)
    }
}

impl ConditionalModel for PosParams {
    fn q(&self) -> usize {
        self.theta.q()
    }
    fn p(&self) -> usize {
        self.theta.q()
    }
    fn w_len(&self) -> usize {
        self.theta.w_len()
    }
    fn n_params(&self) -> usize {
        self.theta.n_flat() + self.surrogates.iter().map(Surrogate::n_params).sum::<usize>()
    }
    fn params(&self) -> Vec<f64> {
        let mut v = self.theta.flatten();
        for s in &self.surrogates {
            v.extend_from_slice(&s.coef);
            if s.family == SurrogateFamily::Gaussian {
                v.push(s.log_var);
            }
        }
        v
    }
    fn set_params(&mut self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                what: "surrogate model parameters",
                expected: self.n_params(),
                found: eta.len(),
            });
        }
        let nt = self.theta.n_flat();
        self.theta.unflatten(&eta[..nt])?;
        let mut idx = nt;
        for s in &mut self.surrogates {
            let len = s.coef.len();
            s.coef.copy_from_slice(&eta[idx..idx + len]);
            idx += len;
            if s.family == SurrogateFamily::Gaussian {
                s.log_var = eta[idx];
                idx += 1;
            }
        }
        Ok(())
    }

    fn log_weights(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let q = self.q();
        let node_terms = self.theta.node_terms(w);
        // log f_j for y_j = 0 and y_j = 1.
        let dens: Vec<[f64; 2]> = self
            .surrogates
            .iter()
            .enumerate()
            .map(|(j, s)| [s.log_density(x[j], w, 0.0), s.log_density(x[j], w, 1.0)])
            .collect();
        for y in OutcomeConfig::all(q) {
            let mut e = 0.0;
            for j in 0..q {
                let on = y.get(j);
                e += dens[j][usize::from(on)];
                if on {
                    e += node_terms[j];
                    for k in (j + 1..q).filter(|&k| y.get(k)) {
                        e += self.theta.pair(j, k);
                    }
                }
            }
            out[y.0 as usize] = e;
        }
    }

    fn log_weight_gradients(&self, x: &[f64], w: &[f64], out: &mut Mat) {
        let q = self.q();
        let wl = w.len();
        let n_node = q * wl;
        let nt = self.theta.n_flat();
        let mut offsets = Vec::with_capacity(q);
        let mut idx = nt;
        for s in &self.surrogates {
            offsets.push(idx);
            idx += s.n_params();
        }
        let grads: Vec<[Vec<f64>; 2]> = self
            .surrogates
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let mut g = [vec![0.0; s.n_params()], vec![0.0; s.n_params()]];
                s.gradient(x[j], w, 0.0, &mut g[0]);
                s.gradient(x[j], w, 1.0, &mut g[1]);
                g
            })
            .collect();
        for y in OutcomeConfig::all(q) {
            let row = out.row_mut(y.0 as usize);
            row.iter_mut().for_each(|v| *v = 0.0);
            let mut pair_idx = n_node;
            for j in 0..q {
                let on = y.get(j);
                if on {
                    row[j * wl..(j + 1) * wl].copy_from_slice(w);
                }
                for k in j + 1..q {
                    if on && y.get(k) {
                        row[pair_idx] = 1.0;
                    }
                    pair_idx += 1;
                }
                let g = &grads[j][usize::from(on)];
                row[offsets[j]..offsets[j] + g.len()].copy_from_slice(g);
            }
        }
    }
}

fn check_support(family: SurrogateFamily, node: usize, x: f64) -> Result<()> {
    let ok = match family {
        SurrogateFamily::Gaussian => x.is_finite(),
        SurrogateFamily::Logistic => x == 0.0 || x == 1.0,
        SurrogateFamily::Poisson => x >= 0.0 && x.is_finite() && libm::floor(x) == x,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "surrogate {node} value {x} is outside the support of the {family:?} family"
        )))
    }
}

fn fit_surrogate(
    data: &[LabeledSample],
    j: usize,
    family: SurrogateFamily,
    cfg: &SolverConfig,
) -> Result<Surrogate> {
    let w_len = data[0].w.len();
    let dim = w_len + 1;
    let mut design = Mat::zeros(data.len(), dim);
    let mut response = Vec::with_capacity(data.len());
    let mut ones = 0usize;
    for (i, s) in data.iter().enumerate() {
        check_support(family, j, s.x[j])?;
        let row = design.row_mut(i);
        row[..w_len].copy_from_slice(&s.w);
        row[w_len] = s.y.value(j);
        ones += usize::from(s.y.get(j));
        response.push(s.x[j]);
    }
    if ones == 0 || ones == data.len() {
        return Err(Error::DegenerateSurrogate {
            node: j,
            reason: "outcome stratum is empty",
        });
    }
    match family {
        SurrogateFamily::Gaussian => {
            let (coef, rss) = least_squares(&design, &response)?;
            let var = rss / data.len() as f64;
            if !(var > MIN_VARIANCE) {
                return Err(Error::DegenerateSurrogate {
                    node: j,
                    reason: "zero residual variance",
                });
            }
            Ok(Surrogate {
                family,
                coef,
                log_var: math::ln(var),
                clamped: false,
                iterations: 1,
            })
        }
        SurrogateFamily::Logistic | SurrogateFamily::Poisson => {
            let link = if family == SurrogateFamily::Logistic {
                Link::Logistic
            } else {
                Link::Poisson
            };
            let fit = GlmProblem {
                design: &design,
                response: &response,
                weights: None,
                link,
                ridge: 0.0,
                bound: Some(LOG_LINK_BOUND),
            }
            .fit(&vec![0.0; dim], cfg)?;
            Ok(Surrogate {
                family,
                coef: fit.coef,
                log_var: 0.0,
                clamped: fit.clamped,
                iterations: fit.iterations,
            })
        }
    }
}

/// Fits one surrogate model per outcome; the Ising part is taken as given.
pub fn fit_pos(
    data: &[LabeledSample],
    theta: &IsingParams,
    families: &[SurrogateFamily],
    cfg: &SolverConfig,
) -> Result<PosParams> {
    let q = theta.q();
    check_q(q)?;
    let first = data.first().ok_or(Error::EmptyLabeled)?;
    if families.len() != q {
        return Err(Error::DimensionMismatch {
            what: "surrogate families",
            expected: q,
            found: families.len(),
        });
    }
    for s in data {
        if s.x.len() != q {
            return Err(Error::DimensionMismatch {
                what: "surrogates per subject",
                expected: q,
                found: s.x.len(),
            });
        }
        if s.w.len() != first.w.len() || s.w.len() != theta.w_len() {
            return Err(Error::DimensionMismatch {
                what: "adjustment vector w",
                expected: theta.w_len(),
                found: s.w.len(),
            });
        }
    }
    let surrogates = families
        .iter()
        .enumerate()
        .map(|(j, &f)| fit_surrogate(data, j, f, cfg).map_err(|e| e.at_node(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosParams {
        theta: theta.clone(),
        surrogates,
    })
}
