//! Ising model for a binary outcome vector with covariate-dependent node terms.
//!
//! `P(y | w) ∝ exp( Σ_j (θ_jjᵀ w) y_j + Σ_{j<k} θ_jk y_j y_k )`, where `w`
//! always starts with an intercept entry equal to one. Everything here works
//! by full enumeration of the `2^q` outcome configurations, so `q` is capped
//! at [`MAX_NODES`].

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::math;

pub const MAX_NODES: usize = 15;

/// One configuration of the `q` binary outcomes; `y_1` is the least significant bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct OutcomeConfig(pub u32);

impl OutcomeConfig {
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() > MAX_NODES {
            return Err(Error::QTooLarge(bits.len()));
        }
        let mut mask = 0u32;
        for (j, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => mask |= 1 << j,
                _ => return Err(Error::NonBinaryOutcome),
            }
        }
        Ok(Self(mask))
    }

    #[inline]
    pub fn get(self, j: usize) -> bool {
        self.0 >> j & 1 == 1
    }

    /// `y_j` as 0.0 / 1.0.
    #[inline]
    pub fn value(self, j: usize) -> f64 {
        (self.0 >> j & 1) as f64
    }

    #[inline]
    pub fn with(self, j: usize, on: bool) -> Self {
        if on {
            Self(self.0 | 1 << j)
        } else {
            Self(self.0 & !(1 << j))
        }
    }

    pub fn bits(self, q: usize) -> Vec<u8> {
        (0..q).map(|j| self.get(j) as u8).collect()
    }

    /// All `2^q` configurations in binary counting order.
    pub fn all(q: usize) -> impl Iterator<Item = OutcomeConfig> {
        (0..1u32 << q).map(OutcomeConfig)
    }
}

pub fn check_q(q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::InvalidConfig("at least one node is required".into()));
    }
    if q > MAX_NODES {
        return Err(Error::QTooLarge(q));
    }
    Ok(())
}

pub fn check_intercept(w: &[f64]) -> Result<()> {
    match w.first() {
        Some(&v) if v == 1.0 => Ok(()),
        Some(&v) => Err(Error::MissingIntercept(v)),
        None => Err(Error::MissingIntercept(f64::NAN)),
    }
}

/// Position bookkeeping for node-wise stacked regressors.
///
/// Node `j`'s regressor vector concatenates, in node order, a block of
/// `pair_width` entries for every other node `k` and one block of
/// `node_width` entries at `j`'s own position. The pseudo-likelihood uses
/// `pair_width = 1`, `node_width = d + 1`, giving
/// `(y_1, …, y_{j-1}, wᵀ, y_{j+1}, …, y_q)`; the augmented model uses
/// `pair_width = p`, `node_width = p + d + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackedLayout {
    pub q: usize,
    pub pair_width: usize,
    pub node_width: usize,
}

impl StackedLayout {
    pub fn ising(q: usize, w_len: usize) -> Self {
        Self {
            q,
            pair_width: 1,
            node_width: w_len,
        }
    }

    pub fn dim(&self) -> usize {
        (self.q - 1) * self.pair_width + self.node_width
    }

    pub fn node_block(&self, j: usize) -> Range<usize> {
        let start = j * self.pair_width;
        start..start + self.node_width
    }

    /// Block of node `j`'s vector that multiplies outcome `k` (`k != j`).
    pub fn pair_block(&self, j: usize, k: usize) -> Range<usize> {
        debug_assert_ne!(j, k);
        let start = if k < j {
            k * self.pair_width
        } else {
            k * self.pair_width + self.node_width - self.pair_width
        };
        start..start + self.pair_width
    }

    /// Scalar position of `θ_jk` when `pair_width == 1`.
    pub fn pair_pos(&self, j: usize, k: usize) -> usize {
        self.pair_block(j, k).start
    }
}

/// Symmetric Ising parameters `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingParams {
    q: usize,
    w_len: usize,
    node: Vec<f64>,
    pair: Vec<f64>,
}

impl IsingParams {
    /// All-zero parameters for `q` nodes and adjustment vectors of length `w_len`
    /// (intercept included).
    pub fn zeros(q: usize, w_len: usize) -> Result<Self> {
        check_q(q)?;
        if w_len == 0 {
            return Err(Error::InvalidConfig("w must include the intercept".into()));
        }
        Ok(Self {
            q,
            w_len,
            node: vec![0.0; q * w_len],
            pair: vec![0.0; q * q],
        })
    }

    /// Builds parameters for `w = (1)` from a symmetric `q × q` matrix whose
    /// diagonal holds the node intercepts.
    pub fn from_matrix(m: &Mat) -> Result<Self> {
        let q = m.rows();
        if m.cols() != q {
            return Err(Error::DimensionMismatch {
                what: "parameter matrix",
                expected: q,
                found: m.cols(),
            });
        }
        if !m.is_symmetric(0.0) {
            return Err(Error::InvalidConfig("parameter matrix must be symmetric".into()));
        }
        let mut theta = Self::zeros(q, 1)?;
        for j in 0..q {
            theta.node[j] = m[(j, j)];
            for k in 0..j {
                theta.set_pair(j, k, m[(j, k)]);
            }
        }
        Ok(theta)
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn w_len(&self) -> usize {
        self.w_len
    }

    pub fn layout(&self) -> StackedLayout {
        StackedLayout::ising(self.q, self.w_len)
    }

    #[inline]
    pub fn node(&self, j: usize) -> &[f64] {
        &self.node[j * self.w_len..(j + 1) * self.w_len]
    }

    pub fn node_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.node[j * self.w_len..(j + 1) * self.w_len]
    }

    #[inline]
    pub fn pair(&self, j: usize, k: usize) -> f64 {
        self.pair[j * self.q + k]
    }

    /// Sets `θ_jk = θ_kj = value`. Diagonal writes are ignored.
    pub fn set_pair(&mut self, j: usize, k: usize, value: f64) {
        if j == k {
            return;
        }
        self.pair[j * self.q + k] = value;
        self.pair[k * self.q + j] = value;
    }

    /// Node `j`'s coefficients in stacked order (`θ_j` of the conditional logistic model).
    pub fn stacked(&self, j: usize) -> Vec<f64> {
        let layout = self.layout();
        let mut v = vec![0.0; layout.dim()];
        v[layout.node_block(j)].copy_from_slice(self.node(j));
        for k in (0..self.q).filter(|&k| k != j) {
            v[layout.pair_pos(j, k)] = self.pair(j, k);
        }
        v
    }

    /// Combines node-wise stacked estimates: pair terms are averaged over the
    /// two nodes that share them, node terms are copied.
    pub fn symmetrize(q: usize, w_len: usize, stacked: &[Vec<f64>]) -> Result<Self> {
        let mut theta = Self::zeros(q, w_len)?;
        let layout = theta.layout();
        if stacked.len() != q {
            return Err(Error::DimensionMismatch {
                what: "node vectors",
                expected: q,
                found: stacked.len(),
            });
        }
        for (j, v) in stacked.iter().enumerate() {
            if v.len() != layout.dim() {
                return Err(Error::DimensionMismatch {
                    what: "stacked node vector",
                    expected: layout.dim(),
                    found: v.len(),
                });
            }
            theta.node_mut(j).copy_from_slice(&v[layout.node_block(j)]);
        }
        for j in 0..q {
            for k in j + 1..q {
                let avg = 0.5 * (stacked[j][layout.pair_pos(j, k)] + stacked[k][layout.pair_pos(k, j)]);
                theta.set_pair(j, k, avg);
            }
        }
        Ok(theta)
    }

    /// Pair matrix with node intercepts on the diagonal (the layout used in tables).
    pub fn to_matrix(&self) -> Mat {
        let mut m = Mat::zeros(self.q, self.q);
        for j in 0..self.q {
            for k in 0..self.q {
                m[(j, k)] = if j == k { self.node(j)[0] } else { self.pair(j, k) };
            }
        }
        m
    }

    /// Every scalar parameter, node blocks first then pairs `j < k`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.node.clone();
        for j in 0..self.q {
            for k in j + 1..self.q {
                v.push(self.pair(j, k));
            }
        }
        v
    }

    pub fn unflatten(&mut self, v: &[f64]) -> Result<()> {
        let n = self.node.len() + self.q * (self.q - 1) / 2;
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                what: "flattened Ising parameters",
                expected: n,
                found: v.len(),
            });
        }
        let nn = self.node.len();
        self.node.copy_from_slice(&v[..nn]);
        let mut idx = self.node.len();
        for j in 0..self.q {
            for k in j + 1..self.q {
                self.set_pair(j, k, v[idx]);
                idx += 1;
            }
        }
        Ok(())
    }

    pub fn n_flat(&self) -> usize {
        self.node.len() + self.q * (self.q - 1) / 2
    }

    fn check_w(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.w_len {
            return Err(Error::DimensionMismatch {
                what: "adjustment vector w",
                expected: self.w_len,
                found: w.len(),
            });
        }
        check_intercept(w)
    }

    /// Node linear predictors `θ_jjᵀ w`.
    pub fn node_terms(&self, w: &[f64]) -> Vec<f64> {
        (0..self.q).map(|j| dot(self.node(j), w)).collect()
    }

    fn energy(&self, node_terms: &[f64], y: OutcomeConfig) -> f64 {
        let mut e = 0.0;
        for j in 0..self.q {
            if y.get(j) {
                e += node_terms[j];
                for k in j + 1..self.q {
                    if y.get(k) {
                        e += self.pair(j, k);
                    }
                }
            }
        }
        e
    }
}

/// `Σ_j (θ_jjᵀ w) y_j + Σ_{j<k} θ_jk y_j y_k`.
pub fn log_unnormalized(theta: &IsingParams, y: OutcomeConfig, w: &[f64]) -> Result<f64> {
    theta.check_w(w)?;
    Ok(theta.energy(&theta.node_terms(w), y))
}

/// Probability table over the `2^q` configurations, indexed by [`OutcomeConfig`] bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDistribution {
    q: usize,
    probs: Vec<f64>,
}

impl ConfigDistribution {
    /// Normalizes log-weights with the max-subtraction trick.
    pub fn from_log_weights(q: usize, log_weights: &[f64]) -> Result<Self> {
        debug_assert_eq!(log_weights.len(), 1 << q);
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::NumericalUnderflow);
        }
        if !max.is_finite() {
            return Err(Error::InvalidConfig("non-finite configuration log-weight".into()));
        }
        let mut probs: Vec<f64> = log_weights.iter().map(|l| math::exp(l - max)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self { q, probs })
    }

    pub fn from_probs(q: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << q {
            return Err(Error::DimensionMismatch {
                what: "probability table",
                expected: 1 << q,
                found: probs.len(),
            });
        }
        Ok(Self { q, probs })
    }

    pub fn point_mass(q: usize, y: OutcomeConfig) -> Self {
        let mut probs = vec![0.0; 1 << q];
        probs[y.0 as usize] = 1.0;
        Self { q, probs }
    }

    pub fn uniform(q: usize) -> Self {
        let n = 1usize << q;
        Self {
            q,
            probs: vec![1.0 / n as f64; n],
        }
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn prob(&self, y: OutcomeConfig) -> f64 {
        self.probs[y.0 as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (OutcomeConfig, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (OutcomeConfig(i as u32), p))
    }

    /// Inverse-CDF draw.
    pub fn draw(&self, rng: &mut impl Rng) -> OutcomeConfig {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return OutcomeConfig(i as u32);
            }
        }
        // Rounding left the cumulative sum just under one.
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        OutcomeConfig(last as u32)
    }
}

pub fn joint_pmf(theta: &IsingParams, w: &[f64]) -> Result<ConfigDistribution> {
    check_q(theta.q)?;
    theta.check_w(w)?;
    let node_terms = theta.node_terms(w);
    let lw: Vec<f64> = OutcomeConfig::all(theta.q)
        .map(|y| theta.energy(&node_terms, y))
        .collect();
    ConfigDistribution::from_log_weights(theta.q, &lw)
}

/// `θ_jjᵀ w + Σ_{k≠j} θ_jk y_k`; bit `j` of `y` is ignored.
pub fn conditional_logodds(
    theta: &IsingParams,
    j: usize,
    y: OutcomeConfig,
    w: &[f64],
) -> Result<f64> {
    if j >= theta.q {
        return Err(Error::DimensionMismatch {
            what: "node index",
            expected: theta.q,
            found: j,
        });
    }
    theta.check_w(w)?;
    let mut v = dot(theta.node(j), w);
    for k in (0..theta.q).filter(|&k| k != j) {
        v += theta.pair(j, k) * y.value(k);
    }
    Ok(v)
}

/// Independent exact draws from the joint pmf.
pub fn sample(
    theta: &IsingParams,
    w: &[f64],
    rng: &mut impl Rng,
    count: usize,
) -> Result<Vec<OutcomeConfig>> {
    let pmf = joint_pmf(theta, w)?;
    Ok((0..count).map(|_| pmf.draw(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn reference_theta() -> IsingParams {
        let m = Mat::from_rows(&[&[0.1, 0.3, -0.6], &[0.3, -0.3, 0.4], &[-0.6, 0.4, 0.2]]).unwrap();
        IsingParams::from_matrix(&m).unwrap()
    }

    #[test]
    fn log_unnormalized_examples() {
        let zero = IsingParams::zeros(3, 1).unwrap();
        assert_eq!(log_unnormalized(&zero, OutcomeConfig(5), &[1.0]).unwrap(), 0.0);

        let mut t = IsingParams::zeros(2, 1).unwrap();
        t.node_mut(0)[0] = 0.7;
        t.node_mut(1)[0] = -1.1;
        t.set_pair(0, 1, 0.25);
        let v = log_unnormalized(&t, OutcomeConfig(0b11), &[1.0]).unwrap();
        assert!((v - (0.7 - 1.1 + 0.25)).abs() < 1e-15);

        let y = OutcomeConfig::from_bits(&[1, 0, 1]).unwrap();
        let v = log_unnormalized(&reference_theta(), y, &[1.0]).unwrap();
        assert!((v + 0.3).abs() < 1e-12);
    }

    #[test]
    fn intercept_is_validated() {
        let t = reference_theta();
        assert!(matches!(
            log_unnormalized(&t, OutcomeConfig(0), &[2.0]),
            Err(Error::MissingIntercept(_))
        ));
        assert!(matches!(
            joint_pmf(&t, &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pmf_edge_cases() {
        let pmf = joint_pmf(&IsingParams::zeros(3, 1).unwrap(), &[1.0]).unwrap();
        for (_, p) in pmf.iter() {
            assert!((p - 0.125).abs() < 1e-15);
        }
        let pmf = joint_pmf(&IsingParams::zeros(1, 1).unwrap(), &[1.0]).unwrap();
        assert_eq!(pmf.prob(OutcomeConfig(1)), 0.5);
        assert!(matches!(IsingParams::zeros(16, 1), Err(Error::QTooLarge(16))));
    }

    #[test]
    fn pmf_matches_enumeration_oracle() {
        let t = reference_theta();
        let pmf = joint_pmf(&t, &[1.0]).unwrap();
        let weights: Vec<f64> = (0..8u32)
            .map(|m| {
                let y = [m & 1, m >> 1 & 1, m >> 2 & 1].map(|b| b as f64);
                let e = 0.1 * y[0] - 0.3 * y[1] + 0.2 * y[2] + 0.3 * y[0] * y[1] - 0.6 * y[0] * y[2]
                    + 0.4 * y[1] * y[2];
                libm::exp(e)
            })
            .collect();
        let z: f64 = weights.iter().sum();
        for m in 0..8u32 {
            assert!((pmf.prob(OutcomeConfig(m)) - weights[m as usize] / z).abs() < 1e-14);
        }
        assert!((pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_logodds_examples() {
        let t = reference_theta();
        let y = OutcomeConfig::from_bits(&[0, 1, 0]).unwrap();
        let v = conditional_logodds(&t, 0, y, &[1.0]).unwrap();
        assert!((v - 0.4).abs() < 1e-14);
        // ratio of joint probabilities with y_1 toggled
        let pmf = joint_pmf(&t, &[1.0]).unwrap();
        let ratio = libm::log(pmf.prob(y.with(0, true)) / pmf.prob(y.with(0, false)));
        assert!((v - ratio).abs() < 1e-10);
        let flipped = conditional_logodds(&t, 0, y.with(2, true), &[1.0]).unwrap();
        assert!((flipped - v - t.pair(0, 2)).abs() < 1e-15);
        let zero = IsingParams::zeros(3, 1).unwrap();
        assert_eq!(conditional_logodds(&zero, 2, y, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn sampler_uniform_and_saturated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = sample(&IsingParams::zeros(3, 1).unwrap(), &[1.0], &mut rng, 100_000).unwrap();
        let mut counts = [0usize; 8];
        draws.iter().for_each(|y| counts[y.0 as usize] += 1);
        for c in counts {
            assert!((c as f64 / 1e5 - 0.125).abs() < 0.01);
        }
        let mut t = IsingParams::zeros(2, 1).unwrap();
        t.node_mut(0)[0] = 20.0;
        let draws = sample(&t, &[1.0], &mut rng, 10_000).unwrap();
        assert!(draws.iter().all(|y| y.get(0)));
    }

    #[test]
    fn stacked_layout_positions() {
        let l = StackedLayout::ising(4, 3);
        assert_eq!(l.dim(), 6);
        assert_eq!(l.node_block(0), 0..3);
        assert_eq!(l.pair_pos(0, 1), 3);
        assert_eq!(l.pair_pos(2, 0), 0);
        assert_eq!(l.pair_pos(2, 1), 1);
        assert_eq!(l.node_block(2), 2..5);
        assert_eq!(l.pair_pos(2, 3), 5);
        let aug = StackedLayout {
            q: 3,
            pair_width: 2,
            node_width: 4,
        };
        assert_eq!(aug.dim(), 8);
        assert_eq!(aug.pair_block(1, 0), 0..2);
        assert_eq!(aug.node_block(1), 2..6);
        assert_eq!(aug.pair_block(1, 2), 6..8);
    }

    #[test]
    fn symmetrize_averages_pairs() {
        let l = StackedLayout::ising(2, 1);
        let mut a = vec![0.0; l.dim()];
        let mut b = vec![0.0; l.dim()];
        a[l.pair_pos(0, 1)] = 0.4;
        b[l.pair_pos(1, 0)] = 0.2;
        a[l.node_block(0).start] = 1.5;
        let t = IsingParams::symmetrize(2, 1, &[a, b]).unwrap();
        assert!((t.pair(0, 1) - 0.3).abs() < 1e-15);
        assert_eq!(t.pair(0, 1).to_bits(), t.pair(1, 0).to_bits());
        assert_eq!(t.node(0), &[1.5]);
    }

    #[test]
    fn flatten_roundtrip() {
        let t = reference_theta();
        let mut u = IsingParams::zeros(3, 1).unwrap();
        u.unflatten(&t.flatten()).unwrap();
        assert_eq!(t, u);
    }
}
