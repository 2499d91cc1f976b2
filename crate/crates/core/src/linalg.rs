//! Small dense linear algebra and a safeguarded Newton root finder.
//!
//! Every system solved here is tiny (the largest are the augmented-model node
//! regressions with a few dozen coefficients), so plain Gaussian elimination
//! with partial pivoting is all that is needed.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Pivots smaller than this in magnitude mark the matrix as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self += alpha * v v^T`.
    pub fn add_outer(&mut self, alpha: f64, v: &[f64]) {
        debug_assert!(self.rows == v.len() && self.cols == v.len());
        for (i, vi) in v.iter().enumerate() {
            let a = alpha * vi;
            if a == 0.0 {
                continue;
            }
            for (o, vj) in self.row_mut(i).iter_mut().zip(v) {
                *o += a * vj;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn add_diagonal(&mut self, alpha: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += alpha;
        }
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)].abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn inverse(&self) -> Result<Mat> {
        let n = self.square_dim()?;
        let lu = Lu::factor(self)?;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = lu.solve(&e);
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        Ok(inv)
    }

    fn square_dim(&self) -> Result<usize> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                what: "square matrix",
                expected: self.rows,
                found: self.cols,
            });
        }
        Ok(self.rows)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| {
        if x.is_nan() {
            f64::INFINITY
        } else {
            m.max(x.abs())
        }
    })
}

/// LU factorization with partial pivoting.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &Mat) -> Result<Self> {
        let n = a.square_dim()?;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot_row, pivot) = (col..n)
                .map(|r| (r, lu[r * n + col]))
                .fold((col, 0.0f64), |best, (r, v)| {
                    if v.abs() > best.1.abs() || v.is_nan() {
                        (r, v)
                    } else {
                        best
                    }
                });
            if !(pivot.abs() >= PIVOT_TOLERANCE) {
                return Err(Error::SingularMatrix { column: col, pivot });
            }
            if pivot_row != col {
                for k in 0..n {
                    lu.swap(col * n + k, pivot_row * n + k);
                }
                perm.swap(col, pivot_row);
            }
            for r in col + 1..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                if factor != 0.0 {
                    for k in col + 1..n {
                        lu[r * n + k] -= factor * lu[col * n + k];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.lu[i * n + k] * x[k]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.lu[i * n + k] * x[k]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.square_dim()?;
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            what: "right-hand side",
            expected: n,
            found: b.len(),
        });
    }
    Ok(Lu::factor(a)?.solve(b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            grad_tol: 1e-8,
            step_halvings: 30,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig("grad_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Root {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Newton's method for `f(x) = 0` with step halving on `||f||_inf`.
///
/// A step is halved until the residual norm decreases; if `step_halvings`
/// halvings do not produce a decrease the solve is abandoned.
pub fn newton_root<F, J>(f: F, jacobian: J, x0: &[f64], cfg: &SolverConfig) -> Result<Root>
where
    F: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> Mat,
{
    cfg.validate()?;
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if fx.len() != x.len() {
        return Err(Error::DimensionMismatch {
            what: "residual",
            expected: x.len(),
            found: fx.len(),
        });
    }
    let mut res = norm_inf(&fx);
    let mut trial = vec![0.0; x.len()];
    for iter in 0..cfg.max_iters {
        if res <= cfg.grad_tol {
            return Ok(Root {
                x,
                iterations: iter,
                residual: res,
            });
        }
        let neg_f: Vec<f64> = fx.iter().map(|v| -v).collect();
        let step = solve_linear(&jacobian(&x), &neg_f)?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.step_halvings {
            for ((t, xi), si) in trial.iter_mut().zip(&x).zip(&step) {
                *t = xi + scale * si;
            }
            let ft = f(&trial);
            let rt = norm_inf(&ft);
            if rt < res || rt <= cfg.grad_tol {
                x.copy_from_slice(&trial);
                fx = ft;
                res = rt;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: iter + 1,
                residual: res,
            });
        }
    }
    if res <= cfg.grad_tol {
        return Ok(Root {
            x,
            iterations: cfg.max_iters,
            residual: res,
        });
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iters,
        residual: res,
    })
}

/// Central finite differences of a scalar function.
pub fn finite_diff_grad<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Default step for [`finite_diff_grad`].
pub const FD_STEP: f64 = 1e-6;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut impl Rng) -> Mat {
        let mut b = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let mut a = b.transpose().mul(&b);
        a.add_diagonal(n as f64 * 0.1);
        a
    }

    #[test]
    fn identity_and_diagonal_solves() {
        let x = solve_linear(&Mat::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let a = Mat::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]).unwrap();
        assert_eq!(solve_linear(&a, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 17, 64] {
            let a = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = solve_linear(&a, &b).unwrap();
            let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(u, v)| u - v).collect();
            assert!(norm_inf(&r) <= 1e-8 * (1.0 + norm_inf(&b)), "n={n}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(
            solve_linear(&a, &[1.0, 1.0]),
            Err(Error::SingularMatrix { .. })
        ));
        assert!(matches!(
            solve_linear(&Mat::identity(2), &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(6, &mut rng);
        let prod = a.mul(&a.inverse().unwrap());
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn newton_scalar_linear() {
        let root = newton_root(
            |x| vec![x[0] - 3.0],
            |_| Mat::identity(1),
            &[0.0],
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(root.x, vec![3.0]);
        assert_eq!(root.iterations, 1);
    }

    #[test]
    fn newton_on_quadratic_matches_linear_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(4, &mut rng);
        let b = [1.0, -2.0, 0.5, 3.0];
        let expected = solve_linear(&a, &b).unwrap();
        let root = newton_root(
            |x| a.mul_vec(x).iter().zip(&b).map(|(u, v)| u - v).collect(),
            |_| a.clone(),
            &[0.0; 4],
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(root.iterations <= 2);
        for (u, v) in root.x.iter().zip(&expected) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn newton_flags_separable_logistic() {
        // Two points, perfectly separated by the sign of the regressor.
        let xs = [-1.0, 1.0];
        let ys = [0.0, 1.0];
        let score = |b: &[f64]| {
            vec![xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| x * (y - crate::math::sigmoid(b[0] * x)))
                .sum::<f64>()]
        };
        let jac = |b: &[f64]| {
            let h: f64 = xs
                .iter()
                .map(|x| {
                    let p = crate::math::sigmoid(b[0] * x);
                    -x * x * p * (1.0 - p)
                })
                .sum();
            Mat::from_vec(1, 1, vec![h]).unwrap()
        };
        let cfg = SolverConfig {
            max_iters: 15,
            ..SolverConfig::default()
        };
        match newton_root(score, jac, &[0.0], &cfg) {
            Err(Error::NoConvergence { .. }) | Err(Error::SingularMatrix { .. }) => {}
            Ok(root) => assert!(root.x[0] > 15.0, "separation should push the slope out"),
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn finite_differences() {
        let g = finite_diff_grad(|x| x[0] * x[0], &[3.0], FD_STEP);
        assert!((g[0] - 6.0).abs() < 1e-4);
        let g = finite_diff_grad(|x| x.iter().sum(), &[0.3, -2.0, 7.0], FD_STEP);
        for v in g {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }
}
