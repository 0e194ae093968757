//! Dense linear algebra kernels: row-pivoted LU, symmetric Jacobi
//! eigenvalues, and one-sided Jacobi singular values.
//!
//! The LU solver backs the Newton systems; desk-scale systems
//! (a few thousand unknowns) are handled dense for robustness. The one-sided
//! Jacobi routine works on the matrix columns directly, which preserves the
//! relative accuracy of small singular values under strong column scaling --
//! the regime produced by the conditioning-controlled problem generator.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot column {0})")]
    Singular(usize),
    #[error("non-finite value encountered in factorization")]
    NonFinite,
    #[error("matrix has no positive spectrum")]
    ZeroMatrix,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols);
            data.extend_from_slice(r);
        }
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `y += M x`
    pub fn mul_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            y[i] += crate::qp::dot(self.row(i), x);
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (top, bottom) = self.data.split_at_mut(hi * self.ncols);
        top[lo * self.ncols..(lo + 1) * self.ncols].swap_with_slice(&mut bottom[..self.ncols]);
    }
}

/// Row-pivoted LU factorization, stored in place (unit lower / upper).
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DenseMatrix,
    piv: Vec<usize>,
}

/// Factor a square matrix with partial (row) pivoting. A pivot that is zero
/// or subnormal at working precision reports the matrix as singular.
pub fn lu_factor(mut a: DenseMatrix) -> Result<LuFactors, LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "LU requires a square matrix");
    let mut piv = Vec::with_capacity(n);
    for k in 0..n {
        let mut best = k;
        let mut best_abs = a.get(k, k).abs();
        for i in (k + 1)..n {
            let v = a.get(i, k).abs();
            if v > best_abs {
                best = i;
                best_abs = v;
            }
        }
        if !best_abs.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        if best_abs < f64::MIN_POSITIVE {
            return Err(LinalgError::Singular(k));
        }
        a.swap_rows(k, best);
        piv.push(best);
        let pivot = a.get(k, k);
        let inv = 1.0 / pivot;
        for i in (k + 1)..n {
            let l = a.get(i, k) * inv;
            a.set(i, k, l);
            if l == 0.0 {
                continue;
            }
            // rank-1 update on the trailing block, row-contiguous
            let (upper, lower) = a.data.split_at_mut(i * n);
            let pivot_row = &upper[k * n..(k + 1) * n];
            let row_i = &mut lower[..n];
            for j in (k + 1)..n {
                row_i[j] -= l * pivot_row[j];
            }
        }
    }
    Ok(LuFactors { lu: a, piv })
}

impl LuFactors {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n);
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        // forward substitution with unit lower triangle
        for i in 1..n {
            let mut acc = b[i];
            let row = self.lu.row(i);
            for j in 0..i {
                acc -= row[j] * b[j];
            }
            b[i] = acc;
        }
        // back substitution
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = b[i];
            for j in (i + 1)..n {
                acc -= row[j] * b[j];
            }
            b[i] = acc / row[i];
        }
    }
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m.get(i, j).abs());
            }
        }
        let scale = (0..n).fold(0.0f64, |acc, i| acc.max(m.get(i, i).abs()));
        if off <= 1e-300 || off <= 1e-16 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    eig.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    eig
}

/// Singular values of a rectangular matrix by one-sided (Hestenes) Jacobi,
/// rotating pairs of columns until mutual orthogonality. Returned sorted
/// in decreasing order. Accurate to high relative precision for matrices
/// that are a well-conditioned matrix times a column scaling.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    // column-major working copy
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let mut norms2: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a2, b2) = (norms2[i], norms2[j]);
                if a2 == 0.0 || b2 == 0.0 {
                    continue;
                }
                let g: f64 = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
                if g.abs() <= tol * (a2 * b2).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (b2 - a2) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                let ci = &mut left[i];
                let cj = &mut right[0];
                for k in 0..m {
                    let vi = ci[k];
                    let vj = cj[k];
                    ci[k] = c * vi - s * vj;
                    cj[k] = s * vi + c * vj;
                }
                norms2[i] = ci.iter().map(|v| v * v).sum();
                norms2[j] = cj.iter().map(|v| v * v).sum();
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = norms2.iter().map(|&v| v.sqrt()).collect();
    sv.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Effective condition number of a PSD matrix given its spectrum-like values
/// (eigenvalues or squared singular values are both fine as long as they are
/// consistent). `rel_threshold` decides which values count as zero.
pub(crate) fn effective_ratio(values: &[f64], rel_threshold: f64) -> Result<f64, LinalgError> {
    let vmax = values.iter().fold(0.0f64, |a, &b| a.max(b));
    if vmax <= 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let cutoff = vmax * rel_threshold;
    let vmin = values
        .iter()
        .copied()
        .filter(|&v| v > cutoff)
        .fold(f64::INFINITY, f64::min);
    Ok(vmax / vmin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_hand_system() {
        // [[2, 1], [1, 3]] x = [3, 5] -> x = [0.8, 1.4]
        let a = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let f = lu_factor(a).unwrap();
        let mut b = [3.0, 5.0];
        f.solve_in_place(&mut b);
        assert!((b[0] - 0.8).abs() < 1e-14);
        assert!((b[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn lu_pivots_on_zero_diagonal() {
        let a = DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let f = lu_factor(a).unwrap();
        let mut b = [2.0, 3.0];
        f.solve_in_place(&mut b);
        assert_eq!(b, [3.0, 2.0]);
    }

    #[test]
    fn lu_detects_singularity() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(lu_factor(a), Err(LinalgError::Singular(_))));
    }

    #[test]
    fn lu_rejects_non_finite() {
        let a = DenseMatrix::from_rows(&[&[f64::NAN, 2.0], &[2.0, 4.0]]);
        assert!(matches!(lu_factor(a), Err(LinalgError::NonFinite)));
    }

    #[test]
    fn lu_random_residual() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2, 5, 17, 40] {
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a.set(i, j, rng.random_range(-1.0..1.0));
                }
                a.add_to(i, i, 3.0);
            }
            let x_true: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut b = vec![0.0; n];
            a.mul_acc(&x_true, &mut b);
            let f = lu_factor(a.clone()).unwrap();
            let mut x = b.clone();
            f.solve_in_place(&mut x);
            let mut r = b.clone();
            let mut ax = vec![0.0; n];
            a.mul_acc(&x, &mut ax);
            for i in 0..n {
                r[i] -= ax[i];
            }
            let rn = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let bn = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            assert!(rn <= 1e-12 * bn.max(1.0), "n={n} residual {rn}");
        }
    }

    #[test]
    fn jacobi_eigenvalues_of_diagonal() {
        let a = DenseMatrix::from_rows(&[&[4.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let e = symmetric_eigenvalues(&a);
        assert_eq!(e, vec![4.0, 1.0, 0.0]);
    }

    #[test]
    fn jacobi_eigenvalues_match_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let mine = symmetric_eigenvalues(&a);
        let na = nalgebra::DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let mut oracle: Vec<f64> = na.symmetric_eigenvalues().iter().copied().collect();
        oracle.sort_unstable_by(|x, y| y.partial_cmp(x).unwrap());
        for (m, o) in mine.iter().zip(&oracle) {
            assert!((m - o).abs() <= 1e-10 * o.abs().max(1.0));
        }
    }

    #[test]
    fn singular_values_match_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let (m, n) = (6usize, 10usize);
        let mut a = DenseMatrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                a.set(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let mine = singular_values(&a);
        let na = nalgebra::DMatrix::from_fn(m, n, |i, j| a.get(i, j));
        let mut oracle: Vec<f64> = na.svd(false, false).singular_values.iter().copied().collect();
        oracle.sort_unstable_by(|x, y| y.partial_cmp(x).unwrap());
        for k in 0..m {
            assert!(
                (mine[k] - oracle[k]).abs() <= 1e-10 * oracle[0],
                "sv {k}: {} vs {}",
                mine[k],
                oracle[k]
            );
        }
        for k in m..n {
            assert!(mine[k] <= 1e-10 * oracle[0]);
        }
    }

    #[test]
    fn effective_ratio_thresholds_zeros() {
        assert_eq!(effective_ratio(&[4.0, 1.0, 0.0], 1e-12).unwrap(), 4.0);
        assert_eq!(effective_ratio(&[1.0, 1.0], 1e-12).unwrap(), 1.0);
        assert!(effective_ratio(&[0.0, 0.0], 1e-12).is_err());
    }
}
