//! Problem data, iterates, residuals and termination logic.
//!
//! A problem is `minimize 0.5 x'Qx + q'x  subject to  Ax = b, Gx <= d` with
//! `Q` symmetric positive semi-definite. Inequalities get a slack `s >= 0`
//! inside the solver; the termination residuals below use only `(x, y, z)`.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("matrix entry ({0}, {1}) out of bounds for {2}x{3}")]
    IndexOutOfBounds(usize, usize, usize, usize),
    #[error("duplicate matrix entry at ({0}, {1})")]
    DuplicateEntry(usize, usize),
    #[error("cost matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(#[from] crate::linalg::LinalgError),
}

/// Column-compressed sparse matrix. Triplets at the interface, CSC inside.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Assemble from coordinate triplets. Out-of-bounds indices and duplicate
    /// `(i, j)` entries are errors; explicit zeros are kept.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, QpError> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(QpError::IndexOutOfBounds(i, j, nrows, ncols));
            }
            if !v.is_finite() {
                return Err(QpError::NonFinite("matrix triplet"));
            }
            entries.push((j, i, v));
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(QpError::DuplicateEntry(w[0].1, w[0].0));
            }
        }
        let mut col_ptr = vec![0usize; ncols + 1];
        for &(j, _, _) in &entries {
            col_ptr[j + 1] += 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let row_idx = entries.iter().map(|e| e.1).collect();
        let vals = entries.iter().map(|e| e.2).collect();
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            vals,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y += A x`
    pub fn mul_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k]] += self.vals[k] * xj;
            }
        }
    }

    /// `y += A' x`
    pub fn tr_mul_acc(&self, x: &[f64], y: &mut [f64]) {
        self.tr_mul_acc_scaled(x, 1.0, y);
    }

    /// `y += c * A' x`
    pub fn tr_mul_acc_scaled(&self, x: &[f64], c: f64, y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc += self.vals[k] * x[self.row_idx[k]];
            }
            y[j] += c * acc;
        }
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        let mut row_sums = vec![0.0f64; self.nrows];
        for k in 0..self.vals.len() {
            row_sums[self.row_idx[k]] += self.vals[k].abs();
        }
        row_sums.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// Entries in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |k| (self.row_idx[k], j, self.vals[k]))
        })
    }

    fn find(&self, i: usize, j: usize) -> Option<f64> {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        match self.row_idx[lo..hi].binary_search(&i) {
            Ok(k) => Some(self.vals[lo + k]),
            Err(_) => None,
        }
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric_exact(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        self.triplets().all(|(i, j, v)| self.find(j, i) == Some(v))
    }
}

/// Cached infinity norms of the problem data, used to normalize residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataNorms {
    pub obj_mat: f64,
    pub obj_vec: f64,
    pub eq_mat: f64,
    pub eq_rhs: f64,
    pub ineq_mat: f64,
    pub ineq_rhs: f64,
}

/// Immutable convex QP data.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    obj_mat: SparseMatrix,
    obj_vec: Vec<f64>,
    eq_mat: SparseMatrix,
    eq_rhs: Vec<f64>,
    ineq_mat: SparseMatrix,
    ineq_rhs: Vec<f64>,
    norms: DataNorms,
}

impl QuadraticProgram {
    pub fn new(
        obj_mat: SparseMatrix,
        obj_vec: Vec<f64>,
        eq_mat: SparseMatrix,
        eq_rhs: Vec<f64>,
        ineq_mat: SparseMatrix,
        ineq_rhs: Vec<f64>,
    ) -> Result<Self, QpError> {
        let n = obj_vec.len();
        if obj_mat.nrows() != n || obj_mat.ncols() != n {
            return Err(QpError::DimensionMismatch("cost matrix must be n x n"));
        }
        if eq_mat.ncols() != n || ineq_mat.ncols() != n {
            return Err(QpError::DimensionMismatch("constraint matrices must have n columns"));
        }
        if eq_mat.nrows() != eq_rhs.len() {
            return Err(QpError::DimensionMismatch("equality rhs length"));
        }
        if ineq_mat.nrows() != ineq_rhs.len() {
            return Err(QpError::DimensionMismatch("inequality rhs length"));
        }
        if let Some((i, j, _)) = obj_mat.triplets().find(|&(i, j, v)| obj_mat.find(j, i) != Some(v)) {
            return Err(QpError::NotSymmetric(i, j));
        }
        for (name, v) in [("q", &obj_vec), ("b", &eq_rhs), ("d", &ineq_rhs)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(QpError::NonFinite(name));
            }
        }
        let norms = DataNorms {
            obj_mat: obj_mat.inf_norm(),
            obj_vec: vec_inf_norm(&obj_vec),
            eq_mat: eq_mat.inf_norm(),
            eq_rhs: vec_inf_norm(&eq_rhs),
            ineq_mat: ineq_mat.inf_norm(),
            ineq_rhs: vec_inf_norm(&ineq_rhs),
        };
        Ok(Self {
            obj_mat,
            obj_vec,
            eq_mat,
            eq_rhs,
            ineq_mat,
            ineq_rhs,
            norms,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.obj_vec.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    pub fn obj_mat(&self) -> &SparseMatrix {
        &self.obj_mat
    }

    pub fn obj_vec(&self) -> &[f64] {
        &self.obj_vec
    }

    pub fn eq_mat(&self) -> &SparseMatrix {
        &self.eq_mat
    }

    pub fn eq_rhs(&self) -> &[f64] {
        &self.eq_rhs
    }

    pub fn ineq_mat(&self) -> &SparseMatrix {
        &self.ineq_mat
    }

    pub fn ineq_rhs(&self) -> &[f64] {
        &self.ineq_rhs
    }

    pub fn data_norms(&self) -> &DataNorms {
        &self.norms
    }

    /// `0.5 x'Qx + q'x`
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut qx = vec![0.0; self.num_vars()];
        self.obj_mat.mul_acc(x, &mut qx);
        0.5 * dot(&qx, x) + dot(&self.obj_vec, x)
    }

    /// Denominator for the normalized primal residual (floor 1 for all-zero data).
    pub fn prim_scale(&self) -> f64 {
        let d = self
            .norms
            .eq_mat
            .max(self.norms.eq_rhs)
            .max(self.norms.ineq_mat)
            .max(self.norms.ineq_rhs);
        if d == 0.0 {
            1.0
        } else {
            d
        }
    }

    /// Denominator for the normalized dual residual (floor 1 for all-zero data).
    pub fn dual_scale(&self) -> f64 {
        let d = self
            .norms
            .obj_mat
            .max(self.norms.obj_vec)
            .max(self.norms.eq_mat)
            .max(self.norms.ineq_mat);
        if d == 0.0 {
            1.0
        } else {
            d
        }
    }
}

/// Primal-dual iterate `(x, s, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPoint {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl PrimalDualPoint {
    pub fn zeros(n: usize, m: usize, p: usize) -> Self {
        Self {
            x: vec![0.0; n],
            s: vec![0.0; p],
            y: vec![0.0; m],
            z: vec![0.0; p],
        }
    }

    pub fn zeros_for(qp: &QuadraticProgram) -> Self {
        Self::zeros(qp.num_vars(), qp.num_eq(), qp.num_ineq())
    }

    pub fn dims_match(&self, qp: &QuadraticProgram) -> bool {
        self.x.len() == qp.num_vars()
            && self.s.len() == qp.num_ineq()
            && self.y.len() == qp.num_eq()
            && self.z.len() == qp.num_ineq()
    }
}

/// Raw and normalized termination residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPair {
    pub r_prim: f64,
    pub r_dual: f64,
    pub sigma_prim: f64,
    pub sigma_dual: f64,
}

/// Termination residuals of a triplet `(x, y, z)`; the slack is not used.
///
/// `r_prim` is the infinity norm of `(Ax - b, min{d - Gx, z})` with the
/// minimum taken componentwise; `r_dual` is `||Qx + q + A'y + G'z||_inf`.
pub fn residuals(qp: &QuadraticProgram, pt: &PrimalDualPoint) -> Result<ResidualPair, QpError> {
    if !pt.dims_match(qp) {
        return Err(QpError::DimensionMismatch("point does not match problem"));
    }
    for (name, v) in [("x", &pt.x), ("y", &pt.y), ("z", &pt.z)] {
        if v.iter().any(|t| t.is_nan()) {
            return Err(QpError::NonFinite(name));
        }
    }
    let (n, m, p) = (qp.num_vars(), qp.num_eq(), qp.num_ineq());

    let mut r_prim = 0.0f64;
    let mut eq = vec![0.0; m];
    qp.eq_mat.mul_acc(&pt.x, &mut eq);
    for i in 0..m {
        r_prim = r_prim.max((eq[i] - qp.eq_rhs[i]).abs());
    }
    let mut gx = vec![0.0; p];
    qp.ineq_mat.mul_acc(&pt.x, &mut gx);
    for i in 0..p {
        let slackness = (qp.ineq_rhs[i] - gx[i]).min(pt.z[i]);
        r_prim = r_prim.max(slackness.abs());
    }

    let mut dual = qp.obj_vec.clone();
    qp.obj_mat.mul_acc(&pt.x, &mut dual);
    qp.eq_mat.tr_mul_acc(&pt.y, &mut dual);
    qp.ineq_mat.tr_mul_acc(&pt.z, &mut dual);
    let r_dual = vec_inf_norm(&dual);

    let _ = n;
    Ok(ResidualPair {
        r_prim,
        r_dual,
        sigma_prim: r_prim / qp.prim_scale(),
        sigma_dual: r_dual / qp.dual_scale(),
    })
}

/// Inclusive comparison of both raw residuals against the tolerance.
pub fn check_termination(res: &ResidualPair, epsilon: f64) -> bool {
    res.r_prim <= epsilon && res.r_dual <= epsilon
}

pub(crate) fn vec_inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
