//! Random convex QP generation with controlled convexity, sparsity,
//! constraint redundancy, effective conditioning and residual-targeted
//! initial guesses.
//!
//! The cost matrix is `Q = W'W` for a sparse rank-deficient factor `W` whose
//! columns follow a geometric scaling chosen to hit a target effective
//! condition number. Half of the equality and inequality rows are duplicated
//! verbatim to make the constraint blocks linearly dependent. Right-hand
//! sides and multipliers are constructed so that the initial residuals land
//! near log-uniform targets: the rhs offsets place the primal residual, a
//! regularized least-squares fit of `(y, z)` against a constant dual target
//! places the dual one, with `z` projected onto the nonnegative orthant.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{effective_ratio, lu_factor, singular_values, symmetric_eigenvalues, DenseMatrix, LinalgError};
use crate::qp::{residuals, PrimalDualPoint, QpError, QuadraticProgram, SparseMatrix};

/// Machine epsilon used by the numerical-rank thresholds.
const EPS: f64 = 2.2e-16;
const LS_SHIFT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    /// Inclusive range for the variable count.
    pub n_range: (usize, usize),
    /// Equality rows before duplication: `round(n / u)`, `u` integer-uniform.
    pub m_divisor_range: (u32, u32),
    /// Inequality rows before duplication: `n * u`, `u` integer-uniform.
    pub p_factor_range: (u32, u32),
    /// Nonzeros per row of `W`, `A` and `G`, integer-uniform.
    pub nnz_row_range: (u32, u32),
    /// Log-uniform target for the effective condition number of `Q`.
    pub kappa_range: (f64, f64),
    /// Log-uniform targets for the initial primal and dual residuals.
    pub residual_target_range: (f64, f64),
}

impl GeneratorConfig {
    /// Training and validation scale.
    pub fn training() -> Self {
        Self {
            n_range: (20, 30),
            m_divisor_range: (2, 5),
            p_factor_range: (2, 5),
            nnz_row_range: (2, 5),
            kappa_range: (1e15, 1e20),
            residual_target_range: (1e-2, 1e2),
        }
    }

    /// Dimensions and sparsity scaled tenfold.
    pub fn scale10() -> Self {
        Self {
            n_range: (200, 300),
            ..Self::training()
        }
    }
}

/// Sparse matrix held as rows of `(column, value)` pairs; the natural shape
/// during generation, where rows are drawn and duplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    ncols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            rows: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn push_row(&mut self, row: Vec<(usize, f64)>) {
        self.rows.push(row);
    }

    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                t.push((i, j, v));
            }
        }
        t
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows(), self.ncols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                d.set(i, j, v);
            }
        }
        d
    }

    /// `out += M x` over the sparse rows.
    pub fn mul_acc(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[i] += v * x[j];
            }
        }
    }
}

/// A value whose log10 is uniform on `[log10 lo, log10 hi]`.
pub fn sample_log_uniform<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    assert!(lo > 0.0 && lo <= hi, "log-uniform bounds must satisfy 0 < lo <= hi");
    if lo == hi {
        return lo;
    }
    let (llo, lhi) = (lo.log10(), hi.log10());
    10f64.powf(rng.random_range(llo..lhi))
}

fn sample_int_uniform<R: Rng + ?Sized>(range: (u32, u32), rng: &mut R) -> u32 {
    rng.random_range(range.0..=range.1)
}

fn sparse_row<R: Rng + ?Sized>(n: usize, nnz: usize, rng: &mut R) -> Vec<(usize, f64)> {
    // distinct columns, uniform without replacement
    let nnz = nnz.min(n);
    let mut cols: Vec<usize> = Vec::with_capacity(nnz);
    while cols.len() < nnz {
        let c = rng.random_range(0..n);
        if !cols.contains(&c) {
            cols.push(c);
        }
    }
    cols.sort_unstable();
    cols.into_iter()
        .map(|c| (c, rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Random sparse factor `W` of shape `h x n` with `nnz_row` standard-normal
/// entries per row, then columnwise geometric scaling
/// `(1/sqrt(kappa))^((j-1)/(n-1))` imposing an approximate singular-value
/// decay so that `kappa_e(W'W)` lands near the target.
pub fn build_scaled_factor<R: Rng + ?Sized>(
    n: usize,
    h: usize,
    nnz_row: usize,
    kappa_target: f64,
    rng: &mut R,
) -> SparseRows {
    let mut w = SparseRows::new(n);
    for _ in 0..h {
        w.push_row(sparse_row(n, nnz_row, rng));
    }
    if kappa_target != 1.0 && n > 1 {
        let base = 1.0 / kappa_target.sqrt();
        for row in w.rows.iter_mut() {
            for (j, v) in row.iter_mut() {
                *v *= base.powf(*j as f64 / (n - 1) as f64);
            }
        }
    }
    w
}

/// Effective condition number from the factor: the squared ratio of the
/// largest to the smallest positive singular value of `W`, with singular
/// values at or below `sigma_max * max(h, n) * eps` counted as zero.
pub fn kappa_e_from_factor(w: &SparseRows) -> Result<f64, LinalgError> {
    let sv = singular_values(&w.to_dense());
    let rel = w.nrows().max(w.ncols()) as f64 * EPS;
    effective_ratio(&sv, rel).map(|r| r * r)
}

/// Effective condition number of a PSD matrix from its eigenvalues, with the
/// analogous relative zero threshold.
pub fn kappa_e_from_psd(q: &SparseMatrix) -> Result<f64, LinalgError> {
    let n = q.nrows();
    let mut dense = DenseMatrix::zeros(n, n);
    for (i, j, v) in q.triplets() {
        dense.set(i, j, v);
    }
    let eig = symmetric_eigenvalues(&dense);
    effective_ratio(&eig, n as f64 * EPS)
}

/// Constraint structure and cost of one random problem, before right-hand
/// sides exist.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub obj_mat: SparseMatrix,
    pub obj_vec: Vec<f64>,
    pub eq_rows: SparseRows,
    pub ineq_rows: SparseRows,
    pub kappa_target: f64,
    pub kappa_achieved: f64,
    pub nnz_row: usize,
}

/// Draws the cost `Q = W'W` (exactly symmetric, rank at most `ceil(n/2)`),
/// the linear cost, and the constraint rows with half of them appended again
/// verbatim so the blocks are linearly dependent.
pub fn build_structure<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<Skeleton, QpError> {
    let n = rng.random_range(cfg.n_range.0..=cfg.n_range.1);
    let m_div = sample_int_uniform(cfg.m_divisor_range, rng) as f64;
    let m_base = ((n as f64 / m_div).round() as usize).max(1);
    let p_base = n * sample_int_uniform(cfg.p_factor_range, rng) as usize;
    let nnz_row = sample_int_uniform(cfg.nnz_row_range, rng) as usize;
    let kappa_target = sample_log_uniform(cfg.kappa_range.0, cfg.kappa_range.1, rng);

    let h = n.div_ceil(2);
    let w = build_scaled_factor(n, h, nnz_row, kappa_target, rng);
    let kappa_achieved = kappa_e_from_factor(&w).map_err(QpError::from)?;

    // Q = W'W accumulated once per (i <= j) pair and mirrored bitwise
    let mut acc = DenseMatrix::zeros(n, n);
    for row in w.rows() {
        for &(c1, v1) in row {
            for &(c2, v2) in row {
                if c2 >= c1 {
                    acc.add_to(c1, c2, v1 * v2);
                }
            }
        }
    }
    let mut q_triplets = Vec::new();
    for i in 0..n {
        for j in i..n {
            let v = acc.get(i, j);
            if v != 0.0 {
                q_triplets.push((i, j, v));
                if j > i {
                    q_triplets.push((j, i, v));
                }
            }
        }
    }
    let obj_mat = SparseMatrix::from_triplets(n, n, &q_triplets)?;
    let obj_vec: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

    let mut eq_rows = SparseRows::new(n);
    for _ in 0..m_base {
        eq_rows.push_row(sparse_row(n, nnz_row, rng));
    }
    let mut ineq_rows = SparseRows::new(n);
    for _ in 0..p_base {
        ineq_rows.push_row(sparse_row(n, nnz_row, rng));
    }
    duplicate_rows(&mut eq_rows, (m_base as f64 / 2.0).round() as usize, rng);
    duplicate_rows(&mut ineq_rows, (p_base as f64 / 2.0).round() as usize, rng);

    Ok(Skeleton {
        obj_mat,
        obj_vec,
        eq_rows,
        ineq_rows,
        kappa_target,
        kappa_achieved,
        nnz_row,
    })
}

fn duplicate_rows<R: Rng + ?Sized>(rows: &mut SparseRows, count: usize, rng: &mut R) {
    let base = rows.nrows();
    if base == 0 {
        return;
    }
    for _ in 0..count {
        let pick = rng.random_range(0..base);
        let copy = rows.rows[pick].clone();
        rows.push_row(copy);
    }
}

/// Right-hand sides and a primal-dual guess hitting the residual targets.
///
/// `b = Ax + r_prim * 1` and `d = Gx + r_prim * 1 + mu` with `mu` drawn
/// componentwise uniform on `[0.5, 1.5]`, so the equality block of the
/// primal residual equals the target exactly at `x`. The multipliers solve
/// the regularized normal equations of
/// `min_{y,z} || A'y + G'z - (r_dual * 1 - Qx - q) ||^2`
/// and `z` is then projected onto the nonnegative orthant.
pub fn build_initial_guess<R: Rng + ?Sized>(
    skeleton: &Skeleton,
    x: &[f64],
    r_prim_target: f64,
    r_dual_target: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>, PrimalDualPoint), QpError> {
    let n = skeleton.obj_vec.len();
    let m = skeleton.eq_rows.nrows();
    let p = skeleton.ineq_rows.nrows();
    assert_eq!(x.len(), n);

    let mut b = vec![0.0; m];
    skeleton.eq_rows.mul_acc(x, &mut b);
    for v in b.iter_mut() {
        *v += r_prim_target;
    }
    let mut gx = vec![0.0; p];
    skeleton.ineq_rows.mul_acc(x, &mut gx);
    let mut d = vec![0.0; p];
    for i in 0..p {
        d[i] = gx[i] + r_prim_target + rng.random_range(0.5..1.5);
    }

    // rhs of the least-squares fit: r_dual * 1 - Qx - q
    let mut rhs = vec![0.0; n];
    skeleton.obj_mat.mul_acc(x, &mut rhs);
    for i in 0..n {
        rhs[i] = r_dual_target - rhs[i] - skeleton.obj_vec[i];
    }

    // Gram matrix of the stacked constraint rows, shifted for the duplicated
    // (hence dependent) rows, gives the normal equations of [A' G'] w = rhs.
    let dim = m + p;
    let mut w_sol = vec![0.0; dim];
    if dim > 0 {
        let stacked: Vec<&Vec<(usize, f64)>> = skeleton
            .eq_rows
            .rows()
            .iter()
            .chain(skeleton.ineq_rows.rows().iter())
            .collect();
        let mut gram = DenseMatrix::zeros(dim, dim);
        let mut scatter = vec![0.0; n];
        for k in 0..dim {
            for &(c, v) in stacked[k] {
                scatter[c] = v;
            }
            for l in k..dim {
                let dot: f64 = stacked[l].iter().map(|&(c, v)| scatter[c] * v).sum();
                gram.set(k, l, dot);
                gram.set(l, k, dot);
            }
            for &(c, _) in stacked[k] {
                scatter[c] = 0.0;
            }
            gram.add_to(k, k, LS_SHIFT);
            w_sol[k] = stacked[k].iter().map(|&(c, v)| rhs[c] * v).sum();
        }
        let factors = lu_factor(gram)?;
        factors.solve_in_place(&mut w_sol);
    }
    let y = w_sol[..m].to_vec();
    let z: Vec<f64> = w_sol[m..].iter().map(|&v| v.max(0.0)).collect();

    let mut s = vec![0.0; p];
    for i in 0..p {
        s[i] = (d[i] - gx[i]).max(1e-2);
    }
    Ok((
        b,
        d,
        PrimalDualPoint {
            x: x.to_vec(),
            s,
            y,
            z,
        },
    ))
}

/// Metadata recorded with every generated problem; reproducible from `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemMeta {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub kappa_target: f64,
    pub kappa_achieved: f64,
    pub rprim_target: f64,
    pub rprim_achieved: f64,
    pub rdual_target: f64,
    pub rdual_achieved: f64,
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub qp: QuadraticProgram,
    pub guess: PrimalDualPoint,
    pub meta: ProblemMeta,
}

/// One full problem from a seed.
pub fn build_problem(cfg: &GeneratorConfig, seed: u64) -> Result<GeneratedProblem, QpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skeleton = build_structure(cfg, &mut rng)?;
    let n = skeleton.obj_vec.len();
    let rp = sample_log_uniform(
        cfg.residual_target_range.0,
        cfg.residual_target_range.1,
        &mut rng,
    );
    let rd = sample_log_uniform(
        cfg.residual_target_range.0,
        cfg.residual_target_range.1,
        &mut rng,
    );
    let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let (b, d, guess) = build_initial_guess(&skeleton, &x, rp, rd, &mut rng)?;

    let m = skeleton.eq_rows.nrows();
    let p = skeleton.ineq_rows.nrows();
    let qp = QuadraticProgram::new(
        skeleton.obj_mat.clone(),
        skeleton.obj_vec.clone(),
        SparseMatrix::from_triplets(m, n, &skeleton.eq_rows.to_triplets())?,
        b,
        SparseMatrix::from_triplets(p, n, &skeleton.ineq_rows.to_triplets())?,
        d,
    )?;
    let res = residuals(&qp, &guess)?;
    Ok(GeneratedProblem {
        meta: ProblemMeta {
            seed,
            n,
            m,
            p,
            kappa_target: skeleton.kappa_target,
            kappa_achieved: skeleton.kappa_achieved,
            rprim_target: rp,
            rprim_achieved: res.r_prim,
            rdual_target: rd,
            rdual_achieved: res.r_dual,
        },
        qp,
        guess,
    })
}

/// Stream-separated per-problem seed (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic batch; problems are independent across derived seeds.
pub fn generate_batch(
    cfg: &GeneratorConfig,
    count: usize,
    master_seed: u64,
) -> Result<Vec<GeneratedProblem>, QpError> {
    (0..count)
        .map(|i| build_problem(cfg, derive_seed(master_seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_uniform_degenerate_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_log_uniform(10.0, 10.0, &mut rng), 10.0);
        let a = sample_log_uniform(1e-2, 1e2, &mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_log_uniform(1e-2, 1e2, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn log_uniform_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mean_log: f64 = (0..n)
            .map(|_| sample_log_uniform(1e-2, 1e2, &mut rng).log10())
            .sum::<f64>()
            / n as f64;
        // log10 uniform on [-2, 2]: mean 0, sd 4/sqrt(12)
        let se = 4.0 / (12f64).sqrt() / (n as f64).sqrt();
        assert!(mean_log.abs() <= 3.0 * se, "mean {mean_log}, se {se}");
    }

    #[test]
    #[should_panic]
    fn log_uniform_rejects_bad_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        sample_log_uniform(1.0, 0.5, &mut rng);
    }

    #[test]
    fn factor_rows_have_exact_nnz_and_unit_scaling_at_kappa_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = build_scaled_factor(10, 5, 3, 1.0, &mut rng);
        assert_eq!(w.nrows(), 5);
        for row in w.rows() {
            assert_eq!(row.len(), 3);
        }
        // same seed, scaled: entries are the unscaled values times the factor
        let w1 = build_scaled_factor(10, 5, 3, 1e8, &mut ChaCha8Rng::seed_from_u64(4));
        let base: f64 = 1.0 / (1e8f64).sqrt();
        for (r0, r1) in w.rows().iter().zip(w1.rows()) {
            for (&(j0, v0), &(j1, v1)) in r0.iter().zip(r1) {
                assert_eq!(j0, j1);
                let expect = v0 * base.powf(j0 as f64 / 9.0);
                assert!((v1 - expect).abs() <= 1e-15 * expect.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn two_column_scaling_exponent() {
        // n=2: column 2 (index 1) scaled by (1/sqrt(kappa))^{1/1}
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w0 = build_scaled_factor(2, 1, 2, 1.0, &mut ChaCha8Rng::seed_from_u64(6));
        let w1 = build_scaled_factor(2, 1, 2, 1e4, &mut rng);
        let r0 = &w0.rows()[0];
        let r1 = &w1.rows()[0];
        assert_eq!(r0[0].1, r1[0].1); // column 0 untouched
        assert!((r1[1].1 - r0[1].1 * 1e-2).abs() <= 1e-16 * r0[1].1.abs());
    }

    #[test]
    fn kappa_of_diagonal_psd() {
        let q = SparseMatrix::from_triplets(3, 3, &[(0, 0, 4.0), (1, 1, 1.0)]).unwrap();
        assert!((kappa_e_from_psd(&q).unwrap() - 4.0).abs() < 1e-9);
        let eye = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!((kappa_e_from_psd(&eye).unwrap() - 1.0).abs() < 1e-12);
        let zero = SparseMatrix::empty(2, 2);
        assert!(kappa_e_from_psd(&zero).is_err());
    }

    #[test]
    fn kappa_from_factor_matches_svd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = build_scaled_factor(12, 6, 4, 1e3, &mut rng);
        let mine = kappa_e_from_factor(&w).unwrap();
        let d = w.to_dense();
        let na = nalgebra::DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d.get(i, j));
        let sv = na.svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0f64, f64::max);
        let cutoff = smax * 12.0 * EPS;
        let smin = sv.iter().cloned().filter(|&s| s > cutoff).fold(f64::INFINITY, f64::min);
        let oracle = (smax / smin) * (smax / smin);
        assert!(
            (mine - oracle).abs() <= 1e-8 * oracle,
            "{mine} vs {oracle}"
        );
    }

    #[test]
    fn structure_counts_and_psd_rank() {
        let cfg = GeneratorConfig {
            n_range: (20, 20),
            ..GeneratorConfig::training()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sk = build_structure(&cfg, &mut rng).unwrap();
        let n = sk.obj_vec.len();
        assert_eq!(n, 20);
        // duplication: totals are 3/2 of the base counts (rounded)
        let m = sk.eq_rows.nrows();
        let p = sk.ineq_rows.nrows();
        assert!(m >= 6 && m % 3 == 0 || m >= 6); // base in [4,10], total base+round(base/2)
        assert!(p >= 60);
        // exact duplicates exist
        let rows = sk.eq_rows.rows();
        let base_m = (m * 2).div_ceil(3);
        for k in base_m..m {
            assert!(rows[..base_m].contains(&rows[k]));
        }
        // Q is PSD with rank <= ceil(n/2): nonneg eigenvalues beyond tiny noise
        let eig = {
            let mut dense = DenseMatrix::zeros(n, n);
            for (i, j, v) in sk.obj_mat.triplets() {
                dense.set(i, j, v);
            }
            symmetric_eigenvalues(&dense)
        };
        assert!(eig.iter().all(|&e| e >= -1e-10));
        let emax = eig[0];
        let numerical_rank = eig.iter().filter(|&&e| e > emax * n as f64 * EPS).count();
        assert!(numerical_rank <= n.div_ceil(2));
        assert!(sk.obj_mat.is_symmetric_exact());
    }

    #[test]
    fn equality_duplication_count_example() {
        // base m = 4 -> 6 rows after duplication
        let mut rows = SparseRows::new(5);
        for i in 0..4 {
            rows.push_row(vec![(i, 1.0)]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        duplicate_rows(&mut rows, (4.0f64 / 2.0).round() as usize, &mut rng);
        assert_eq!(rows.nrows(), 6);
    }

    #[test]
    fn guess_example_identity_equalities() {
        // A = I2, x = 0, r_target = 1 -> b = (1, 1)
        let mut sk_rows = SparseRows::new(2);
        sk_rows.push_row(vec![(0, 1.0)]);
        sk_rows.push_row(vec![(1, 1.0)]);
        let skeleton = Skeleton {
            obj_mat: SparseMatrix::empty(2, 2),
            obj_vec: vec![0.0, 0.0],
            eq_rows: sk_rows,
            ineq_rows: SparseRows::new(2),
            kappa_target: 1.0,
            kappa_achieved: 1.0,
            nnz_row: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (b, d, guess) = build_initial_guess(&skeleton, &[0.0, 0.0], 1.0, 1.0, &mut rng).unwrap();
        assert_eq!(b, vec![1.0, 1.0]);
        assert!(d.is_empty());
        assert!(guess.z.is_empty());
    }

    #[test]
    fn guess_orthonormal_dual_fit() {
        // G empty, A = I, Q = I, q = 0, x = 0: least squares gives y ~= 1
        // and the achieved dual residual is the target (up to the tiny shift).
        let n = 3;
        let mut eq = SparseRows::new(n);
        for i in 0..n {
            eq.push_row(vec![(i, 1.0)]);
        }
        let eye: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        let skeleton = Skeleton {
            obj_mat: SparseMatrix::from_triplets(n, n, &eye).unwrap(),
            obj_vec: vec![0.0; n],
            eq_rows: eq,
            ineq_rows: SparseRows::new(n),
            kappa_target: 1.0,
            kappa_achieved: 1.0,
            nnz_row: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (b, _, guess) =
            build_initial_guess(&skeleton, &[0.0; 3], 0.5, 1.0, &mut rng).unwrap();
        for &y in &guess.y {
            assert!((y - 1.0).abs() <= 1e-8);
        }
        assert_eq!(b, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn guess_projects_multipliers() {
        let cfg = GeneratorConfig::training();
        for seed in 0..5 {
            let gp = build_problem(&cfg, seed).unwrap();
            assert!(gp.guess.z.iter().all(|&z| z >= 0.0));
            assert!(gp.guess.s.iter().all(|&s| s >= 1e-2));
        }
    }

    #[test]
    fn batch_is_deterministic() {
        let cfg = GeneratorConfig {
            n_range: (20, 22),
            ..GeneratorConfig::training()
        };
        let a = generate_batch(&cfg, 3, 77).unwrap();
        let b = generate_batch(&cfg, 3, 77).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.meta, y.meta);
            assert_eq!(x.guess, y.guess);
            assert_eq!(x.qp.obj_vec(), y.qp.obj_vec());
        }
        assert_ne!(a[0].meta.seed, a[1].meta.seed);
    }

    #[test]
    fn achieved_initial_residuals_span_decades() {
        let cfg = GeneratorConfig {
            n_range: (20, 25),
            ..GeneratorConfig::training()
        };
        let batch = generate_batch(&cfg, 60, 123).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for gp in &batch {
            lo = lo.min(gp.meta.rprim_achieved);
            hi = hi.max(gp.meta.rprim_achieved);
        }
        assert!(hi / lo >= 1e3, "span {lo}..{hi}");
    }
}
