//! Regularized primal-dual interior-point solver.
//!
//! The outer loop is a proximal-point scheme: each iteration approximately
//! minimizes the primal-dual augmented Lagrangian
//!
//! ```text
//! M(x,s,y,z; theta, nu) = 0.5 x'Qx + q'x
//!     + theta_y'(Ax-b) + theta_z'(Gx-d+s)
//!     + (dx/2)||x-theta_x||^2 + 1/(2 dy)||Ax-b||^2 + 1/(2 dz)||Gx-d+s||^2
//!     - nu * sum_i log s_i
//!     + 1/(2 dy)||Ax-b + dy (theta_y - y)||^2
//!     + 1/(2 dz)||Gx-d+s + dz (theta_z - z)||^2
//! ```
//!
//! with a log barrier for `s >= 0`, then updates the prox center `theta`,
//! the barrier parameter `nu`, the inner tolerance and the regularization
//! weights `delta = (dx, dy, dz)`. The weights shrink geometrically by
//! per-iteration factors `alpha` supplied by a pluggable policy.
//!
//! The inner loop is Newton's method on the transformed gradient
//!
//! ```text
//! F(x,s,y,z) = ( Qx + q + A'y + G'z + dx (x - theta_x)
//!              , -nu/s + z
//!              , Ax - b + dy (theta_y - y)
//!              , Gx - d + s + dz (theta_z - z) )
//! ```
//!
//! which relates to the raw merit gradient through the invertible block map
//! `T` documented at [`apply_gradient_transform`]. Inner convergence is
//! declared at `||F||_2 <= eps_k`; the same transformed norm seeds the
//! initial inner tolerance. Newton systems are solved by dense row-pivoted
//! LU at desk scale; the assembly keeps the slack-scaled second block so the
//! matrix stays the classic primal-dual IP system plus regularization.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::linalg::{lu_factor, DenseMatrix, LinalgError};
use crate::qp::{
    check_termination, residuals, PrimalDualPoint, QpError, QuadraticProgram, ResidualPair,
};

const FTB_TAU: f64 = 0.995;
const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 30;
const SLACK_CLIP: f64 = 1e-8;
const DUAL_CLIP: f64 = 1e-8;
const SLACK_INIT_FLOOR: f64 = 1e-2;

/// Solver hyperparameters. Defaults follow the tuned setup used for all
/// training and benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Outer termination tolerance on both raw residuals.
    pub epsilon: f64,
    /// Inner-tolerance decay rate.
    pub kappa_eps: f64,
    /// Inner-tolerance decay damping, applied as `alpha_eps^k`.
    pub alpha_eps: f64,
    /// Initial damping factor for the adaptive first inner tolerance.
    pub xi: f64,
    /// Barrier linear decrease factor.
    pub kappa_nu: f64,
    /// Barrier superlinear exponent.
    pub theta_nu: f64,
    /// Outer-iteration cap.
    pub max_outer: usize,
    /// Regularization floor.
    pub delta_min: f64,
    /// Initial regularization weights `(dx, dy, dz)`.
    pub delta0: [f64; 3],
    /// Action bounds for the per-iteration decrease factors.
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Inner-iteration cap per subproblem.
    pub max_inner: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            kappa_eps: 0.5,
            alpha_eps: 0.98,
            xi: 1e-2,
            kappa_nu: 0.2,
            theta_nu: 1.5,
            max_outer: 25,
            delta_min: 1e-12,
            delta0: [1.0, 10.0, 10.0],
            alpha_min: 0.05,
            alpha_max: 0.95,
            max_inner: 25,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), QpError> {
        let ok = self.epsilon > 0.0
            && self.kappa_eps > 0.0
            && self.kappa_eps < 1.0
            && self.alpha_eps > 0.0
            && self.alpha_eps < 1.0
            && self.xi > 0.0
            && self.xi < 1.0
            && self.kappa_nu > 0.0
            && self.kappa_nu < 1.0
            && self.theta_nu > 0.0
            && self.theta_nu <= 2.0
            && self.delta_min > 0.0
            && self.delta0.iter().all(|&d| d >= self.delta_min)
            && self.alpha_min > 0.0
            && self.alpha_min <= self.alpha_max
            && self.alpha_max <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(QpError::DimensionMismatch("invalid solver configuration"))
        }
    }
}

/// Per-outer-iteration solver state: prox center, regularization weights,
/// barrier parameter, inner tolerance and counters.
#[derive(Debug, Clone)]
pub struct OuterState {
    pub theta_x: Vec<f64>,
    pub theta_y: Vec<f64>,
    pub theta_z: Vec<f64>,
    pub delta: [f64; 3],
    pub nu: f64,
    pub eps_inner: f64,
    pub k: usize,
    pub total_inner: usize,
    pub last_inner_count: usize,
}

impl OuterState {
    pub fn initial(qp: &QuadraticProgram, guess: &PrimalDualPoint, cfg: &SolverConfig) -> Self {
        Self {
            theta_x: guess.x.clone(),
            theta_y: guess.y.clone(),
            theta_z: guess.z.clone(),
            delta: cfg.delta0,
            nu: 1.0,
            eps_inner: 0.0, // set by the adaptive rule before the first inner solve
            k: 0,
            total_inner: 0,
            last_inner_count: 0,
        }
    }
}

/// Barrier and inner-tolerance schedule update after outer iteration `k`:
/// `nu <- max(eps/10, min(kappa_nu * nu, nu^theta_nu))` and
/// `eps_inner <- max(eps/10, kappa_eps * alpha_eps^k * eps_inner)`.
pub fn update_endogenous(state: &OuterState, cfg: &SolverConfig) -> (f64, f64) {
    let floor = cfg.epsilon / 10.0;
    let nu_next = floor.max((cfg.kappa_nu * state.nu).min(state.nu.powf(cfg.theta_nu)));
    let eps_next = floor.max(cfg.kappa_eps * cfg.alpha_eps.powi(state.k as i32) * state.eps_inner);
    (nu_next, eps_next)
}

/// Regularization update `delta <- max(delta_min, alpha .* delta)`.
/// Out-of-bounds factors are clipped into `[alpha_min, alpha_max]`.
pub fn apply_action(state: &OuterState, alpha: [f64; 3], cfg: &SolverConfig) -> [f64; 3] {
    let mut next = [0.0; 3];
    for i in 0..3 {
        let mut a = alpha[i];
        if a < cfg.alpha_min || a > cfg.alpha_max || !a.is_finite() {
            log::warn!("action component {i} = {a} outside bounds, clipping");
            a = a.clamp(cfg.alpha_min, cfg.alpha_max);
            if !a.is_finite() {
                a = cfg.alpha_max;
            }
        }
        next[i] = cfg.delta_min.max(a * state.delta[i]);
    }
    next
}

/// Maps a policy decision; the solver consults it once per outer iteration.
pub trait RegularizationPolicy {
    fn alpha(&mut self, res: &ResidualPair, nu: f64, eps_inner: f64) -> [f64; 3];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    MaxOuterReached,
    InnerStalled,
    LinearAlgebraFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Solved => "Solved",
            SolveStatus::MaxOuterReached => "MaxOuterReached",
            SolveStatus::InnerStalled => "InnerStalled",
            SolveStatus::LinearAlgebraFailure => "LinearAlgebraFailure",
        }
    }
}

/// Hyperparameter values in force during one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSample {
    pub nu: f64,
    pub eps_inner: f64,
    pub delta: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub point: PrimalDualPoint,
    pub initial_residuals: ResidualPair,
    pub residual_history: Vec<ResidualPair>,
    pub inner_counts: Vec<usize>,
    pub schedule_trace: Vec<ScheduleSample>,
    pub outer_iters: usize,
    pub total_inner: usize,
    pub objective: f64,
    /// Filled by callers that time the solve (the core has no clock).
    pub wall_time_s: f64,
}

impl SolveReport {
    pub fn final_residuals(&self) -> &ResidualPair {
        self.residual_history.last().unwrap_or(&self.initial_residuals)
    }
}

/// Reusable buffers for the inner Newton loop.
pub struct Workspace {
    grad: Vec<f64>,
    dir: Vec<f64>,
    dgrad: Vec<f64>,
    trial_grad: Vec<f64>,
    trial_point: PrimalDualPoint,
    best_point: PrimalDualPoint,
    kkt: DenseMatrix,
    rhs: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize, m: usize, p: usize) -> Self {
        let dim = n + p + m + p;
        Self {
            grad: vec![0.0; dim],
            dir: vec![0.0; dim],
            dgrad: vec![0.0; dim],
            trial_grad: vec![0.0; dim],
            trial_point: PrimalDualPoint::zeros(n, m, p),
            best_point: PrimalDualPoint::zeros(n, m, p),
            kkt: DenseMatrix::zeros(dim, dim),
            rhs: vec![0.0; dim],
        }
    }

    pub fn for_problem(qp: &QuadraticProgram) -> Self {
        Self::new(qp.num_vars(), qp.num_eq(), qp.num_ineq())
    }
}

/// Value of the primal-dual augmented Lagrangian; `+inf` outside the barrier
/// domain (`s_i <= 0`).
pub fn merit_value(
    qp: &QuadraticProgram,
    pt: &PrimalDualPoint,
    state: &OuterState,
) -> Result<f64, QpError> {
    if !pt.dims_match(qp) {
        return Err(QpError::DimensionMismatch("point does not match problem"));
    }
    if pt.s.iter().any(|&s| s <= 0.0) {
        return Ok(f64::INFINITY);
    }
    let (n, m, p) = (qp.num_vars(), qp.num_eq(), qp.num_ineq());
    let [dx, dy, dz] = state.delta;

    let mut value = qp.objective(&pt.x);

    let mut eq = vec![0.0; m];
    qp.eq_mat().mul_acc(&pt.x, &mut eq);
    for i in 0..m {
        eq[i] -= qp.eq_rhs()[i];
    }
    let mut ineq = vec![0.0; p];
    qp.ineq_mat().mul_acc(&pt.x, &mut ineq);
    for i in 0..p {
        ineq[i] += pt.s[i] - qp.ineq_rhs()[i];
    }

    for i in 0..m {
        value += state.theta_y[i] * eq[i] + eq[i] * eq[i] / (2.0 * dy);
        let aug = eq[i] + dy * (state.theta_y[i] - pt.y[i]);
        value += aug * aug / (2.0 * dy);
    }
    for i in 0..p {
        value += state.theta_z[i] * ineq[i] + ineq[i] * ineq[i] / (2.0 * dz);
        let aug = ineq[i] + dz * (state.theta_z[i] - pt.z[i]);
        value += aug * aug / (2.0 * dz);
        value -= state.nu * pt.s[i].ln();
    }
    for i in 0..n {
        let dxi = pt.x[i] - state.theta_x[i];
        value += 0.5 * dx * dxi * dxi;
    }
    Ok(value)
}

/// Transformed merit gradient `F`, written into `out` in block order
/// `(x, s, y, z)`. Errors on nonpositive slack entries.
///
/// `F = T * grad M` where `T` is the invertible block map
///
/// ```text
/// [ I  0  (2/dy) A'  (2/dz) G' ]
/// [ 0  I      0      (2/dz) I  ]
/// [ 0  0     -I          0     ]
/// [ 0  0      0         -I     ]
/// ```
///
/// acting on the `(x, s, y, z)` blocks of the raw gradient. This is the
/// transformation tested by the finite-difference consistency suite; see
/// [`apply_gradient_transform`].
pub fn transformed_gradient(
    qp: &QuadraticProgram,
    pt: &PrimalDualPoint,
    state: &OuterState,
    out: &mut [f64],
) -> Result<(), QpError> {
    if !pt.dims_match(qp) {
        return Err(QpError::DimensionMismatch("point does not match problem"));
    }
    if pt.s.iter().any(|&s| s <= 0.0) {
        return Err(QpError::NonFinite("slack outside barrier domain"));
    }
    let (n, m, p) = (qp.num_vars(), qp.num_eq(), qp.num_ineq());
    debug_assert_eq!(out.len(), n + p + m + p);
    let [dx, dy, dz] = state.delta;
    let (xb, rest) = out.split_at_mut(n);
    let (sb, rest) = rest.split_at_mut(p);
    let (yb, zb) = rest.split_at_mut(m);

    xb.copy_from_slice(qp.obj_vec());
    qp.obj_mat().mul_acc(&pt.x, xb);
    qp.eq_mat().tr_mul_acc(&pt.y, xb);
    qp.ineq_mat().tr_mul_acc(&pt.z, xb);
    for i in 0..n {
        xb[i] += dx * (pt.x[i] - state.theta_x[i]);
    }
    for i in 0..p {
        sb[i] = -state.nu / pt.s[i] + pt.z[i];
    }
    yb.fill(0.0);
    qp.eq_mat().mul_acc(&pt.x, yb);
    for i in 0..m {
        yb[i] += -qp.eq_rhs()[i] + dy * (state.theta_y[i] - pt.y[i]);
    }
    zb.fill(0.0);
    qp.ineq_mat().mul_acc(&pt.x, zb);
    for i in 0..p {
        zb[i] += -qp.ineq_rhs()[i] + pt.s[i] + dz * (state.theta_z[i] - pt.z[i]);
    }
    Ok(())
}

/// Convenience wrapper returning a fresh vector.
pub fn transformed_merit_gradient(
    qp: &QuadraticProgram,
    pt: &PrimalDualPoint,
    state: &OuterState,
) -> Result<Vec<f64>, QpError> {
    let dim = qp.num_vars() + 2 * qp.num_ineq() + qp.num_eq();
    let mut out = vec![0.0; dim];
    transformed_gradient(qp, pt, state, &mut out)?;
    Ok(out)
}

/// Applies the block transformation `T` (documented at
/// [`transformed_gradient`]) to a raw merit gradient laid out as
/// `(x, s, y, z)`. Used by tests to map finite-difference gradients of the
/// merit value onto the transformed residual.
pub fn apply_gradient_transform(
    qp: &QuadraticProgram,
    state: &OuterState,
    raw: &[f64],
) -> Vec<f64> {
    let (n, m, p) = (qp.num_vars(), qp.num_eq(), qp.num_ineq());
    assert_eq!(raw.len(), n + p + m + p);
    let [_, dy, dz] = state.delta;
    let (gx, rest) = raw.split_at(n);
    let (gs, rest) = rest.split_at(p);
    let (gy, gz) = rest.split_at(m);
    let mut out = vec![0.0; raw.len()];
    {
        let xb = &mut out[..n];
        xb.copy_from_slice(gx);
        qp.eq_mat().tr_mul_acc_scaled(gy, 2.0 / dy, xb);
        qp.ineq_mat().tr_mul_acc_scaled(gz, 2.0 / dz, xb);
    }
    for i in 0..p {
        out[n + i] = gs[i] + 2.0 / dz * gz[i];
    }
    for i in 0..m {
        out[n + p + i] = -gy[i];
    }
    for i in 0..p {
        out[n + p + m + i] = -gz[i];
    }
    out
}

fn grad_norm2(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Adaptive first inner tolerance `xi * ||F_0||_2`, floored at `epsilon/10`.
pub fn initial_inner_tolerance(
    qp: &QuadraticProgram,
    pt: &PrimalDualPoint,
    state: &OuterState,
    cfg: &SolverConfig,
) -> Result<f64, QpError> {
    let g = transformed_merit_gradient(qp, pt, state)?;
    Ok((cfg.epsilon / 10.0).max(cfg.xi * grad_norm2(&g)))
}

/// Assembles the regularized KKT system and solves for the Newton direction.
/// The direction satisfies `K * dir = -(F_x, s.*z - nu, F_y, F_z)` where the
/// second block is the slack-scaled barrier residual.
fn newton_direction(
    qp: &QuadraticProgram,
    pt: &PrimalDualPoint,
    state: &OuterState,
    work: &mut Workspace,
) -> Result<(), LinalgError> {
    let (n, m, p) = (qp.num_vars(), qp.num_eq(), qp.num_ineq());
    let dim = n + p + m + p;
    let [dx, dy, dz] = state.delta;
    let (off_s, off_y, off_z) = (n, n + p, n + p + m);

    let kkt = &mut work.kkt;
    kkt.fill(0.0);
    for (i, j, v) in qp.obj_mat().triplets() {
        kkt.add_to(i, j, v);
    }
    for i in 0..n {
        kkt.add_to(i, i, dx);
    }
    for (i, j, v) in qp.eq_mat().triplets() {
        kkt.set(j, off_y + i, v); // A' block
        kkt.set(off_y + i, j, v); // A block
    }
    for (i, j, v) in qp.ineq_mat().triplets() {
        kkt.set(j, off_z + i, v); // G' block
        kkt.set(off_z + i, j, v); // G block
    }
    for i in 0..p {
        kkt.set(off_s + i, off_s + i, pt.z[i]);
        kkt.set(off_s + i, off_z + i, pt.s[i]);
        kkt.set(off_z + i, off_s + i, 1.0);
        kkt.set(off_z + i, off_z + i, -dz);
    }
    for i in 0..m {
        kkt.set(off_y + i, off_y + i, -dy);
    }

    // right-hand side: negated residual with the slack-scaled second block
    work.rhs[..n].copy_from_slice(&work.grad[..n]);
    for i in 0..p {
        work.rhs[off_s + i] = -state.nu + pt.s[i] * pt.z[i];
    }
    work.rhs[off_y..off_y + m].copy_from_slice(&work.grad[off_y..off_y + m]);
    work.rhs[off_z..off_z + p].copy_from_slice(&work.grad[off_z..off_z + p]);
    for v in work.rhs.iter_mut() {
        *v = -*v;
    }

    let factors = lu_factor(kkt.clone())?;
    work.dir.copy_from_slice(&work.rhs[..dim]);
    factors.solve_in_place(&mut work.dir);
    if work.dir.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(())
}

/// Directional derivative of `F` along `dir`, written into `work.dgrad`.
fn gradient_directional_derivative(
    qp: &QuadraticProgram,
    pt: &PrimalDualPoint,
    state: &OuterState,
    work: &mut Workspace,
) {
    let (n, m, p) = (qp.num_vars(), qp.num_eq(), qp.num_ineq());
    let [dx, dy, dz] = state.delta;
    let (off_s, off_y, off_z) = (n, n + p, n + p + m);
    let (dxv, rest) = work.dir.split_at(n);
    let (dsv, rest) = rest.split_at(p);
    let (dyv, dzv) = rest.split_at(m);

    let out = &mut work.dgrad;
    out.fill(0.0);
    {
        let xb = &mut out[..n];
        qp.obj_mat().mul_acc(dxv, xb);
        qp.eq_mat().tr_mul_acc(dyv, xb);
        qp.ineq_mat().tr_mul_acc(dzv, xb);
        for i in 0..n {
            xb[i] += dx * dxv[i];
        }
    }
    for i in 0..p {
        out[off_s + i] = state.nu / (pt.s[i] * pt.s[i]) * dsv[i] + dzv[i];
    }
    {
        let yb = &mut out[off_y..off_y + m];
        qp.eq_mat().mul_acc(dxv, yb);
        for i in 0..m {
            yb[i] -= dy * dyv[i];
        }
    }
    {
        let zb = &mut out[off_z..off_z + p];
        qp.ineq_mat().mul_acc(dxv, zb);
        for i in 0..p {
            zb[i] += dsv[i] - dz * dzv[i];
        }
    }
}

fn axpy_point(dst: &mut PrimalDualPoint, src: &PrimalDualPoint, dir: &[f64], t: f64) {
    let n = src.x.len();
    let p = src.s.len();
    let m = src.y.len();
    for i in 0..n {
        dst.x[i] = src.x[i] + t * dir[i];
    }
    for i in 0..p {
        dst.s[i] = src.s[i] + t * dir[n + i];
    }
    for i in 0..m {
        dst.y[i] = src.y[i] + t * dir[n + p + i];
    }
    for i in 0..p {
        dst.z[i] = src.z[i] + t * dir[n + p + m + i];
    }
}

/// Largest step keeping `v + t*dv >= (1 - tau) v` componentwise for `v > 0`.
fn fraction_to_boundary(v: &[f64], dv: &[f64], tau: f64) -> f64 {
    let mut t = 1.0f64;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            t = t.min(tau * v[i] / (-dv[i]));
        }
    }
    t
}

/// Backtracking line search on `phi(t) = 0.5 ||F(pt + t dir)||_2^2` with the
/// fraction-to-boundary rule on both `s` and `z`. On success the accepted
/// trial point and its gradient are copied into `pt` / `work.grad`.
/// Returns `(step, stalled, new_gradient_norm)`.
fn line_search(
    qp: &QuadraticProgram,
    pt: &mut PrimalDualPoint,
    state: &OuterState,
    work: &mut Workspace,
) -> (f64, bool, f64) {
    let (n, m, p) = (qp.num_vars(), qp.num_eq(), qp.num_ineq());
    let phi0 = 0.5 * work.grad.iter().map(|g| g * g).sum::<f64>();
    gradient_directional_derivative(qp, pt, state, work);
    // Analytic phi'(0) = F . (DF dir); the slack scaling makes the Newton
    // direction only approximately a descent direction for this norm, so a
    // nonnegative derivative falls back to requiring plain decrease.
    let dphi0: f64 = work
        .grad
        .iter()
        .zip(work.dgrad.iter())
        .map(|(g, d)| g * d)
        .sum::<f64>()
        .min(0.0);

    let t_max = fraction_to_boundary(&pt.s, &work.dir[n..n + p], FTB_TAU)
        .min(fraction_to_boundary(&pt.z, &work.dir[n + p + m..], FTB_TAU));
    let mut t = t_max;
    let mut last_phi = f64::INFINITY;
    for trial in 0..=MAX_BACKTRACKS {
        axpy_point(&mut work.trial_point, pt, &work.dir, t);
        let phi_t = {
            let swap_err =
                transformed_gradient_into(qp, &work.trial_point, state, &mut work.trial_grad);
            match swap_err {
                Ok(()) => 0.5 * work.trial_grad.iter().map(|g| g * g).sum::<f64>(),
                Err(_) => f64::INFINITY,
            }
        };
        last_phi = phi_t;
        if phi_t <= phi0 + ARMIJO_C1 * t * dphi0 && phi_t.is_finite() {
            core::mem::swap(&mut pt.x, &mut work.trial_point.x);
            core::mem::swap(&mut pt.s, &mut work.trial_point.s);
            core::mem::swap(&mut pt.y, &mut work.trial_point.y);
            core::mem::swap(&mut pt.z, &mut work.trial_point.z);
            core::mem::swap(&mut work.grad, &mut work.trial_grad);
            return (t, false, (2.0 * phi_t).sqrt());
        }
        if trial < MAX_BACKTRACKS {
            t *= BACKTRACK_FACTOR;
        }
    }
    // all trials failed: take the last (smallest) step anyway and flag it
    log::debug!("line search stalled at t = {t}");
    axpy_point(&mut work.trial_point, pt, &work.dir, t);
    if transformed_gradient_into(qp, &work.trial_point, state, &mut work.trial_grad).is_ok()
        && last_phi.is_finite()
    {
        core::mem::swap(&mut pt.x, &mut work.trial_point.x);
        core::mem::swap(&mut pt.s, &mut work.trial_point.s);
        core::mem::swap(&mut pt.y, &mut work.trial_point.y);
        core::mem::swap(&mut pt.z, &mut work.trial_point.z);
        core::mem::swap(&mut work.grad, &mut work.trial_grad);
        (t, true, (2.0 * last_phi).sqrt())
    } else {
        // stay put; the gradient buffer still matches `pt`
        (0.0, true, (2.0 * phi0).sqrt())
    }
}

fn transformed_gradient_into(
    qp: &QuadraticProgram,
    pt: &PrimalDualPoint,
    state: &OuterState,
    out: &mut Vec<f64>,
) -> Result<(), QpError> {
    let dim = qp.num_vars() + 2 * qp.num_ineq() + qp.num_eq();
    if out.len() != dim {
        out.resize(dim, 0.0);
    }
    transformed_gradient(qp, pt, state, out)
}

/// Newton iterations on the current subproblem until `||F||_2 <= eps_inner`
/// or the inner budget runs out. Entry slacks below `1e-8` (and nonpositive
/// inequality multipliers) are clipped up. Returns the iteration count and a
/// stall flag; on a stall the best iterate seen is kept.
pub fn inner_solve(
    qp: &QuadraticProgram,
    pt: &mut PrimalDualPoint,
    state: &OuterState,
    cfg: &SolverConfig,
    work: &mut Workspace,
) -> Result<(usize, bool), LinalgError> {
    for s in pt.s.iter_mut() {
        if *s < SLACK_CLIP {
            *s = SLACK_CLIP;
        }
    }
    for z in pt.z.iter_mut() {
        if *z <= 0.0 {
            *z = DUAL_CLIP;
        }
    }
    if transformed_gradient_into(qp, pt, state, &mut work.grad).is_err() {
        return Err(LinalgError::NonFinite);
    }
    let mut norm = grad_norm2(&work.grad);
    let mut best_norm = norm;
    work.best_point.clone_from(pt);
    for iter in 0..cfg.max_inner {
        if norm <= state.eps_inner {
            return Ok((iter, false));
        }
        newton_direction(qp, pt, state, work)?;
        let (_step, _stalled, new_norm) = line_search(qp, pt, state, work);
        norm = new_norm;
        if !norm.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        if norm < best_norm {
            best_norm = norm;
            work.best_point.clone_from(pt);
        }
    }
    if norm <= state.eps_inner {
        return Ok((cfg.max_inner, false));
    }
    pt.clone_from(&work.best_point);
    Ok((cfg.max_inner, true))
}

/// Outer loop of the solver, exposed stepwise so that callers can interleave
/// their own per-iteration decisions (the RL environment does exactly that).
pub struct OuterLoop<'a> {
    qp: &'a QuadraticProgram,
    cfg: SolverConfig,
    state: OuterState,
    point: PrimalDualPoint,
    res: ResidualPair,
    initial_res: ResidualPair,
    work: Workspace,
    residual_history: Vec<ResidualPair>,
    inner_counts: Vec<usize>,
    schedule_trace: Vec<ScheduleSample>,
    status: Option<SolveStatus>,
    iterations_run: usize,
    last_stalled: bool,
}

impl<'a> OuterLoop<'a> {
    /// Validates inputs, initializes the prox center from the guess, builds a
    /// strictly positive starting iterate (`s = max(d - Gx, 1e-2)`, `z`
    /// clipped up to `1e-8`), seeds the adaptive inner tolerance, and checks
    /// the raw guess against the termination conditions so that an already
    /// optimal guess finishes without any iteration.
    pub fn start(
        qp: &'a QuadraticProgram,
        guess: &PrimalDualPoint,
        cfg: SolverConfig,
    ) -> Result<Self, QpError> {
        cfg.validate()?;
        if !guess.dims_match(qp) {
            return Err(QpError::DimensionMismatch("guess does not match problem"));
        }
        let (n, m, p) = (qp.num_vars(), qp.num_eq(), qp.num_ineq());
        let initial_res = residuals(qp, guess)?;

        let mut point = guess.clone();
        let mut gx = vec![0.0; p];
        qp.ineq_mat().mul_acc(&point.x, &mut gx);
        for i in 0..p {
            point.s[i] = (qp.ineq_rhs()[i] - gx[i]).max(SLACK_INIT_FLOOR);
        }
        for z in point.z.iter_mut() {
            if *z <= 0.0 {
                *z = DUAL_CLIP;
            }
        }

        let mut state = OuterState::initial(qp, guess, &cfg);
        state.eps_inner = initial_inner_tolerance(qp, &point, &state, &cfg)?;

        let status = if check_termination(&initial_res, cfg.epsilon) {
            Some(SolveStatus::Solved)
        } else if cfg.max_outer == 0 {
            Some(SolveStatus::MaxOuterReached)
        } else {
            None
        };
        let solved_at_guess = matches!(status, Some(SolveStatus::Solved));
        Ok(Self {
            qp,
            cfg,
            state,
            point: if solved_at_guess { guess.clone() } else { point },
            res: initial_res,
            initial_res,
            work: Workspace::new(n, m, p),
            residual_history: Vec::new(),
            inner_counts: Vec::new(),
            schedule_trace: Vec::new(),
            status,
            iterations_run: 0,
            last_stalled: false,
        })
    }

    pub fn status(&self) -> Option<SolveStatus> {
        self.status
    }

    pub fn residual_pair(&self) -> &ResidualPair {
        &self.res
    }

    pub fn nu(&self) -> f64 {
        self.state.nu
    }

    pub fn eps_inner(&self) -> f64 {
        self.state.eps_inner
    }

    pub fn delta(&self) -> [f64; 3] {
        self.state.delta
    }

    pub fn last_inner_count(&self) -> usize {
        self.state.last_inner_count
    }

    pub fn point(&self) -> &PrimalDualPoint {
        &self.point
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }

    fn run_iteration(&mut self) {
        self.schedule_trace.push(ScheduleSample {
            nu: self.state.nu,
            eps_inner: self.state.eps_inner,
            delta: self.state.delta,
        });
        match inner_solve(self.qp, &mut self.point, &self.state, &self.cfg, &mut self.work) {
            Ok((count, stalled)) => {
                self.state.last_inner_count = count;
                self.state.total_inner += count;
                self.inner_counts.push(count);
                self.last_stalled = stalled;
            }
            Err(err) => {
                log::debug!("inner solve aborted: {err}");
                self.inner_counts.push(0);
                self.residual_history.push(self.res);
                self.status = Some(SolveStatus::LinearAlgebraFailure);
                self.iterations_run += 1;
                return;
            }
        }
        match residuals(self.qp, &self.point) {
            Ok(res) => {
                self.res = res;
                self.residual_history.push(res);
            }
            Err(_) => {
                self.residual_history.push(self.res);
                self.status = Some(SolveStatus::LinearAlgebraFailure);
                self.iterations_run += 1;
                return;
            }
        }
        self.iterations_run += 1;
        if check_termination(&self.res, self.cfg.epsilon) {
            self.status = Some(SolveStatus::Solved);
        } else if self.iterations_run >= self.cfg.max_outer {
            self.status = Some(if self.last_stalled {
                SolveStatus::InnerStalled
            } else {
                SolveStatus::MaxOuterReached
            });
        }
    }

    /// Runs outer iteration 0 with the configured initial weights; the
    /// policy is first consulted after this iteration.
    pub fn first_iteration(&mut self) {
        debug_assert_eq!(self.iterations_run, 0);
        if self.status.is_some() {
            return;
        }
        self.run_iteration();
    }

    /// Applies a policy action and runs the next outer iteration: moves the
    /// prox center to the current iterate, shrinks the regularization
    /// weights, advances the barrier/tolerance schedules.
    pub fn advance(&mut self, alpha: [f64; 3]) {
        if self.status.is_some() {
            return;
        }
        debug_assert!(self.iterations_run > 0, "first_iteration must run before advance");
        self.state.theta_x.copy_from_slice(&self.point.x);
        self.state.theta_y.copy_from_slice(&self.point.y);
        self.state.theta_z.copy_from_slice(&self.point.z);
        self.state.delta = apply_action(&self.state, alpha, &self.cfg);
        let (nu, eps) = update_endogenous(&self.state, &self.cfg);
        self.state.nu = nu;
        self.state.eps_inner = eps;
        self.state.k += 1;
        self.run_iteration();
    }

    pub fn into_report(self) -> SolveReport {
        let objective = self.qp.objective(&self.point.x);
        SolveReport {
            status: self.status.unwrap_or(SolveStatus::MaxOuterReached),
            point: self.point,
            initial_residuals: self.initial_res,
            residual_history: self.residual_history,
            inner_counts: self.inner_counts,
            schedule_trace: self.schedule_trace,
            outer_iters: self.iterations_run,
            total_inner: self.state.total_inner,
            objective,
            wall_time_s: 0.0,
        }
    }

    /// Direct access for tests and the RL environment.
    pub fn state(&self) -> &OuterState {
        &self.state
    }
}

/// Full outer loop driven by a policy.
pub fn solve(
    qp: &QuadraticProgram,
    guess: &PrimalDualPoint,
    cfg: SolverConfig,
    policy: &mut dyn RegularizationPolicy,
) -> Result<SolveReport, QpError> {
    let mut outer = OuterLoop::start(qp, guess, cfg)?;
    if outer.status().is_none() {
        outer.first_iteration();
    }
    while outer.status().is_none() {
        let alpha = policy.alpha(outer.residual_pair(), outer.nu(), outer.eps_inner());
        outer.advance(alpha);
    }
    Ok(outer.into_report())
}

/// Classical multiplier-update identity residual for the equality block,
/// `||y - (theta_y + (Ax - b)/dy)||_inf`, and its inequality analogue with
/// slack. Both vanish at an exact subproblem minimizer.
pub fn dual_update_gap(
    qp: &QuadraticProgram,
    pt: &PrimalDualPoint,
    state: &OuterState,
) -> (f64, f64) {
    let (m, p) = (qp.num_eq(), qp.num_ineq());
    let mut eq = vec![0.0; m];
    qp.eq_mat().mul_acc(&pt.x, &mut eq);
    let mut gap_y = 0.0f64;
    for i in 0..m {
        let target = state.theta_y[i] + (eq[i] - qp.eq_rhs()[i]) / state.delta[1];
        gap_y = gap_y.max((pt.y[i] - target).abs());
    }
    let mut ineq = vec![0.0; p];
    qp.ineq_mat().mul_acc(&pt.x, &mut ineq);
    let mut gap_z = 0.0f64;
    for i in 0..p {
        let target = state.theta_z[i] + (ineq[i] - qp.ineq_rhs()[i] + pt.s[i]) / state.delta[2];
        gap_z = gap_z.max((pt.z[i] - target).abs());
    }
    (gap_y, gap_z)
}
