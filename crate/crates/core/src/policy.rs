//! Regularization-decay policies: fixed geometric baselines and a small
//! neural policy over the solver state.
//!
//! The state is four scalars, the normalized residuals and the two
//! endogenous parameters on a negative log10 scale. The network is a shared
//! trunk of two 25-neuron tanh layers with a tanh action head (3 outputs), a
//! linear value head, and three free log-spread parameters for the Gaussian
//! exploration noise. Actions are sampled pre-squash from a Gaussian around
//! the action-head activation and pushed through tanh; log-densities carry
//! the squash correction so they are exact for PPO ratios.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ipm::RegularizationPolicy;
use crate::qp::ResidualPair;

pub const STATE_DIM: usize = 4;
pub const HIDDEN_DIM: usize = 25;
pub const ACTION_DIM: usize = 3;

const W1_OFF: usize = 0;
const B1_OFF: usize = W1_OFF + HIDDEN_DIM * STATE_DIM;
const W2_OFF: usize = B1_OFF + HIDDEN_DIM;
const B2_OFF: usize = W2_OFF + HIDDEN_DIM * HIDDEN_DIM;
const WA_OFF: usize = B2_OFF + HIDDEN_DIM;
const BA_OFF: usize = WA_OFF + ACTION_DIM * HIDDEN_DIM;
const WV_OFF: usize = BA_OFF + ACTION_DIM;
const BV_OFF: usize = WV_OFF + HIDDEN_DIM;
const LS_OFF: usize = BV_OFF + 1;
/// Total number of trainable parameters.
pub const PARAM_COUNT: usize = LS_OFF + ACTION_DIM;

const LN_2PI: f64 = 1.8378770664093453;

/// Solver state as seen by the policy: `(-log10(sigma_prim + 1e-9),
/// -log10(sigma_dual + 1e-9), -log10(nu + 1e-17), -log10(eps + 1e-9))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn from_sigmas(sigma_prim: f64, sigma_dual: f64, nu: f64, eps_inner: f64) -> Self {
        Self([
            -(sigma_prim + 1e-9).log10(),
            -(sigma_dual + 1e-9).log10(),
            -(nu + 1e-17).log10(),
            -(eps_inner + 1e-9).log10(),
        ])
    }
}

/// Encodes normalized residuals and the endogenous parameters.
pub fn encode_state(res: &ResidualPair, nu: f64, eps_inner: f64) -> StateVector {
    StateVector::from_sigmas(res.sigma_prim, res.sigma_dual, nu, eps_inner)
}

/// MLP parameters, flattened. Layout: trunk `W1 (25x4), b1, W2 (25x25), b2`,
/// action head `Wa (3x25), ba`, value head `Wv (1x25), bv`, action
/// log-spread (3). Row-major weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    params: Vec<f64>,
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: [f64; STATE_DIM],
    pub h1: [f64; HIDDEN_DIM],
    pub h2: [f64; HIDDEN_DIM],
    pub action_pre: [f64; ACTION_DIM],
    pub action_mean: [f64; ACTION_DIM],
    pub value: f64,
}

/// One sampled action with its exact log-density.
#[derive(Debug, Clone, Copy)]
pub struct ActionSample {
    pub pre_squash: [f64; ACTION_DIM],
    pub action: [f64; ACTION_DIM],
    pub log_prob: f64,
}

impl PolicyNetwork {
    pub fn zeros() -> Self {
        Self {
            params: vec![0.0; PARAM_COUNT],
        }
    }

    /// Xavier-uniform trunk and heads, zero biases and zero log-spread
    /// (unit exploration spread).
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut net = Self::zeros();
        let mut fill = |off: usize, rows: usize, cols: usize, p: &mut Vec<f64>, rng: &mut R| {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            for k in 0..rows * cols {
                p[off + k] = rng.random_range(-a..a);
            }
        };
        fill(W1_OFF, HIDDEN_DIM, STATE_DIM, &mut net.params, rng);
        fill(W2_OFF, HIDDEN_DIM, HIDDEN_DIM, &mut net.params, rng);
        fill(WA_OFF, ACTION_DIM, HIDDEN_DIM, &mut net.params, rng);
        fill(WV_OFF, 1, HIDDEN_DIM, &mut net.params, rng);
        net
    }

    pub fn from_params(params: Vec<f64>) -> Option<Self> {
        (params.len() == PARAM_COUNT).then_some(Self { params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn log_spread(&self) -> &[f64] {
        &self.params[LS_OFF..LS_OFF + ACTION_DIM]
    }

    pub fn log_spread_mut(&mut self) -> &mut [f64] {
        &mut self.params[LS_OFF..LS_OFF + ACTION_DIM]
    }

    /// Deterministic forward pass.
    pub fn forward(&self, sv: &StateVector) -> ForwardTrace {
        let p = &self.params;
        let x = sv.0;
        let mut h1 = [0.0; HIDDEN_DIM];
        for i in 0..HIDDEN_DIM {
            let mut acc = p[B1_OFF + i];
            for k in 0..STATE_DIM {
                acc += p[W1_OFF + i * STATE_DIM + k] * x[k];
            }
            h1[i] = acc.tanh();
        }
        let mut h2 = [0.0; HIDDEN_DIM];
        for i in 0..HIDDEN_DIM {
            let mut acc = p[B2_OFF + i];
            for k in 0..HIDDEN_DIM {
                acc += p[W2_OFF + i * HIDDEN_DIM + k] * h1[k];
            }
            h2[i] = acc.tanh();
        }
        let mut action_pre = [0.0; ACTION_DIM];
        let mut action_mean = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            let mut acc = p[BA_OFF + i];
            for k in 0..HIDDEN_DIM {
                acc += p[WA_OFF + i * HIDDEN_DIM + k] * h2[k];
            }
            action_pre[i] = acc;
            action_mean[i] = acc.tanh();
        }
        let mut value = p[BV_OFF];
        for k in 0..HIDDEN_DIM {
            value += p[WV_OFF + k] * h2[k];
        }
        ForwardTrace {
            input: x,
            h1,
            h2,
            action_pre,
            action_mean,
            value,
        }
    }

    /// Accumulates the gradient of a scalar with upstream derivatives taken
    /// with respect to the pre-squash action activation and the value.
    /// The log-spread parameters do not feed through the network; callers
    /// add their gradient directly at [`PolicyNetwork::log_spread_grad_range`].
    pub fn backward_pre(
        &self,
        trace: &ForwardTrace,
        d_action_pre: &[f64; ACTION_DIM],
        d_value: f64,
        grad: &mut [f64],
    ) {
        debug_assert_eq!(grad.len(), PARAM_COUNT);
        let p = &self.params;
        let mut d_h2 = [0.0; HIDDEN_DIM];
        for i in 0..ACTION_DIM {
            grad[BA_OFF + i] += d_action_pre[i];
            for k in 0..HIDDEN_DIM {
                grad[WA_OFF + i * HIDDEN_DIM + k] += d_action_pre[i] * trace.h2[k];
                d_h2[k] += p[WA_OFF + i * HIDDEN_DIM + k] * d_action_pre[i];
            }
        }
        grad[BV_OFF] += d_value;
        for k in 0..HIDDEN_DIM {
            grad[WV_OFF + k] += d_value * trace.h2[k];
            d_h2[k] += p[WV_OFF + k] * d_value;
        }
        let mut d_h1 = [0.0; HIDDEN_DIM];
        for i in 0..HIDDEN_DIM {
            let d_pre2 = d_h2[i] * (1.0 - trace.h2[i] * trace.h2[i]);
            grad[B2_OFF + i] += d_pre2;
            for k in 0..HIDDEN_DIM {
                grad[W2_OFF + i * HIDDEN_DIM + k] += d_pre2 * trace.h1[k];
                d_h1[k] += p[W2_OFF + i * HIDDEN_DIM + k] * d_pre2;
            }
        }
        for i in 0..HIDDEN_DIM {
            let d_pre1 = d_h1[i] * (1.0 - trace.h1[i] * trace.h1[i]);
            grad[B1_OFF + i] += d_pre1;
            for k in 0..STATE_DIM {
                grad[W1_OFF + i * STATE_DIM + k] += d_pre1 * trace.input[k];
            }
        }
    }

    /// Same as [`Self::backward_pre`] but with the upstream derivative taken
    /// with respect to the squashed action mean.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        d_action_mean: &[f64; ACTION_DIM],
        d_value: f64,
        grad: &mut [f64],
    ) {
        let mut d_pre = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            d_pre[i] = d_action_mean[i] * (1.0 - trace.action_mean[i] * trace.action_mean[i]);
        }
        self.backward_pre(trace, &d_pre, d_value, grad);
    }

    pub fn log_spread_grad_range() -> core::ops::Range<usize> {
        LS_OFF..LS_OFF + ACTION_DIM
    }

    /// Samples a squashed-Gaussian action around the current action-head
    /// activation.
    pub fn sample_action<R: Rng + ?Sized>(&self, sv: &StateVector, rng: &mut R) -> ActionSample {
        let trace = self.forward(sv);
        let mut pre = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            let noise: f64 = rng.sample(StandardNormal);
            pre[i] = trace.action_pre[i] + self.log_spread()[i].exp() * noise;
        }
        let log_prob = self.log_prob_given_trace(&trace, &pre);
        ActionSample {
            pre_squash: pre,
            action: [pre[0].tanh(), pre[1].tanh(), pre[2].tanh()],
            log_prob,
        }
    }

    /// Exact log-density of the squashed action `tanh(pre_squash)` under the
    /// current parameters: Gaussian log-density of the pre-squash sample
    /// minus the tanh volume correction.
    pub fn log_prob(&self, sv: &StateVector, pre_squash: &[f64; ACTION_DIM]) -> f64 {
        let trace = self.forward(sv);
        self.log_prob_given_trace(&trace, pre_squash)
    }

    pub fn log_prob_given_trace(
        &self,
        trace: &ForwardTrace,
        pre_squash: &[f64; ACTION_DIM],
    ) -> f64 {
        let mut lp = 0.0;
        for i in 0..ACTION_DIM {
            let ls = self.log_spread()[i];
            let inv_spread = (-ls).exp();
            let standardized = (pre_squash[i] - trace.action_pre[i]) * inv_spread;
            lp += -0.5 * standardized * standardized - ls - 0.5 * LN_2PI;
            lp -= log1m_tanh2(pre_squash[i]);
        }
        lp
    }

    /// Differential entropy of the pre-squash Gaussian; its gradient lives
    /// entirely in the log-spread parameters.
    pub fn base_entropy(&self) -> f64 {
        let sum_ls: f64 = self.log_spread().iter().sum();
        sum_ls + 0.5 * ACTION_DIM as f64 * (1.0 + LN_2PI)
    }
}

/// `log(1 - tanh(u)^2)` computed without cancellation:
/// `2 (ln 2 - u - softplus(-2u))`.
pub fn log1m_tanh2(u: f64) -> f64 {
    2.0 * (core::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Affine map from a squashed action in `(-1, 1)` to a decrease factor in
/// `[alpha_min, alpha_max]`, clipped for safety at the boundaries.
pub fn action_to_alpha(action: &[f64; ACTION_DIM], alpha_min: f64, alpha_max: f64) -> [f64; 3] {
    let mut alpha = [0.0; 3];
    for i in 0..ACTION_DIM {
        let mapped = alpha_min + (action[i] + 1.0) / 2.0 * (alpha_max - alpha_min);
        alpha[i] = mapped.clamp(alpha_min, alpha_max);
    }
    alpha
}

/// Baseline that ignores the state and always emits the same factors.
#[derive(Debug, Clone, Copy)]
pub struct FixedPolicy {
    alpha: [f64; 3],
}

impl FixedPolicy {
    /// Factors must lie in `(0, 1]`.
    pub fn new(alpha: [f64; 3]) -> Option<Self> {
        alpha
            .iter()
            .all(|&a| a > 0.0 && a <= 1.0)
            .then_some(Self { alpha })
    }

    pub fn factors(&self) -> [f64; 3] {
        self.alpha
    }
}

impl RegularizationPolicy for FixedPolicy {
    fn alpha(&mut self, _res: &ResidualPair, _nu: f64, _eps_inner: f64) -> [f64; 3] {
        self.alpha
    }
}

/// Deterministic use of a trained network: the action mean, squashed and
/// mapped into the factor bounds.
#[derive(Debug, Clone)]
pub struct NetworkPolicy {
    net: PolicyNetwork,
    alpha_min: f64,
    alpha_max: f64,
}

impl NetworkPolicy {
    pub fn new(net: PolicyNetwork, alpha_min: f64, alpha_max: f64) -> Self {
        Self {
            net,
            alpha_min,
            alpha_max,
        }
    }

    pub fn network(&self) -> &PolicyNetwork {
        &self.net
    }
}

impl RegularizationPolicy for NetworkPolicy {
    fn alpha(&mut self, res: &ResidualPair, nu: f64, eps_inner: f64) -> [f64; 3] {
        let sv = encode_state(res, nu, eps_inner);
        let trace = self.net.forward(&sv);
        action_to_alpha(&trace.action_mean, self.alpha_min, self.alpha_max)
    }
}

/// All combinations of the given factor values, for baseline sweeps.
pub fn fixed_alpha_grid(values: &[f64]) -> Vec<[f64; 3]> {
    let mut grid = Vec::with_capacity(values.len().pow(3));
    for &ax in values {
        for &ay in values {
            for &az in values {
                grid.push([ax, ay, az]);
            }
        }
    }
    grid
}

/// Evaluates the deterministic policy over a grid of normalized residuals at
/// fixed endogenous parameters. Returns one factor triple per grid node in
/// row-major order over `(sigma_prim, sigma_dual)`.
pub fn alpha_map(
    net: &PolicyNetwork,
    sigma_prim_grid: &[f64],
    sigma_dual_grid: &[f64],
    nu: f64,
    eps_inner: f64,
    alpha_min: f64,
    alpha_max: f64,
) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(sigma_prim_grid.len() * sigma_dual_grid.len());
    for &sp in sigma_prim_grid {
        for &sd in sigma_dual_grid {
            let sv = StateVector::from_sigmas(sp, sd, nu, eps_inner);
            let trace = net.forward(&sv);
            out.push(action_to_alpha(&trace.action_mean, alpha_min, alpha_max));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn res_with(sp: f64, sd: f64) -> ResidualPair {
        ResidualPair {
            r_prim: sp,
            r_dual: sd,
            sigma_prim: sp,
            sigma_dual: sd,
        }
    }

    #[test]
    fn encode_matches_direct_formula() {
        let sv = encode_state(&res_with(1e-3, 1e-5), 1e-2, 1e-2);
        assert!((sv.0[0] - 3.0).abs() < 1e-6);
        assert!((sv.0[1] - 5.0).abs() < 1e-6);
        assert!((sv.0[2] - 2.0).abs() < 1e-6);
        assert!((sv.0[3] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn encode_offset_floors() {
        let sv = encode_state(&res_with(0.0, 1.0), 0.0, 1.0);
        assert_eq!(sv.0[0], 9.0);
        assert_eq!(sv.0[2], 17.0);
    }

    #[test]
    fn encode_is_monotone_in_sigma_prim() {
        let mut prev = f64::NEG_INFINITY;
        for exp in (-8..=2).rev() {
            let sp = 10f64.powi(exp);
            let sv = encode_state(&res_with(sp, 1.0), 1e-2, 1e-2);
            assert!(sv.0[0] > prev);
            prev = sv.0[0];
        }
    }

    #[test]
    fn zero_params_give_zero_outputs() {
        let net = PolicyNetwork::zeros();
        let t = net.forward(&StateVector([1.0, -2.0, 3.0, 0.5]));
        assert_eq!(t.action_mean, [0.0; 3]);
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let net = PolicyNetwork::init(&mut rng);
        let sv = StateVector([0.3, 1.2, -0.7, 2.0]);
        let a = net.forward(&sv);
        let b = net.forward(&sv);
        assert_eq!(a.action_mean, b.action_mean);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn single_chain_matches_hand_computation() {
        // Route one input through one neuron per layer; everything else zero.
        let mut net = PolicyNetwork::zeros();
        net.params_mut()[W1_OFF] = 0.7; // h1_0 = tanh(0.7 x0)
        net.params_mut()[W2_OFF] = -1.3; // h2_0 = tanh(-1.3 h1_0)
        net.params_mut()[WA_OFF] = 0.9; // pre_0 = 0.9 h2_0
        net.params_mut()[WV_OFF] = 2.0; // v = 2 h2_0
        let x0 = 0.4;
        let t = net.forward(&StateVector([x0, 9.0, -9.0, 3.0]));
        let h1 = (0.7f64 * x0).tanh();
        let h2 = (-1.3f64 * h1).tanh();
        assert!((t.action_mean[0] - (0.9 * h2).tanh()).abs() < 1e-12);
        assert!((t.value - 2.0 * h2).abs() < 1e-12);
        assert_eq!(t.action_mean[1], 0.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for trial in 0..10 {
            let net = PolicyNetwork::init(&mut rng);
            let sv = StateVector([
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]);
            // scalar = w . action_mean + c * value with random coefficients
            let w = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let c: f64 = rng.random_range(-1.0..1.0);
            let scalar = |p: &[f64]| {
                let n = PolicyNetwork::from_params(p.to_vec()).unwrap();
                let t = n.forward(&sv);
                w[0] * t.action_mean[0]
                    + w[1] * t.action_mean[1]
                    + w[2] * t.action_mean[2]
                    + c * t.value
            };
            let trace = net.forward(&sv);
            let mut grad = vec![0.0; PARAM_COUNT];
            net.backward(&trace, &w, c, &mut grad);

            let h = 1e-5;
            let mut max_rel = 0.0f64;
            for k in (0..PARAM_COUNT).step_by(7) {
                let mut plus = net.params().to_vec();
                plus[k] += h;
                let mut minus = net.params().to_vec();
                minus[k] -= h;
                let fd = (scalar(&plus) - scalar(&minus)) / (2.0 * h);
                let denom = fd.abs().max(grad[k].abs()).max(1e-6);
                max_rel = max_rel.max((fd - grad[k]).abs() / denom);
            }
            assert!(max_rel <= 1e-4, "trial {trial}: rel err {max_rel}");
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let net = PolicyNetwork::init(&mut rng);
        let sv = StateVector([1.0, 2.0, 3.0, 4.0]);
        let trace = net.forward(&sv);
        let mut grad = vec![0.0; PARAM_COUNT];
        net.backward(&trace, &[0.0; 3], 0.0, &mut grad);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn value_gradient_does_not_touch_action_head() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let net = PolicyNetwork::init(&mut rng);
        let sv = StateVector([0.1, 0.2, 0.3, 0.4]);
        let trace = net.forward(&sv);
        let mut grad = vec![0.0; PARAM_COUNT];
        net.backward(&trace, &[0.0; 3], 1.0, &mut grad);
        assert!(grad[WA_OFF..BA_OFF + ACTION_DIM].iter().all(|&g| g == 0.0));
        assert!(grad[WV_OFF..=BV_OFF].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn action_to_alpha_examples() {
        assert_eq!(action_to_alpha(&[0.0; 3], 0.05, 0.95), [0.5, 0.5, 0.5]);
        assert_eq!(action_to_alpha(&[-1.0; 3], 0.05, 0.95), [0.05, 0.05, 0.05]);
        assert_eq!(action_to_alpha(&[1.0; 3], 0.05, 0.95), [0.95, 0.95, 0.95]);
    }

    #[test]
    fn sampling_collapses_to_mean_at_tiny_spread() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut net = PolicyNetwork::init(&mut rng);
        net.log_spread_mut().iter_mut().for_each(|ls| *ls = (1e-8f64).ln());
        let sv = StateVector([2.0, 1.0, 0.5, 1.5]);
        let mean = net.forward(&sv).action_mean;
        let sample = net.sample_action(&sv, &mut rng);
        for i in 0..ACTION_DIM {
            assert!((sample.action[i] - mean[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn sampling_is_reproducible_under_fixed_seed() {
        let mut net_rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let net = PolicyNetwork::init(&mut net_rng);
        let sv = StateVector([1.0, 1.0, 2.0, 2.0]);
        let a = net.sample_action(&sv, &mut rand_chacha::ChaCha8Rng::seed_from_u64(77));
        let b = net.sample_action(&sv, &mut rand_chacha::ChaCha8Rng::seed_from_u64(77));
        assert_eq!(a.pre_squash, b.pre_squash);
        assert_eq!(a.log_prob, b.log_prob);
    }

    #[test]
    fn log_prob_is_consistent_under_reevaluation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let net = PolicyNetwork::init(&mut rng);
        let sv = StateVector([0.5, 3.0, 4.0, 2.5]);
        for _ in 0..50 {
            let sample = net.sample_action(&sv, &mut rng);
            let re = net.log_prob(&sv, &sample.pre_squash);
            assert!((re - sample.log_prob).abs() <= 1e-10 * re.abs().max(1.0));
        }
    }

    #[test]
    fn presquash_sample_mean_is_statistically_correct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut net = PolicyNetwork::init(&mut rng);
        net.log_spread_mut().iter_mut().for_each(|ls| *ls = 0.5f64.ln());
        let sv = StateVector([1.0, 2.0, 0.0, 1.0]);
        let mu = net.forward(&sv).action_pre;
        let n = 100_000usize;
        let mut sums = [0.0f64; ACTION_DIM];
        for _ in 0..n {
            let s = net.sample_action(&sv, &mut rng);
            for i in 0..ACTION_DIM {
                sums[i] += s.pre_squash[i];
            }
        }
        let se = 0.5 / (n as f64).sqrt();
        for i in 0..ACTION_DIM {
            let mean = sums[i] / n as f64;
            assert!(
                (mean - mu[i]).abs() <= 3.0 * se,
                "dim {i}: {mean} vs {} (se {se})",
                mu[i]
            );
        }
    }

    #[test]
    fn log1m_tanh2_is_stable_for_large_arguments() {
        for &u in &[0.0, 0.5, -0.5, 3.0, -3.0, 10.0, 25.0, -25.0] {
            let direct = (1.0 - u.tanh() * u.tanh()).ln();
            let stable = log1m_tanh2(u);
            if direct.is_finite() {
                assert!((direct - stable).abs() <= 1e-9 * stable.abs().max(1.0), "u={u}");
            } else {
                assert!(stable.is_finite());
            }
        }
    }

    #[test]
    fn fixed_policy_and_grid() {
        let mut p = FixedPolicy::new([0.15; 3]).unwrap();
        let out = p.alpha(&res_with(1.0, 1.0), 1.0, 1.0);
        assert_eq!(out, [0.15, 0.15, 0.15]);
        assert!(FixedPolicy::new([0.0, 0.5, 0.5]).is_none());
        let grid = fixed_alpha_grid(&[0.1, 0.15, 0.2]);
        assert_eq!(grid.len(), 27);
        assert!(grid.contains(&[0.1, 0.2, 0.15]));
    }

    #[test]
    fn alpha_map_is_finite_and_in_bounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let net = PolicyNetwork::init(&mut rng);
        let grid: Vec<f64> = (-9..=2).map(|e| 10f64.powi(e)).collect();
        let map = alpha_map(&net, &grid, &grid, 1e-2, 1e-2, 0.05, 0.95);
        assert_eq!(map.len(), grid.len() * grid.len());
        for a in &map {
            for &v in a {
                assert!(v.is_finite());
                assert!((0.05..=0.95).contains(&v));
            }
        }
    }
}
