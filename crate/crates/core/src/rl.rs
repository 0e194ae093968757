//! Markov-decision-process view of the solver, reward shaping, generalized
//! advantage estimation and a from-scratch PPO learner.
//!
//! One environment step corresponds to one outer iteration of the solver:
//! the agent observes the encoded state after an iteration, emits decrease
//! factors for the regularization weights, and the environment runs the next
//! inner solve. Episodes end at solver termination (solved, budget
//! exhausted, or failure).

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::ipm::{OuterLoop, SolveReport, SolverConfig};
use crate::policy::{
    action_to_alpha, encode_state, PolicyNetwork, StateVector, ACTION_DIM, PARAM_COUNT,
};
use crate::qp::{PrimalDualPoint, QpError, QuadraticProgram};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RlError {
    #[error("array length mismatch in advantage estimation")]
    LengthMismatch,
    #[error("non-finite loss, update aborted")]
    NonFiniteLoss,
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Reward weights. `perf_budget == 0` disables the iteration-count term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub imbalance_gain: f64,
    pub progress_gain: f64,
    pub perf_budget: f64,
}

impl RewardConfig {
    pub fn new(imbalance_gain: f64, progress_gain: f64, perf_budget: f64) -> Self {
        Self {
            imbalance_gain,
            progress_gain,
            perf_budget,
        }
    }

    /// Curriculum stage 1: balance and progress shaping only.
    pub fn stage1() -> Self {
        Self::new(1.0, 1.0, 0.0)
    }

    /// Curriculum stage 2: all three terms.
    pub fn stage2() -> Self {
        Self::new(1.0, 1.0, 23.0)
    }

    /// Curriculum stages 3 and later: iteration-count term only.
    pub fn stage_final() -> Self {
        Self::new(0.0, 0.0, 23.0)
    }
}

/// Reward for one outer iteration, from the normalized residuals before and
/// after it and the inner-iteration count it spent.
///
/// Three terms: a penalty on primal/dual imbalance after the step, a bonus
/// for log-scale residual reduction, and `1 - exp(N / perf_budget)` charging
/// inner iterations. Log base 10 throughout, matching the state encoding.
pub fn reward(
    prev: (f64, f64),
    next: (f64, f64),
    inner_count: usize,
    cfg: &RewardConfig,
) -> f64 {
    let lg = |v: f64| (v + 1e-9).log10();
    let imbalance = -(((lg(next.0) - lg(next.1)).abs()) * cfg.imbalance_gain).tanh();
    let progress = ((lg(prev.0) - lg(next.0)) * cfg.progress_gain).tanh()
        + ((lg(prev.1) - lg(next.1)) * cfg.progress_gain).tanh();
    let perf = if cfg.perf_budget > 0.0 {
        1.0 - (inner_count as f64 / cfg.perf_budget).exp()
    } else {
        0.0
    };
    imbalance + progress + perf
}

/// One environment step.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: StateVector,
    pub pre_squash: [f64; ACTION_DIM],
    pub log_prob: f64,
    pub reward: f64,
    pub next_state: StateVector,
    pub done: bool,
    pub inner_count: usize,
}

/// Environment wrapping one solve. Construction runs outer iteration 0 with
/// the configured initial weights; the policy acts from iteration 1 on, so a
/// problem solved at the guess or during iteration 0 yields an empty episode.
pub struct QpEnv<'a> {
    outer: OuterLoop<'a>,
    reward_cfg: RewardConfig,
}

impl<'a> QpEnv<'a> {
    pub fn new(
        qp: &'a QuadraticProgram,
        guess: &PrimalDualPoint,
        solver_cfg: SolverConfig,
        reward_cfg: RewardConfig,
    ) -> Result<Self, QpError> {
        let mut outer = OuterLoop::start(qp, guess, solver_cfg)?;
        if outer.status().is_none() {
            outer.first_iteration();
        }
        Ok(Self { outer, reward_cfg })
    }

    pub fn is_done(&self) -> bool {
        self.outer.status().is_some()
    }

    pub fn observe(&self) -> StateVector {
        encode_state(
            self.outer.residual_pair(),
            self.outer.nu(),
            self.outer.eps_inner(),
        )
    }

    fn sigmas(&self) -> (f64, f64) {
        let r = self.outer.residual_pair();
        (r.sigma_prim, r.sigma_dual)
    }

    /// Applies a sampled pre-squash action and runs one outer iteration.
    pub fn step(&mut self, pre_squash: [f64; ACTION_DIM], log_prob: f64) -> Transition {
        debug_assert!(!self.is_done());
        let state = self.observe();
        let prev = self.sigmas();
        let action = [
            pre_squash[0].tanh(),
            pre_squash[1].tanh(),
            pre_squash[2].tanh(),
        ];
        let cfg = *self.outer.config();
        let alpha = action_to_alpha(&action, cfg.alpha_min, cfg.alpha_max);
        self.outer.advance(alpha);
        let inner_count = self.outer.last_inner_count();
        Transition {
            state,
            pre_squash,
            log_prob,
            reward: reward(prev, self.sigmas(), inner_count, &self.reward_cfg),
            next_state: self.observe(),
            done: self.is_done(),
            inner_count,
        }
    }

    pub fn into_report(self) -> SolveReport {
        self.outer.into_report()
    }
}

/// Runs one full episode with actions sampled from the network.
pub fn episode_rollout<R: Rng + ?Sized>(
    qp: &QuadraticProgram,
    guess: &PrimalDualPoint,
    solver_cfg: SolverConfig,
    reward_cfg: RewardConfig,
    net: &PolicyNetwork,
    rng: &mut R,
) -> Result<(Vec<Transition>, SolveReport), QpError> {
    let mut env = QpEnv::new(qp, guess, solver_cfg, reward_cfg)?;
    let mut transitions = Vec::new();
    while !env.is_done() {
        let sv = env.observe();
        let sample = net.sample_action(&sv, rng);
        transitions.push(env.step(sample.pre_squash, sample.log_prob));
    }
    Ok((transitions, env.into_report()))
}

/// Generalized advantage estimation over a flat array of (possibly several)
/// complete episodes; `dones` marks episode boundaries and terminal states
/// have value zero. Also returns the advantage-plus-value return targets.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), RlError> {
    if rewards.len() != values.len() || rewards.len() != dones.len() {
        return Err(RlError::LengthMismatch);
    }
    let len = rewards.len();
    let mut advantages = vec![0.0; len];
    let mut acc = 0.0;
    for t in (0..len).rev() {
        let boundary = dones[t] || t + 1 == len;
        let next_value = if boundary { 0.0 } else { values[t + 1] };
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = delta + if boundary { 0.0 } else { gamma * lambda * acc };
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

/// PPO hyperparameters (training defaults).
#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// Surrogate ratio clip.
    pub clip: f64,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
    /// Initial adaptive KL penalty coefficient.
    pub kl_coeff: f64,
    pub kl_target: f64,
    /// Environment steps gathered per update.
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub vf_coeff: f64,
    pub normalize_advantages: bool,
    /// Piecewise-linear schedules over global environment steps.
    pub lr_schedule: Vec<(u64, f64)>,
    pub entropy_schedule: Vec<(u64, f64)>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 1.0,
            clip: 0.2,
            grad_clip: 25.0,
            kl_coeff: 0.05,
            kl_target: 0.01,
            batch_size: 4096,
            minibatch_size: 256,
            epochs: 10,
            vf_coeff: 1.0,
            normalize_advantages: true,
            lr_schedule: vec![
                (0, 5e-4),
                (500_000, 3e-4),
                (1_000_000, 1e-4),
                (2_000_000, 5e-5),
                (3_000_000, 1e-5),
                (4_000_000, 5e-6),
                (5_000_000, 1e-6),
                (7_000_000, 5e-7),
                (9_000_000, 1e-7),
                (20_000_000, 1e-8),
            ],
            entropy_schedule: vec![(0, 5e-4), (1_000_000, 3e-4), (2_000_000, 1e-4)],
        }
    }
}

/// Piecewise-linear interpolation between breakpoints, held flat outside.
pub fn schedule_value(points: &[(u64, f64)], step: u64) -> f64 {
    assert!(!points.is_empty(), "empty schedule");
    if step <= points[0].0 {
        return points[0].1;
    }
    for w in points.windows(2) {
        let (s0, v0) = w[0];
        let (s1, v1) = w[1];
        if step <= s1 {
            let frac = (step - s0) as f64 / (s1 - s0) as f64;
            return v0 + frac * (v1 - v0);
        }
    }
    points[points.len() - 1].1
}

/// Adam over the flattened parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl: f64,
    pub learning_rate: f64,
    pub entropy_coeff: f64,
}

/// Clipped-surrogate value for a batch at given advantages; used by the
/// update and directly assertable in tests (a ratio of one makes it equal
/// the mean advantage).
pub fn mean_clipped_surrogate(
    net: &PolicyNetwork,
    batch: &[Transition],
    advantages: &[f64],
    clip: f64,
) -> f64 {
    let mut acc = 0.0;
    for (tr, &adv) in batch.iter().zip(advantages) {
        let logp_new = net.log_prob(&tr.state, &tr.pre_squash);
        let ratio = (logp_new - tr.log_prob).exp();
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        acc += (ratio * adv).min(clipped * adv);
    }
    acc / batch.len() as f64
}

/// PPO learner: owns the network, the optimizer state and the adaptive KL
/// coefficient.
pub struct PpoLearner {
    pub net: PolicyNetwork,
    adam: Adam,
    kl_coeff: f64,
    pub cfg: PpoConfig,
}

impl PpoLearner {
    pub fn new(net: PolicyNetwork, cfg: PpoConfig) -> Self {
        Self {
            net,
            adam: Adam::new(PARAM_COUNT),
            kl_coeff: cfg.kl_coeff,
            cfg,
        }
    }

    pub fn kl_coeff(&self) -> f64 {
        self.kl_coeff
    }

    /// One PPO update over a batch of complete episodes.
    ///
    /// Advantages (GAE) and the one-step bootstrapped value targets are
    /// computed once from the network as of batch start and frozen; the
    /// clipped surrogate, the value loss, a sampled KL penalty against the
    /// stored behavior log-probabilities and an entropy bonus are then
    /// optimized for several epochs of shuffled minibatches with global
    /// gradient-norm clipping and Adam. Schedules are read at `global_step`.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        batch: &[Transition],
        global_step: u64,
        rng: &mut R,
    ) -> Result<PpoDiagnostics, RlError> {
        if batch.is_empty() {
            return Err(RlError::LengthMismatch);
        }
        let cfg = self.cfg.clone();
        let lr = schedule_value(&cfg.lr_schedule, global_step);
        let ent_coeff = schedule_value(&cfg.entropy_schedule, global_step);

        let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = batch.iter().map(|t| t.done).collect();
        let values: Vec<f64> = batch
            .iter()
            .map(|t| self.net.forward(&t.state).value)
            .collect();
        let (mut advantages, _returns) =
            compute_gae(&rewards, &values, &dones, cfg.gamma, cfg.lambda)?;
        if cfg.normalize_advantages {
            let n = advantages.len() as f64;
            let mean = advantages.iter().sum::<f64>() / n;
            let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
            let std = var.sqrt().max(1e-8);
            for a in advantages.iter_mut() {
                *a = (*a - mean) / std;
            }
        }
        // frozen one-step TD targets from the pre-update network
        let targets: Vec<f64> = batch
            .iter()
            .map(|t| {
                let next_v = if t.done {
                    0.0
                } else {
                    self.net.forward(&t.next_state).value
                };
                t.reward + cfg.gamma * next_v
            })
            .collect();

        let mut indices: Vec<usize> = (0..batch.len()).collect();
        let mut grad = vec![0.0; PARAM_COUNT];
        let mut sum_policy_loss = 0.0;
        let mut sum_value_loss = 0.0;
        let mut minibatches = 0usize;
        for _epoch in 0..cfg.epochs {
            indices.shuffle(rng);
            for chunk in indices.chunks(cfg.minibatch_size.max(1)) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let inv_b = 1.0 / chunk.len() as f64;
                let mut policy_loss = 0.0;
                let mut value_loss = 0.0;
                for &idx in chunk {
                    let tr = &batch[idx];
                    let adv = advantages[idx];
                    let trace = self.net.forward(&tr.state);
                    let logp_new = self.net.log_prob_given_trace(&trace, &tr.pre_squash);
                    let ratio = (logp_new - tr.log_prob).exp();
                    let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
                    let surr1 = ratio * adv;
                    let surr2 = clipped * adv;
                    policy_loss -= surr1.min(surr2) * inv_b;
                    let unclipped_active = surr1 <= surr2;

                    let vdiff = trace.value - targets[idx];
                    value_loss += 0.5 * vdiff * vdiff * inv_b;

                    // d(loss)/d(logp_new): surrogate branch plus sampled KL penalty
                    let d_logp = -(if unclipped_active { ratio * adv } else { 0.0 }
                        + self.kl_coeff)
                        * inv_b;
                    let mut d_pre = [0.0; ACTION_DIM];
                    for i in 0..ACTION_DIM {
                        let spread = self.net.log_spread()[i].exp();
                        let centered = tr.pre_squash[i] - trace.action_pre[i];
                        d_pre[i] = d_logp * centered / (spread * spread);
                        let d_ls = d_logp * (centered * centered / (spread * spread) - 1.0);
                        grad[PolicyNetwork::log_spread_grad_range().start + i] += d_ls;
                    }
                    let d_value = cfg.vf_coeff * vdiff * inv_b;
                    self.net.backward_pre(&trace, &d_pre, d_value, &mut grad);
                }
                // entropy bonus: constant across samples, gradient on log-spread
                for i in PolicyNetwork::log_spread_grad_range() {
                    grad[i] -= ent_coeff;
                }
                if !policy_loss.is_finite() || !value_loss.is_finite() {
                    return Err(RlError::NonFiniteLoss);
                }
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if !norm.is_finite() {
                    return Err(RlError::NonFiniteLoss);
                }
                if norm > cfg.grad_clip {
                    let scale = cfg.grad_clip / norm;
                    grad.iter_mut().for_each(|g| *g *= scale);
                }
                self.adam.step(self.net.params_mut(), &grad, lr);
                sum_policy_loss += policy_loss;
                sum_value_loss += value_loss;
                minibatches += 1;
            }
        }

        // measured KL over the full batch after the update, for the adaptive
        // penalty coefficient
        let mut kl = 0.0;
        for tr in batch {
            kl += tr.log_prob - self.net.log_prob(&tr.state, &tr.pre_squash);
        }
        kl /= batch.len() as f64;
        if kl > 2.0 * cfg.kl_target {
            self.kl_coeff *= 2.0;
        } else if kl < cfg.kl_target / 2.0 {
            self.kl_coeff *= 0.5;
        }

        let diags = PpoDiagnostics {
            policy_loss: sum_policy_loss / minibatches as f64,
            value_loss: sum_value_loss / minibatches as f64,
            entropy: self.net.base_entropy(),
            kl,
            learning_rate: lr,
            entropy_coeff: ent_coeff,
        };
        if !diags.kl.is_finite() || !diags.entropy.is_finite() {
            return Err(RlError::NonFiniteLoss);
        }
        Ok(diags)
    }
}
