//! Proximal policy optimization: Gaussian MLP policy, value network,
//! generalized advantage estimation and the clipped-surrogate update.

pub mod nn;
pub mod train;

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error, Result};
use nn::{global_norm, Adam, Mlp, MlpCache, Real};

pub use train::{MetricsRow, TrainConfig, Trainer};

pub const LOG_STD_MIN: f64 = -4.0;
pub const LOG_STD_MAX: f64 = 1.0;
const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoHyper {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    /// Linear decay of the learning rate to zero over `total_steps`.
    pub anneal_lr: bool,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub grad_clip_norm: f64,
    pub rollout_len: usize,
    pub num_envs: usize,
    pub total_steps: u64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    pub clip_value_loss: bool,
    /// Learn from max(total, 0) so early termination never pays off;
    /// logged returns stay unclipped.
    pub only_positive_rewards: bool,
    pub adam_eps: f64,
    /// Checkpoint period in updates; 0 keeps only the first and last.
    pub checkpoint_every: u64,
    /// Threads stepping environments during rollouts.
    pub workers: usize,
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatches: 4,
            learning_rate: 3e-4,
            anneal_lr: true,
            entropy_coef: 0.01,
            value_coef: 0.5,
            grad_clip_norm: 0.5,
            rollout_len: 64,
            num_envs: 48,
            total_steps: 10_000_000,
            hidden: vec![256, 256],
            init_log_std: -1.0,
            clip_value_loss: false,
            only_positive_rewards: true,
            adam_eps: 1e-8,
            checkpoint_every: 50,
            workers: 1,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.epochs == 0 || self.minibatches == 0 || self.rollout_len == 0 || self.num_envs == 0 {
            return bad("epochs, minibatches, rollout_len and num_envs must be positive");
        }
        if self.minibatches > self.rollout_len * self.num_envs {
            return bad("more minibatches than samples per rollout");
        }
        if !(self.learning_rate >= 0.0 && self.adam_eps > 0.0 && self.grad_clip_norm > 0.0) {
            return bad("learning_rate, adam_eps and grad_clip_norm out of range");
        }
        if !(self.entropy_coef >= 0.0 && self.value_coef >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.init_log_std) {
            return bad("init_log_std outside [-4, 1]");
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.rollout_len * self.num_envs
    }

    /// Learning rate after `global_step` environment steps.
    pub fn lr_at(&self, global_step: u64) -> f64 {
        if !self.anneal_lr || self.total_steps == 0 {
            return self.learning_rate;
        }
        let frac = 1.0 - global_step as f64 / self.total_steps as f64;
        self.learning_rate * frac.clamp(0.0, 1.0)
    }
}

/// Diagonal Gaussian log-density.
pub fn gaussian_log_prob<T: Real>(mean: &[T], log_std: &[T], action: &[T]) -> T {
    let mut s = 0.0;
    for i in 0..mean.len() {
        let ls = log_std[i].f64();
        let z = (action[i].f64() - mean[i].f64()) / ls.exp();
        s += -0.5 * z * z - ls - HALF_LOG_2PI;
    }
    T::of(s)
}

/// Entropy Σ(½ log 2πe + log σ_i) of a diagonal Gaussian.
pub fn gaussian_entropy<T: Real>(log_std: &[T]) -> T {
    T::of(log_std.iter().map(|l| 0.5 + HALF_LOG_2PI + l.f64()).sum::<f64>())
}

/// Gaussian policy network, state-independent log-std and value network.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic<T> {
    pub policy: Mlp<T>,
    pub log_std: Array1<T>,
    pub value: Mlp<T>,
}

impl<T: Real> ActorCritic<T> {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut R,
    ) -> Self {
        let mut ps = vec![obs_dim];
        ps.extend_from_slice(hidden);
        let mut vs = ps.clone();
        ps.push(act_dim);
        vs.push(1);
        Self {
            policy: Mlp::new(&ps, 0.01, rng),
            log_std: Array1::from_elem(act_dim, T::of(init_log_std)),
            value: Mlp::new(&vs, 1.0, rng),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.output_dim()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            policy: self.policy.zeros_like(),
            log_std: Array1::zeros(self.log_std.raw_dim()),
            value: self.value.zeros_like(),
        }
    }

    /// log σ after clamping to [−4, 1].
    pub fn effective_log_std(&self) -> Array1<T> {
        self.log_std.mapv(|l| T::of(l.f64().clamp(LOG_STD_MIN, LOG_STD_MAX)))
    }

    /// Mean actions (rows) and the shared standard deviation.
    pub fn policy_forward(&self, obs: ArrayView2<T>) -> (Array2<T>, Array1<T>) {
        (self.policy.forward(obs), self.effective_log_std().mapv(Float::exp))
    }

    pub fn values(&self, obs: ArrayView2<T>) -> Array1<T> {
        self.value.forward(obs).column(0).to_owned()
    }

    /// Samples one action per row; returns actions and their log-probabilities.
    pub fn sample_actions<R: Rng + ?Sized>(
        &self,
        obs: ArrayView2<T>,
        rng: &mut R,
    ) -> (Array2<T>, Array1<T>) {
        let mean = self.policy.forward(obs);
        let ls = self.effective_log_std();
        let mut actions = mean.clone();
        for mut row in actions.rows_mut() {
            for (a, l) in row.iter_mut().zip(ls.iter()) {
                let z: f64 = StandardNormal.sample(rng);
                *a = T::of(a.f64() + l.f64().exp() * z);
            }
        }
        let lp = self.log_prob_rows(&mean, &ls, &actions.view());
        (actions, lp)
    }

    fn log_prob_rows(&self, mean: &Array2<T>, ls: &Array1<T>, actions: &ArrayView2<T>) -> Array1<T> {
        let ls = ls.as_slice().expect("contiguous");
        Array1::from_iter(mean.rows().into_iter().zip(actions.rows()).map(|(m, a)| {
            gaussian_log_prob(
                m.as_slice().expect("contiguous"),
                ls,
                &a.iter().copied().collect::<Vec<_>>(),
            )
        }))
    }

    pub fn log_prob_of(&self, obs: ArrayView2<T>, actions: ArrayView2<T>) -> Array1<T> {
        let mean = self.policy.forward(obs);
        self.log_prob_rows(&mean, &self.effective_log_std(), &actions)
    }

    pub fn entropy(&self) -> T {
        gaussian_entropy(self.effective_log_std().as_slice().expect("contiguous"))
    }

    pub fn slices(&self) -> Vec<&[T]> {
        let mut v = self.policy.slices();
        v.push(self.log_std.as_slice().expect("contiguous"));
        v.extend(self.value.slices());
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.policy.slices_mut();
        v.push(self.log_std.as_slice_mut().expect("contiguous"));
        v.extend(self.value.slices_mut());
        v
    }

    /// Tensor names and shapes in `slices()` order.
    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut v: Vec<_> = self
            .policy
            .tensor_layout()
            .into_iter()
            .map(|(n, s)| (format!("policy.{n}"), s))
            .collect();
        v.push(("policy.log_std".to_string(), vec![self.log_std.len()]));
        v.extend(self.value.tensor_layout().into_iter().map(|(n, s)| (format!("value.{n}"), s)));
        v
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> ActorCritic<U> {
        ActorCritic {
            policy: self.policy.cast(),
            log_std: self.log_std.mapv(|x| U::of(x.f64())),
            value: self.value.cast(),
        }
    }
}


/// Generalized advantage estimation over one trajectory segment.
/// `dones[t]` cuts the recursion after step t; truncated episodes are
/// expected to carry their bootstrap value inside `rewards[t]`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::LengthMismatch(format!(
            "rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len();
    if n == 0 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a = (*a - mean) / (std + 1e-8);
    }
}

/// Samples of one rollout, stored env-major: row `env * len + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch<T> {
    pub num_envs: usize,
    pub len: usize,
    pub obs: Array2<T>,
    pub actions: Array2<T>,
    pub log_probs: Array1<T>,
    pub values: Array1<T>,
    /// Reward totals, including γ·V(final state) on truncated steps.
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the observation following the last step, per env.
    pub bootstrap: Vec<f64>,
}

impl<T: Real> RolloutBatch<T> {
    pub fn advantages(&self, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut adv = Vec::with_capacity(self.rewards.len());
        let mut ret = Vec::with_capacity(self.rewards.len());
        for e in 0..self.num_envs {
            let r = e * self.len..(e + 1) * self.len;
            let values: Vec<f64> = self.values.slice(ndarray::s![r.clone()]).iter().map(|v| v.f64()).collect();
            let (a, rt) = compute_gae(
                &self.rewards[r.clone()],
                &values,
                &self.dones[r],
                self.bootstrap[e],
                gamma,
                lambda,
            )?;
            adv.extend(a);
            ret.extend(rt);
        }
        Ok((adv, ret))
    }
}

/// One minibatch of training targets.
#[derive(Debug, Clone, Copy)]
pub struct Minibatch<'a, T> {
    pub obs: ArrayView2<'a, T>,
    pub actions: ArrayView2<'a, T>,
    pub old_log_probs: ArrayView1<'a, T>,
    pub old_values: ArrayView1<'a, T>,
    pub advantages: ArrayView1<'a, T>,
    pub returns: ArrayView1<'a, T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

struct Forward<T> {
    mean: Array2<T>,
    policy_cache: MlpCache<T>,
    values: Array2<T>,
    value_cache: MlpCache<T>,
}

fn forward<T: Real>(p: &ActorCritic<T>, mb: &Minibatch<'_, T>) -> Forward<T> {
    let (mean, policy_cache) = p.policy.forward_cached(mb.obs);
    let (values, value_cache) = p.value.forward_cached(mb.obs);
    Forward {
        mean,
        policy_cache,
        values,
        value_cache,
    }
}

/// Total loss `policy + c_v·value − c_e·entropy` and optionally its gradient.
pub fn ppo_loss<T: Real>(
    p: &ActorCritic<T>,
    mb: &Minibatch<'_, T>,
    hyper: &PpoHyper,
    want_grad: bool,
) -> (LossStats, Option<ActorCritic<T>>) {
    let b = mb.obs.nrows();
    let nb = b as f64;
    let eps = hyper.clip;
    let fw = forward(p, mb);
    let raw_ls: Vec<f64> = p.log_std.iter().map(|l| l.f64()).collect();
    let ls: Vec<f64> = raw_ls.iter().map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
    let inv_var: Vec<f64> = ls.iter().map(|l| (-2.0 * l).exp()).collect();
    let act_dim = ls.len();

    let mut stats = LossStats::default();
    let mut d_mean = Array2::<T>::zeros((b, act_dim));
    let mut d_ls = vec![0.0; act_dim];
    let mut d_values = Array2::<T>::zeros((b, 1));

    for i in 0..b {
        let mut logp = 0.0;
        for k in 0..act_dim {
            let d = mb.actions[[i, k]].f64() - fw.mean[[i, k]].f64();
            logp += -0.5 * d * d * inv_var[k] - ls[k] - HALF_LOG_2PI;
        }
        let log_ratio = logp - mb.old_log_probs[i].f64();
        let ratio = log_ratio.exp();
        let a = mb.advantages[i].f64();
        let unclipped = ratio * a;
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * a;
        stats.policy_loss -= unclipped.min(clipped) / nb;
        if (ratio - 1.0).abs() > eps {
            stats.clip_fraction += 1.0 / nb;
        }
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / nb;

        // ∂(−surrogate)/∂logp is nonzero only where the unclipped branch is active.
        let g_logp = if unclipped <= clipped { -a * ratio / nb } else { 0.0 };
        if g_logp != 0.0 {
            for k in 0..act_dim {
                let d = mb.actions[[i, k]].f64() - fw.mean[[i, k]].f64();
                d_mean[[i, k]] = T::of(g_logp * d * inv_var[k]);
                d_ls[k] += g_logp * (d * d * inv_var[k] - 1.0);
            }
        }

        let v = fw.values[[i, 0]].f64();
        let ret = mb.returns[i].f64();
        let err = v - ret;
        if hyper.clip_value_loss {
            let old = mb.old_values[i].f64();
            let vc = old + (v - old).clamp(-eps, eps);
            let errc = vc - ret;
            if err * err >= errc * errc {
                stats.value_loss += err * err / nb;
                d_values[[i, 0]] = T::of(hyper.value_coef * 2.0 * err / nb);
            } else {
                stats.value_loss += errc * errc / nb;
                let inside = (v - old).abs() < eps;
                let g = if inside { 2.0 * errc / nb } else { 0.0 };
                d_values[[i, 0]] = T::of(hyper.value_coef * g);
            }
        } else {
            stats.value_loss += err * err / nb;
            d_values[[i, 0]] = T::of(hyper.value_coef * 2.0 * err / nb);
        }
    }
    stats.entropy = ls.iter().map(|l| 0.5 + HALF_LOG_2PI + l).sum();
    stats.total =
        stats.policy_loss + hyper.value_coef * stats.value_loss - hyper.entropy_coef * stats.entropy;

    if !want_grad {
        return (stats, None);
    }
    let mut g = p.zeros_like();
    p.policy.backward(&fw.policy_cache, d_mean, &mut g.policy);
    p.value.backward(&fw.value_cache, d_values, &mut g.value);
    for k in 0..act_dim {
        let inside = (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw_ls[k]);
        g.log_std[k] = if inside {
            T::of(d_ls[k] - hyper.entropy_coef)
        } else {
            T::zero()
        };
    }
    (stats, Some(g))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// The update hit a non-finite loss or gradient and was rolled back.
    pub aborted: bool,
}

fn gather<T: Real>(a: &Array2<T>, idx: &[usize]) -> Array2<T> {
    a.select(Axis(0), idx)
}

fn gather1<T: Real>(a: &[f64], idx: &[usize]) -> Array1<T> {
    idx.iter().map(|&i| T::of(a[i])).collect()
}

/// Runs the PPO epochs over a rollout at learning rate `lr`.
pub fn ppo_update<T: Real, R: Rng + ?Sized>(
    params: &mut ActorCritic<T>,
    adam: &mut Adam<T>,
    batch: &RolloutBatch<T>,
    hyper: &PpoHyper,
    lr: f64,
    rng: &mut R,
) -> Result<UpdateStats> {
    let (mut adv, returns) = batch.advantages(hyper.gamma, hyper.lambda)?;
    normalize_advantages(&mut adv);
    let n = adv.len();
    let mb_size = n / hyper.minibatches;
    let backup = (params.clone(), adam.clone());

    let mut stats = UpdateStats::default();
    let mut count = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..hyper.epochs {
        order.shuffle(rng);
        for m in 0..hyper.minibatches {
            let idx = &order[m * mb_size..(m + 1) * mb_size];
            let obs = gather(&batch.obs, idx);
            let actions = gather(&batch.actions, idx);
            let old_lp: Array1<T> = idx.iter().map(|&i| batch.log_probs[i]).collect();
            let old_v: Array1<T> = idx.iter().map(|&i| batch.values[i]).collect();
            let a = gather1::<T>(&adv, idx);
            let r = gather1::<T>(&returns, idx);
            let mb = Minibatch {
                obs: obs.view(),
                actions: actions.view(),
                old_log_probs: old_lp.view(),
                old_values: old_v.view(),
                advantages: a.view(),
                returns: r.view(),
            };
            let (ls, grad) = ppo_loss(params, &mb, hyper, true);
            let mut grad = grad.expect("gradient requested");
            let norm = global_norm(&grad.slices());
            if !ls.total.is_finite() || !norm.is_finite() {
                *params = backup.0;
                *adam = backup.1;
                return Ok(UpdateStats {
                    aborted: true,
                    ..UpdateStats::default()
                });
            }
            if norm > hyper.grad_clip_norm {
                let s = T::of(hyper.grad_clip_norm / norm);
                for g in grad.slices_mut() {
                    g.iter_mut().for_each(|x| *x = *x * s);
                }
            }
            adam.update(params.slices_mut(), grad.slices(), lr);
            stats.policy_loss += ls.policy_loss;
            stats.value_loss += ls.value_loss;
            stats.entropy += ls.entropy;
            stats.clip_fraction += ls.clip_fraction;
            stats.approx_kl += ls.approx_kl;
            count += 1.0;
        }
    }
    if !params.is_finite() {
        *params = backup.0;
        *adam = backup.1;
        return Ok(UpdateStats {
            aborted: true,
            ..UpdateStats::default()
        });
    }
    stats.policy_loss /= count;
    stats.value_loss /= count;
    stats.entropy /= count;
    stats.clip_fraction /= count;
    stats.approx_kl /= count;
    Ok(stats)
}

/// `½ log 2π`, exposed for closed-form checks.
pub fn half_log_two_pi() -> f64 {
    0.5 * (2.0 * PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_prob_at_mean() {
        let mean = [0.3f64; 12];
        let lp = gaussian_log_prob(&mean, &[0.0; 12], &mean);
        assert!((lp + 11.027_262_398_456_07).abs() < 1e-9);
        assert!((half_log_two_pi() - HALF_LOG_2PI).abs() < 1e-15);
        let mut prev = lp;
        for s in [-0.5, -1.0, -2.0, -3.0] {
            let lp = gaussian_log_prob(&mean, &[s; 12], &mean);
            assert!(lp > prev);
            prev = lp;
        }
    }

    #[test]
    fn stored_log_prob_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: ActorCritic<f64> = ActorCritic::new(6, 3, &[16, 16], -0.5, &mut rng);
        let obs = Array2::from_shape_fn((5, 6), |(i, j)| ((i * 6 + j) as f64).sin());
        let (a, lp) = net.sample_actions(obs.view(), &mut rng);
        let again = net.log_prob_of(obs.view(), a.view());
        for (x, y) in lp.iter().zip(again.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_examples() {
        let (a, r) = compute_gae(&[1.0, 1.0], &[0.5, 0.5], &[false, false], 0.5, 0.99, 0.95).unwrap();
        assert!((a[0] - 1.930_797_5).abs() < 1e-9 && (a[1] - 0.995).abs() < 1e-12);
        assert!((r[0] - 2.430_797_5).abs() < 1e-9 && (r[1] - 1.495).abs() < 1e-12);

        let rw = [0.3, -1.0, 2.0];
        let v = [0.1, 0.4, -0.2];
        let (a, _) = compute_gae(&rw, &v, &[false; 3], 3.0, 0.0, 0.7).unwrap();
        for t in 0..3 {
            assert!((a[t] - (rw[t] - v[t])).abs() < 1e-12);
        }

        let (a1, _) = compute_gae(&rw, &v, &[false, true, false], 3.0, 0.9, 0.8).unwrap();
        let (a2, _) = compute_gae(&rw[..2], &v[..2], &[false, true], -7.0, 0.9, 0.8).unwrap();
        assert_eq!(a1[..2], a2[..]);

        assert!(matches!(
            compute_gae(&[1.0], &[0.0, 0.0], &[false], 0.0, 0.9, 0.9),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn clip_arithmetic() {
        // One sample, ratio 1.5, positive advantage: objective uses 1.2·A.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net: ActorCritic<f64> = ActorCritic::new(2, 1, &[4], 0.0, &mut rng);
        let obs = ndarray::array![[0.1, -0.2]];
        let act = ndarray::array![[0.4]];
        let lp = net.log_prob_of(obs.view(), act.view())[0];
        let old = ndarray::array![lp - 1.5f64.ln()];
        let adv = ndarray::array![2.0];
        let zero = ndarray::array![0.0];
        let mb = Minibatch {
            obs: obs.view(),
            actions: act.view(),
            old_log_probs: old.view(),
            old_values: zero.view(),
            advantages: adv.view(),
            returns: zero.view(),
        };
        let (s, _) = ppo_loss(&net, &mb, &PpoHyper::default(), false);
        assert!((s.policy_loss + 1.2 * 2.0).abs() < 1e-12);
        assert_eq!(s.clip_fraction, 1.0);
    }

    #[test]
    fn entropy_closed_form() {
        let ls = [-1.0f64, 0.3, -2.5];
        let e: f64 = ls.iter().map(|l| 0.5 * (2.0 * PI * std::f64::consts::E).ln() + l).sum();
        assert!((gaussian_entropy(&ls) - e).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn normalized_advantages(v in proptest::collection::vec(-100.0f64..100.0, 2..200)) {
            let mut a = v.clone();
            prop_assume!(v.iter().any(|x| (x - v[0]).abs() > 1e-3));
            normalize_advantages(&mut a);
            let n = a.len() as f64;
            let mean = a.iter().sum::<f64>() / n;
            let std = (a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-6);
            prop_assert!((std - 1.0).abs() < 1e-6);
        }
    }
}
