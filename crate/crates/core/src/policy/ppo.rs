//! Gaussian actor-critic, advantage estimation and the clipped PPO update.

use infogain_autodiff::{Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::net::{Arch, FeatureSpec, Features, NamedParam, Network};
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub n_envs: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub init_log_std: f64,
    /// One network with a value column next to the action mean instead of
    /// separate actor and critic parameters.
    pub shared_network: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            n_envs: 8,
            epochs: 4,
            minibatch: 64,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            init_log_std: 0.0,
            shared_network: false,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be > 0");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if self.n_envs == 0 || self.epochs == 0 || self.minibatch == 0 {
            return bad("n_envs, epochs and minibatch must be >= 1");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be > 0");
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.init_log_std) {
            return bad("init_log_std outside the log-std clamp");
        }
        Ok(())
    }
}

/// Actor (action mean) and critic (value) with a state-independent log-std.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorCritic {
    pub features: FeatureSpec,
    pub actor: Network,
    /// `None` when the actor also carries the value column.
    pub critic: Option<Network>,
    pub log_std: [f64; 2],
}

impl ActorCritic {
    pub fn new(arch: Arch, features: FeatureSpec, ppo: &PpoConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let n = features.n_landmarks;
        let map = features.map_dims;
        let (actor, critic) = if ppo.shared_network {
            (Network::new(arch, n, map, 3, 0.01, rng)?, None)
        } else {
            let actor = Network::new(arch, n, map, 2, 0.01, rng)?;
            let critic = Network::new(arch, n, map, 1, 1.0, rng)?;
            (actor, Some(critic))
        };
        Ok(Self {
            features,
            actor,
            critic,
            log_std: [ppo.init_log_std; 2],
        })
    }

    pub fn arch(&self) -> Arch {
        self.actor.arch
    }

    pub fn featurize(&self, obs: &[&[f64]]) -> Result<Features> {
        Features::build(&self.features, obs, self.actor.sorts_landmarks())
    }

    /// Action means `[B, 2]` and values `[B]`.
    pub fn evaluate(&self, f: &Features) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
        let out = self.actor.predict(f)?;
        let b = f.batch;
        match &self.critic {
            Some(critic) => {
                let means = out.chunks(2).map(|c| [c[0], c[1]]).collect();
                Ok((means, critic.predict(f)?))
            }
            None => {
                let means = out.chunks(3).map(|c| [c[0], c[1]]).collect();
                let values = out.chunks(3).map(|c| c[2]).collect();
                debug_assert_eq!(out.len(), 3 * b);
                Ok((means, values))
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.actor.param_count() + self.critic.as_ref().map_or(0, Network::param_count) + 2
    }

    /// Every parameter block under its checkpoint name.
    pub fn named_blocks(&self) -> Vec<NamedParam> {
        let mut out: Vec<NamedParam> = self
            .actor
            .params
            .iter()
            .map(|p| NamedParam {
                name: format!("actor.{}", p.name),
                value: p.value.clone(),
            })
            .collect();
        if let Some(c) = &self.critic {
            out.extend(c.params.iter().map(|p| NamedParam {
                name: format!("critic.{}", p.name),
                value: p.value.clone(),
            }));
        }
        out.push(NamedParam {
            name: "log_std".into(),
            value: Tensor::vector(self.log_std.to_vec()),
        });
        out
    }
}

/// `u = mean + exp(log_std) * eps` with `eps ~ N(0, I)`, plus its log density.
pub fn sample_action(mean: [f64; 2], log_std: [f64; 2], rng: &mut ChaCha8Rng) -> ([f64; 2], f64) {
    let mut u = [0.0; 2];
    let mut logp = 0.0;
    for i in 0..2 {
        let eps: f64 = rng.sample(StandardNormal);
        u[i] = mean[i] + log_std[i].exp() * eps;
        logp += -0.5 * eps * eps - log_std[i] - HALF_LOG_2PI;
    }
    (u, logp)
}

/// Log density of `u` under the diagonal Gaussian policy.
pub fn gaussian_log_prob(u: [f64; 2], mean: [f64; 2], log_std: [f64; 2]) -> f64 {
    (0..2)
        .map(|i| {
            let z = (u[i] - mean[i]) / log_std[i].exp();
            -0.5 * z * z - log_std[i] - HALF_LOG_2PI
        })
        .sum()
}

/// Per-step rollout records for one batch of environment steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<[f64; 2]>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the state after the last record (ignored when that record is terminal).
    pub bootstrap_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, state: Vec<f64>, action: [f64; 2], reward: f64, value: f64, log_prob: f64, done: bool) {
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(reward);
        self.values.push(value);
        self.log_probs.push(log_prob);
        self.dones.push(done);
    }

    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let (adv, ret) = gae(
            &self.rewards,
            &self.values,
            &self.dones,
            self.bootstrap_value,
            gamma,
            lambda,
        )?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    /// Appends another buffer whose advantages are already computed.
    pub fn extend(&mut self, other: RolloutBuffer) {
        self.states.extend(other.states);
        self.actions.extend(other.actions);
        self.rewards.extend(other.rewards);
        self.values.extend(other.values);
        self.log_probs.extend(other.log_probs);
        self.dones.extend(other.dones);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
    }
}

/// Generalized advantage estimates and value targets.
///
/// `A_k = delta_k + gamma * lambda * (1 - done_k) * A_{k+1}` with
/// `delta_k = r_k + gamma * (1 - done_k) * V_{k+1} - V_k`; the value after a
/// terminal step is zero. Returns `(advantages, advantages + values)`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if n == 0 {
        return Err(Error::Contract("advantage estimation on an empty buffer".into()));
    }
    if values.len() != n || dones.len() != n {
        return Err(Error::Contract(format!(
            "buffer lengths differ: {n} rewards, {} values, {} dones",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap_value;
    for k in (0..n).rev() {
        let live = if dones[k] { 0.0 } else { 1.0 };
        let delta = rewards[k] + gamma * live * next_value - values[k];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[k] = next_adv;
        next_value = values[k];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Adam with the usual bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, sizes: &[usize]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Gradient descent step on `params` (one slice per block).
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            for (j, (pj, &gj)) in p.iter_mut().zip(g).enumerate() {
                let m = &mut self.m[i][j];
                let v = &mut self.v[i][j];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gj;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gj * gj;
                *pj -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-12);
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
    norm
}

/// Optimizer state for one [`ActorCritic`].
#[derive(Clone, Debug, PartialEq)]
pub struct PpoOptimizer {
    actor: Adam,
    critic: Option<Adam>,
}

impl PpoOptimizer {
    pub fn new(policy: &ActorCritic, lr: f64) -> Self {
        let mut actor_sizes: Vec<usize> = policy.actor.params.iter().map(|p| p.value.numel()).collect();
        actor_sizes.push(2);
        let critic = policy.critic.as_ref().map(|c| {
            let sizes: Vec<usize> = c.params.iter().map(|p| p.value.numel()).collect();
            Adam::new(lr, &sizes)
        });
        Self {
            actor: Adam::new(lr, &actor_sizes),
            critic,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm_actor: f64,
    pub grad_norm_critic: f64,
    pub minibatches: usize,
}

/// Differentiable pieces of one minibatch loss.
pub struct SurrogateTerms {
    pub tape: Tape,
    pub actor_vars: Vec<Var>,
    pub log_std_var: Var,
    pub critic_vars: Vec<Var>,
    pub policy_loss: Var,
    pub value_loss: Var,
    pub entropy: Var,
    pub ratio: Vec<f64>,
}

/// Builds the clipped surrogate, value and entropy terms for `idx` on a fresh tape.
pub fn surrogate_terms(
    policy: &ActorCritic,
    buffer: &RolloutBuffer,
    idx: &[usize],
    advantages: &[f64],
    clip_eps: f64,
) -> Result<SurrogateTerms> {
    let b = idx.len();
    let obs: Vec<&[f64]> = idx.iter().map(|&i| buffer.states[i].as_slice()).collect();
    let f = policy.featurize(&obs)?;
    let mut tape = Tape::new();
    let actor_vars = policy.actor.bind(&mut tape, true);
    let log_std_var = tape.param(Tensor::vector(policy.log_std.to_vec()));
    let out = policy.actor.forward(&mut tape, &actor_vars, &f)?;
    let (mean, value, critic_vars) = match &policy.critic {
        Some(critic) => {
            let cv = critic.bind(&mut tape, true);
            let v = critic.forward(&mut tape, &cv, &f)?;
            (out, v, cv)
        }
        None => {
            let to_mean = Tensor::matrix(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
            let to_value = Tensor::matrix(3, 1, vec![0.0, 0.0, 1.0]);
            let (pm, pv) = (tape.constant(to_mean), tape.constant(to_value));
            let mean = tape.matmul(out, pm);
            let v = tape.matmul(out, pv);
            (mean, v, Vec::new())
        }
    };
    let actions: Vec<f64> = idx.iter().flat_map(|&i| buffer.actions[i]).collect();
    let actions = tape.constant(Tensor::matrix(b, 2, actions));
    let logp = tape.gaussian_log_prob(mean, log_std_var, actions);
    let old = tape.constant(Tensor::vector(idx.iter().map(|&i| buffer.log_probs[i]).collect()));
    let diff = tape.sub(logp, old);
    let ratio = tape.exp(diff);
    let adv = tape.constant(Tensor::vector(advantages.to_vec()));
    let surr1 = tape.mul(ratio, adv);
    let clipped = tape.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    let surr2 = tape.mul(clipped, adv);
    let surr = tape.minimum(surr1, surr2);
    let mean_surr = tape.reduce_mean(surr, None);
    let policy_loss = tape.scale(mean_surr, -1.0);

    let value = tape.reshape(value, vec![b]);
    let target = tape.constant(Tensor::vector(idx.iter().map(|&i| buffer.returns[i]).collect()));
    let err = tape.sub(value, target);
    let sq = tape.mul(err, err);
    let value_loss = tape.reduce_mean(sq, None);

    let ls_sum = tape.reduce_sum(log_std_var, None);
    let entropy = tape.add_scalar(ls_sum, 2.0 * (0.5 + HALF_LOG_2PI));
    let ratio_vals = tape.value(ratio).data().to_vec();
    Ok(SurrogateTerms {
        tape,
        actor_vars,
        log_std_var,
        critic_vars,
        policy_loss,
        value_loss,
        entropy,
        ratio: ratio_vals,
    })
}

fn normalized(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

fn collect(grads: &infogain_autodiff::Gradients, vars: &[Var]) -> Vec<Vec<f64>> {
    vars.iter()
        .map(|&v| grads.get(v).expect("trainable parameter has a gradient").to_vec())
        .collect()
}

/// Runs `epochs` passes of shuffled minibatch updates over `buffer`.
///
/// On a non-finite loss the update stops and returns an error; parameters
/// changed by earlier minibatches are kept out of `policy` because the update
/// works on a copy.
pub fn ppo_update(
    policy: &mut ActorCritic,
    opt: &mut PpoOptimizer,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PpoDiagnostics> {
    let n = buffer.len();
    if n == 0 || buffer.advantages.len() != n || buffer.returns.len() != n {
        return Err(Error::Contract(
            "ppo_update needs a buffer with computed advantages".into(),
        ));
    }
    let adv_all = if cfg.normalize_advantages && n > 1 {
        normalized(&buffer.advantages)
    } else {
        buffer.advantages.clone()
    };
    let mut work = policy.clone();
    let mut work_opt = opt.clone();
    let mut diag = PpoDiagnostics::default();
    let mut order: Vec<usize> = (0..n).collect();
    let mut clipped = 0usize;
    let mut seen = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for idx in order.chunks(cfg.minibatch) {
            let adv: Vec<f64> = idx.iter().map(|&i| adv_all[i]).collect();
            let mut t = surrogate_terms(&work, buffer, idx, &adv, cfg.clip_eps)?;
            let pl = t.tape.value(t.policy_loss).item();
            let vl = t.tape.value(t.value_loss).item();
            let ent = t.tape.value(t.entropy).item();
            if !(pl.is_finite() && vl.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "policy loss {pl}, value loss {vl} at minibatch {}",
                    diag.minibatches
                )));
            }
            let ent_term = t.tape.scale(t.entropy, -cfg.entropy_coef);
            let actor_loss = t.tape.add(t.policy_loss, ent_term);
            let total = if work.critic.is_some() {
                // The critic parameters are disjoint from the actor's, so one
                // backward pass over the sum yields both gradients.
                t.tape.add(actor_loss, t.value_loss)
            } else {
                let v = t.tape.scale(t.value_loss, cfg.value_coef);
                t.tape.add(actor_loss, v)
            };
            let grads = t.tape.backward(total).map_err(|e| Error::Contract(e.to_string()))?;

            let mut ga = collect(&grads, &t.actor_vars);
            ga.push(grads.get(t.log_std_var).expect("log_std gradient").to_vec());
            diag.grad_norm_actor = clip_grad_norm(&mut ga, cfg.max_grad_norm);
            {
                let mut slices: Vec<&mut [f64]> = work.actor.params.iter_mut().map(|p| p.value.data_mut()).collect();
                slices.push(&mut work.log_std);
                work_opt.actor.step(&mut slices, &ga);
            }
            if let (Some(critic), Some(copt)) = (work.critic.as_mut(), work_opt.critic.as_mut()) {
                let mut gc = collect(&grads, &t.critic_vars);
                diag.grad_norm_critic = clip_grad_norm(&mut gc, cfg.max_grad_norm);
                let mut slices: Vec<&mut [f64]> = critic.params.iter_mut().map(|p| p.value.data_mut()).collect();
                copt.step(&mut slices, &gc);
            }
            for l in &mut work.log_std {
                *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
            }

            clipped += t.ratio.iter().filter(|r| (*r - 1.0).abs() > cfg.clip_eps).count();
            seen += t.ratio.len();
            let kl: f64 = t.ratio.iter().map(|r| (r - 1.0) - r.ln()).sum::<f64>();
            diag.approx_kl += kl;
            diag.policy_loss += pl;
            diag.value_loss += vl;
            diag.entropy += ent;
            diag.minibatches += 1;
        }
    }
    let mb = diag.minibatches as f64;
    diag.policy_loss /= mb;
    diag.value_loss /= mb;
    diag.entropy /= mb;
    diag.approx_kl /= seen as f64;
    diag.clip_fraction = clipped as f64 / seen as f64;
    *policy = work;
    *opt = work_opt;
    Ok(diag)
}

/// Deterministic per-stream generator derived from a base seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
