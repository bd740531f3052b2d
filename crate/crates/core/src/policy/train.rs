//! The PPO training loop: parallel episode collection, updates, evaluation.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::{Arch, FeatureSpec};
use super::ppo::{sample_action, stream_rng, ActorCritic, PpoConfig, PpoDiagnostics, PpoOptimizer, RolloutBuffer};
use crate::env::{Episode, WorldConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, summarize, MeanAction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Evaluation episode `i` uses environment seed `eval_seed_base + i`.
    pub eval_seed_base: u64,
    /// Checkpoint every this many environment steps; 0 disables intermediate checkpoints.
    pub checkpoint_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 200_000,
            eval_interval: 10_000,
            eval_episodes: 10,
            eval_seed_base: 1_000_000,
            checkpoint_interval: 0,
        }
    }
}

/// One learning-curve row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub env_steps: u64,
    pub mean_eval_reward: f64,
    pub std_eval_reward: f64,
    pub mean_mae: f64,
}

pub struct TrainOutcome {
    pub policy: ActorCritic,
    pub curve: Vec<CurveRow>,
    pub last_diagnostics: Option<PpoDiagnostics>,
    pub env_steps: u64,
}

/// Collects one complete episode with the stochastic policy.
pub fn collect_episode(
    policy: &ActorCritic,
    world: &WorldConfig,
    env_seed: u64,
    action_seed: u64,
) -> Result<RolloutBuffer> {
    let (mut ep, mut obs) = Episode::reset(world, env_seed)?;
    let mut rng = stream_rng(action_seed, 3);
    let mut buf = RolloutBuffer::default();
    while !ep.done() {
        let f = policy.featurize(&[obs.s.as_slice()])?;
        let (means, values) = policy.evaluate(&f)?;
        let (u, logp) = sample_action(means[0], policy.log_std, &mut rng);
        let out = ep.step(u)?;
        buf.push(obs.s, u, out.reward, values[0], logp, out.done);
        obs = out.observation;
    }
    buf.bootstrap_value = 0.0;
    Ok(buf)
}

fn eval_curve_row(policy: &ActorCritic, world: &WorldConfig, tc: &TrainConfig, env_steps: u64) -> Result<CurveRow> {
    let seeds: Vec<u64> = (0..tc.eval_episodes as u64).map(|i| tc.eval_seed_base + i).collect();
    let stats = evaluate(world, &seeds, &mut MeanAction(policy))?;
    let s = summarize(&stats);
    Ok(CurveRow {
        env_steps,
        mean_eval_reward: s.reward_mean,
        std_eval_reward: s.reward_std,
        mean_mae: s.mae,
    })
}

/// Trains a fresh actor-critic.
///
/// Every random quantity derives from `seed`: parameter init, the episode
/// seeds handed to each environment, per-episode action noise and minibatch
/// shuffling. Episodes are assigned seeds in a fixed order before they are
/// fanned out, so the result does not depend on `workers`.
pub fn train(
    world: &WorldConfig,
    ppo: &PpoConfig,
    arch: Arch,
    tc: &TrainConfig,
    seed: u64,
    workers: usize,
    mut on_checkpoint: impl FnMut(u64, &ActorCritic) -> Result<()>,
) -> Result<TrainOutcome> {
    world.validate()?;
    ppo.validate()?;
    if tc.eval_interval == 0 || tc.eval_episodes == 0 {
        return Err(Error::Config("eval_interval and eval_episodes must be >= 1".into()));
    }
    let mut init_rng = stream_rng(seed, 0);
    let mut policy = ActorCritic::new(arch, FeatureSpec::from_world(world), ppo, &mut init_rng)?;
    let mut opt = PpoOptimizer::new(&policy, ppo.learning_rate);
    let mut shuffle_rng = stream_rng(seed, 1);
    let mut episode_rng = stream_rng(seed, 2);
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let per_iter = (ppo.n_envs * world.episode_len) as u64;
    let mut env_steps = 0u64;
    let mut curve = Vec::new();
    let mut last = None;
    while env_steps < tc.total_steps {
        let seeds: Vec<(u64, u64)> = (0..ppo.n_envs)
            .map(|_| (episode_rng.next_u64(), episode_rng.next_u64()))
            .collect();
        let run = |&(e, a): &(u64, u64)| collect_episode(&policy, world, e, a);
        let episodes: Vec<Result<RolloutBuffer>> = match &pool {
            Some(pool) => pool.install(|| seeds.par_iter().map(run).collect()),
            None => seeds.iter().map(run).collect(),
        };
        let mut batch = RolloutBuffer::default();
        for ep in episodes {
            let mut ep = ep?;
            ep.compute_advantages(world.gamma, ppo.gae_lambda)?;
            batch.extend(ep);
        }
        last = Some(super::ppo::ppo_update(
            &mut policy,
            &mut opt,
            &batch,
            ppo,
            &mut shuffle_rng,
        )?);

        let prev = env_steps;
        env_steps += per_iter;
        if env_steps / tc.eval_interval > prev / tc.eval_interval || env_steps >= tc.total_steps {
            curve.push(eval_curve_row(&policy, world, tc, env_steps)?);
        }
        if tc.checkpoint_interval > 0 && env_steps / tc.checkpoint_interval > prev / tc.checkpoint_interval {
            on_checkpoint(env_steps, &policy)?;
        }
    }
    Ok(TrainOutcome {
        policy,
        curve,
        last_diagnostics: last,
        env_steps,
    })
}

/// Uniform random controls for baseline runs.
pub fn random_controller(seed: u64) -> crate::eval::UniformRandom {
    crate::eval::UniformRandom {
        rng: stream_rng(seed, 4),
    }
}
