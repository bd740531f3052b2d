//! Running controllers through episodes and summarizing the outcome.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Episode, MdpObservation, TrajectoryRecord, WorldConfig};
use crate::error::Result;
use crate::policy::ActorCritic;

/// Anything that maps the current episode to a control.
pub trait Controller {
    fn act(&mut self, episode: &Episode, obs: &MdpObservation) -> Result<[f64; 2]>;
}

/// Deterministic policy: the Gaussian mean.
pub struct MeanAction<'a>(pub &'a ActorCritic);

impl Controller for MeanAction<'_> {
    fn act(&mut self, _episode: &Episode, obs: &MdpObservation) -> Result<[f64; 2]> {
        let f = self.0.featurize(&[obs.s.as_slice()])?;
        let (means, _) = self.0.evaluate(&f)?;
        Ok(means[0])
    }
}

/// Controls drawn uniformly from the control box.
pub struct UniformRandom {
    pub rng: ChaCha8Rng,
}

impl Controller for UniformRandom {
    fn act(&mut self, episode: &Episode, _obs: &MdpObservation) -> Result<[f64; 2]> {
        let b = episode.config.control_bound;
        Ok([self.rng.random_range(-b..=b), self.rng.random_range(-b..=b)])
    }
}

/// A fixed control sequence, replayed step by step.
pub struct OpenLoop<'a> {
    pub controls: &'a [[f64; 2]],
}

impl Controller for OpenLoop<'_> {
    fn act(&mut self, episode: &Episode, _obs: &MdpObservation) -> Result<[f64; 2]> {
        self.controls
            .get(episode.state.k)
            .copied()
            .ok_or_else(|| crate::Error::Contract(format!("plan has no control for step {}", episode.state.k)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub seed: u64,
    pub reward: f64,
    pub land_reward: f64,
    pub map_reward: f64,
    pub mae: f64,
    pub initial_info_soft: Vec<f64>,
    pub final_info_soft: Vec<f64>,
}

/// Runs one full episode; optionally records every state.
pub fn run_episode(
    world: &WorldConfig,
    seed: u64,
    controller: &mut dyn Controller,
    record: bool,
) -> Result<(EpisodeStats, Option<Vec<TrajectoryRecord>>)> {
    let (mut ep, mut obs) = Episode::reset(world, seed)?;
    let initial_info_soft = ep.state.belief.info_soft.clone();
    let mut records = record.then(|| vec![ep.record(None, None, Vec::new())]);
    let (mut reward, mut land, mut map) = (0.0, 0.0, 0.0);
    while !ep.done() {
        let u = controller.act(&ep, &obs)?;
        let out = ep.step(u)?;
        reward += out.reward;
        land += out.r_land;
        map += out.r_map;
        if let Some(r) = records.as_mut() {
            r.push(ep.record(Some(u), Some(out.reward), out.visible.clone()));
        }
        obs = out.observation;
    }
    let stats = EpisodeStats {
        seed,
        reward,
        land_reward: land,
        map_reward: map,
        mae: ep.mae(),
        initial_info_soft,
        final_info_soft: ep.state.belief.info_soft.clone(),
    };
    Ok((stats, records))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub reward_mean: f64,
    /// Population standard deviation over episodes.
    pub reward_std: f64,
    pub mae: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(stats: &[EpisodeStats]) -> Summary {
    let rewards: Vec<f64> = stats.iter().map(|s| s.reward).collect();
    let (reward_mean, reward_std) = mean_std(&rewards);
    let maes: Vec<f64> = stats.iter().map(|s| s.mae).collect();
    Summary {
        episodes: stats.len(),
        reward_mean,
        reward_std,
        mae: mean_std(&maes).0,
    }
}

/// Runs a controller over each seed in turn.
pub fn evaluate(world: &WorldConfig, seeds: &[u64], controller: &mut dyn Controller) -> Result<Vec<EpisodeStats>> {
    seeds
        .iter()
        .map(|&s| run_episode(world, s, controller, false).map(|(st, _)| st))
        .collect()
}
