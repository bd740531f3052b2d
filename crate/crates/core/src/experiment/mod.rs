//! Config-driven experiment commands behind the CLI.
//!
//! Every command writes its artifacts under `output_dir` with names derived
//! from `<scenario>_<method>_<seed>` and returns the same data to the caller.

pub mod config;
pub mod selftest;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Method};

use crate::env::{TrajectoryRecord, WorldConfig};
use crate::error::{Error, Result};
use crate::eval::{mean_std, run_episode, Controller, EpisodeStats, MeanAction, OpenLoop};
use crate::icr::{evaluate_plan, instance_for_seed, optimize, OpenLoopPlan};
use crate::policy::checkpoint;
use crate::policy::ppo::stream_rng;
use crate::policy::train::random_controller;
use crate::policy::{train, ActorCritic, CurveRow, FeatureSpec};

/// Process-level settings that are not part of the experiment file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub workers: usize,
    pub paper_scale: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            paper_scale: false,
        }
    }
}

/// One results-table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub method: String,
    pub noise: bool,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub mae: f64,
}

impl ResultRow {
    pub fn to_text(&self) -> String {
        let noise = if self.noise { "w/ noise" } else { "w/o noise" };
        format!(
            "{:<12} {:<8} {:<10} reward {:.2} ± {:.2}  MAE {:.3}",
            self.scenario, self.method, noise, self.reward_mean, self.reward_std, self.mae
        )
    }
}

/// Per-episode evaluation record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub seed: u64,
    pub map: usize,
    pub episode_seed: u64,
    pub reward: f64,
    pub land_reward: f64,
    pub map_reward: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub row: ResultRow,
    pub episodes: Vec<EpisodeRow>,
    pub stats: Vec<EpisodeStats>,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub curve_path: PathBuf,
    pub curve: Vec<CurveRow>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn meta(cfg: &ExperimentConfig, seed: u64, env_steps: u64) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("scenario".into(), cfg.scenario.name().into());
    m.insert("method".into(), cfg.method.name().into());
    m.insert("seed".into(), seed.into());
    m.insert("env_steps".into(), env_steps.into());
    m.insert("motion_noise".into(), cfg.motion_noise.into());
    m
}

pub fn write_curve(path: &Path, curve: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if curve.is_empty() {
        w.write_record(["env_steps", "mean_eval_reward", "std_eval_reward", "mean_mae"])?;
    }
    for row in curve {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Trains one policy per seed; writes `<stem>.ckpt` and `<stem>.curve.csv`.
pub fn cmd_train(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<TrainReport>> {
    let arch = cfg
        .arch()?
        .ok_or_else(|| Error::Config(format!("train needs a learned method, got '{}'", cfg.method.name())))?;
    let world = cfg.world_config()?;
    let mut tc = cfg.train.clone();
    if opts.paper_scale {
        tc.total_steps = config::PAPER_SCALE_STEPS;
    }
    ensure_dir(&cfg.output_dir)?;
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        let stem = cfg.artifact_stem(seed);
        let out = train(&world, &cfg.ppo, arch, &tc, seed, opts.workers, |steps, policy| {
            let path = cfg.output_dir.join(format!("{stem}.step{steps}.ckpt"));
            checkpoint::save(&path, policy, meta(cfg, seed, steps))
        })?;
        let ckpt = cfg.output_dir.join(format!("{stem}.ckpt"));
        checkpoint::save(&ckpt, &out.policy, meta(cfg, seed, out.env_steps))?;
        let curve_path = cfg.output_dir.join(format!("{stem}.curve.csv"));
        write_curve(&curve_path, &out.curve)?;
        reports.push(TrainReport {
            seed,
            checkpoint: ckpt,
            curve_path,
            curve: out.curve,
        });
    }
    Ok(reports)
}

/// Loads the checkpoint for `seed` and checks it fits the configured world.
pub fn load_policy(cfg: &ExperimentConfig, world: &WorldConfig, seed: u64) -> Result<ActorCritic> {
    let path = cfg.output_dir.join(format!("{}.ckpt", cfg.artifact_stem(seed)));
    load_policy_from(&path, cfg, world)
}

pub fn load_policy_from(path: &Path, cfg: &ExperimentConfig, world: &WorldConfig) -> Result<ActorCritic> {
    if !path.is_file() {
        return Err(Error::Checkpoint(format!(
            "{} not found; run `train` first",
            path.display()
        )));
    }
    let (policy, _) = checkpoint::load(path)?;
    let expected_arch = cfg.arch()?;
    if Some(policy.arch()) != expected_arch {
        return Err(Error::Checkpoint(format!(
            "{} holds a {} network, {} on {} needs {:?}",
            path.display(),
            policy.arch().tag(),
            cfg.method.name(),
            cfg.scenario.name(),
            expected_arch.map(|a| a.tag())
        )));
    }
    if policy.features != FeatureSpec::from_world(world) {
        return Err(Error::Checkpoint(format!(
            "{} was trained for a different world (features {:?})",
            path.display(),
            policy.features
        )));
    }
    Ok(policy)
}

fn finish_report(cfg: &ExperimentConfig, episodes: Vec<EpisodeRow>, stats: Vec<EpisodeStats>) -> Result<EvalReport> {
    let rewards: Vec<f64> = stats.iter().map(|s| s.reward).collect();
    let (reward_mean, reward_std) = mean_std(&rewards);
    let maes: Vec<f64> = stats.iter().map(|s| s.mae).collect();
    let row = ResultRow {
        scenario: cfg.scenario.name().into(),
        method: cfg.method.name().into(),
        noise: cfg.motion_noise,
        reward_mean,
        reward_std,
        mae: mean_std(&maes).0,
    };
    ensure_dir(&cfg.output_dir)?;
    let stem = cfg.group_stem();
    let mut w = csv::Writer::from_path(cfg.output_dir.join(format!("{stem}.eval.csv")))?;
    w.serialize(&row)?;
    w.flush()?;
    let mut w = csv::Writer::from_path(cfg.output_dir.join(format!("{stem}.episodes.csv")))?;
    for e in &episodes {
        w.serialize(e)?;
    }
    w.flush()?;
    fs::write(cfg.output_dir.join(format!("{stem}.eval.txt")), row.to_text() + "\n")?;
    Ok(EvalReport { row, episodes, stats })
}

fn episode_row(seed: u64, map: usize, s: &EpisodeStats) -> EpisodeRow {
    EpisodeRow {
        seed,
        map,
        episode_seed: s.seed,
        reward: s.reward,
        land_reward: s.land_reward,
        map_reward: s.map_reward,
        mae: s.mae,
    }
}

/// Deterministic evaluation over `seeds x eval_maps` episodes.
///
/// Learned methods load `<stem>.ckpt` per seed and act with the action
/// mean; `random` draws uniform controls from a per-seed stream; `icr`
/// delegates to [`cmd_baseline_icr`].
pub fn cmd_eval(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<EvalReport> {
    if cfg.method == Method::Icr {
        return cmd_baseline_icr(cfg, opts);
    }
    let world = cfg.world_config()?;
    let maps = cfg.eval_seeds();
    let mut episodes = Vec::new();
    let mut stats = Vec::new();
    for &seed in &cfg.seeds {
        let policy;
        let mut random;
        let mut mean;
        let controller: &mut dyn Controller = if cfg.method.is_learned() {
            policy = load_policy(cfg, &world, seed)?;
            mean = MeanAction(&policy);
            &mut mean
        } else {
            random = random_controller(seed);
            &mut random
        };
        for (m, &ep_seed) in maps.iter().enumerate() {
            let (s, _) = run_episode(&world, ep_seed, controller, false)?;
            episodes.push(episode_row(seed, m, &s));
            stats.push(s);
        }
    }
    finish_report(cfg, episodes, stats)
}

/// Plans one open-loop sequence per (seed, evaluation map) and replays it
/// on that map. The seed drives the multi-start draws.
pub fn cmd_baseline_icr(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<EvalReport> {
    if cfg.method != Method::Icr {
        return Err(Error::Config(format!(
            "icr command needs method 'icr', got '{}'",
            cfg.method.name()
        )));
    }
    let world = cfg.world_config()?;
    ensure_dir(&cfg.output_dir)?;
    let mut episodes = Vec::new();
    let mut stats = Vec::new();
    for &seed in &cfg.seeds {
        for (m, ep_seed) in cfg.eval_seeds().into_iter().enumerate() {
            let plan = plan_for(cfg, &world, seed, m, ep_seed, opts)?;
            let path = cfg
                .output_dir
                .join(format!("{}_map{m}.plan.json", cfg.artifact_stem(seed)));
            fs::write(&path, serde_json::to_string_pretty(&plan)?)?;
            let (_, mut s) = evaluate_plan(&plan, &world, &[ep_seed])?;
            let s = s.remove(0);
            episodes.push(episode_row(seed, m, &s));
            stats.push(s);
        }
    }
    finish_report(cfg, episodes, stats)
}

fn plan_for(
    cfg: &ExperimentConfig,
    world: &WorldConfig,
    seed: u64,
    map: usize,
    ep_seed: u64,
    opts: &RunOptions,
) -> Result<OpenLoopPlan> {
    let inst = instance_for_seed(world, ep_seed)?;
    let mut rng = stream_rng(seed, 1000 + map as u64);
    optimize(&inst, world, &cfg.icr, &mut rng, opts.workers)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub episode_seed: u64,
    pub landmarks: Vec<[f64; 2]>,
    pub records: Vec<TrajectoryRecord>,
}

/// Rolls out one episode and writes `<stem>.trajectory.json`.
pub fn cmd_export_trajectory(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    seed: u64,
    episode_seed: u64,
    checkpoint_path: Option<&Path>,
) -> Result<(PathBuf, TrajectoryFile)> {
    let world = cfg.world_config()?;
    let (_, records) = match cfg.method {
        Method::PpoAtt | Method::PpoMlp => {
            let policy = match checkpoint_path {
                Some(p) => load_policy_from(p, cfg, &world)?,
                None => load_policy(cfg, &world, seed)?,
            };
            run_episode(&world, episode_seed, &mut MeanAction(&policy), true)?
        }
        Method::Random => run_episode(&world, episode_seed, &mut random_controller(seed), true)?,
        Method::Icr => {
            let plan = plan_for(cfg, &world, seed, 0, episode_seed, opts)?;
            run_episode(
                &world,
                episode_seed,
                &mut OpenLoop {
                    controls: &plan.controls,
                },
                true,
            )?
        }
    };
    let (ep, _) = crate::env::Episode::reset(&world, episode_seed)?;
    let file = TrajectoryFile {
        scenario: cfg.scenario.name().into(),
        method: cfg.method.name().into(),
        seed,
        episode_seed,
        landmarks: ep.landmarks(),
        records: records.expect("recording was requested"),
    };
    ensure_dir(&cfg.output_dir)?;
    let path = cfg
        .output_dir
        .join(format!("{}.trajectory.json", cfg.artifact_stem(seed)));
    fs::write(&path, serde_json::to_string_pretty(&file)?)?;
    Ok((path, file))
}
