//! Open-loop baseline: projected gradient ascent on the smoothed information
//! objective over a whole control sequence.
//!
//! The planner only knows the prior means, so soft weights are evaluated at
//! `mu0` for every step and the plan is then replayed blindly in the
//! environment.

use std::f64::consts::SQRT_2;

use infogain_autodiff::{Tape, Tensor, Var};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::WorldConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, summarize, EpisodeStats, OpenLoop, Summary};
use crate::policy::ppo::stream_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcrConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// Stop once an accepted step improves the objective by less than this fraction.
    pub rel_tol: f64,
    /// Halvings tried before giving up on an iteration.
    pub max_halvings: usize,
}

impl Default for IcrConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            iterations: 500,
            restarts: 10,
            rel_tol: 1e-6,
            max_halvings: 30,
        }
    }
}

impl IcrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || self.restarts == 0 || !(self.rel_tol >= 0.0) {
            return Err(Error::Config(
                "icr needs step_size > 0, restarts >= 1, rel_tol >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSettings {
    pub horizon: usize,
    pub control_bound: f64,
    pub optimizer: IcrConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopPlan {
    pub controls: Vec<[f64; 2]>,
    /// Objective after the initial guess and after every accepted step.
    pub objective_history: Vec<f64>,
    pub config: PlanSettings,
}

/// Planning problem: start, prior means and prior information.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanningInstance {
    pub x0: [f64; 2],
    pub mu0: Vec<f64>,
    pub lambda0: Vec<f64>,
}

impl PlanningInstance {
    fn check(&self) -> Result<()> {
        if !self.mu0.len().is_multiple_of(2) || self.mu0.len() != self.lambda0.len() || self.mu0.is_empty() {
            return Err(Error::Dimension(format!(
                "prior means {} and information {} do not describe landmarks",
                self.mu0.len(),
                self.lambda0.len()
            )));
        }
        if self.lambda0.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Domain("prior information must be > 0".into()));
        }
        Ok(())
    }
}

/// Records the objective on `tape` for the `[T, 2]` control variable `u`.
pub fn icr_objective_on_tape(tape: &mut Tape, u: Var, inst: &PlanningInstance, world: &WorldConfig) -> Var {
    let t = tape.value(u).shape()[0];
    let n = inst.mu0.len() / 2;
    let m = world.sensor().info_rate();
    let lower: Vec<f64> = (0..t)
        .flat_map(|k| (0..t).map(move |i| if i <= k { 1.0 } else { 0.0 }))
        .collect();
    let lower = tape.constant(Tensor::matrix(t, t, lower));
    let start = tape.constant(Tensor::matrix(t, 2, (0..t).flat_map(|_| inst.x0).collect()));
    let offsets = tape.matmul(lower, u);
    let x = tape.add(start, offsets);
    let repeat: Vec<usize> = (0..t).flat_map(|k| std::iter::repeat_n(k, n)).collect();
    let x_rep = tape.gather_rows(x, &repeat);
    let mu = tape.constant(Tensor::matrix(
        t * n,
        2,
        (0..t).flat_map(|_| inst.mu0.iter().copied()).collect(),
    ));
    let diff = tape.sub(mu, x_rep);
    let sq = tape.mul(diff, diff);
    let sq = tape.reduce_sum(sq, Some(1));
    // Keeps the square root differentiable when a waypoint lands on a mean.
    let sq = tape.add_scalar(sq, 1e-12);
    let dist = tape.sqrt(sq);
    let d = tape.add_scalar(dist, -world.fov.radius);
    let arg = tape.scale(d, 1.0 / (SQRT_2 * world.fov.kappa));
    let arg = tape.add_scalar(arg, -2.0);
    let e = tape.erf(arg);
    let w = tape.scale(e, -0.5);
    let w = tape.add_scalar(w, 0.5);
    let w = tape.reshape(w, vec![t, n]);
    let per_landmark = tape.reduce_sum(w, Some(0));
    let col = tape.reshape(per_landmark, vec![n, 1]);
    let ones = tape.constant(Tensor::full(vec![1, 2], 1.0));
    let per_coord = tape.matmul(col, ones);
    let per_coord = tape.reshape(per_coord, vec![2 * n]);
    let gained = tape.scale(per_coord, m);
    let l0 = tape.constant(Tensor::vector(inst.lambda0.clone()));
    let final_info = tape.add(gained, l0);
    let logs = tape.log(final_info);
    let total = tape.reduce_sum(logs, None);
    let base: f64 = inst.lambda0.iter().map(|l| l.ln()).sum();
    tape.add_scalar(total, -base)
}

/// `log det lambda_T - log det lambda_0` for the given open-loop controls.
pub fn icr_objective(controls: &[[f64; 2]], inst: &PlanningInstance, world: &WorldConfig) -> Result<f64> {
    Ok(objective_and_grad(controls, inst, world, false)?.0)
}

/// Objective value and its gradient with respect to every control component.
pub fn objective_and_grad(
    controls: &[[f64; 2]],
    inst: &PlanningInstance,
    world: &WorldConfig,
    want_grad: bool,
) -> Result<(f64, Vec<[f64; 2]>)> {
    inst.check()?;
    if controls.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let mut tape = Tape::new();
    let data: Vec<f64> = controls.iter().flatten().copied().collect();
    let u = tape.param(Tensor::matrix(controls.len(), 2, data));
    let obj = icr_objective_on_tape(&mut tape, u, inst, world);
    let value = tape.value(obj).item();
    if !want_grad {
        return Ok((value, Vec::new()));
    }
    let grads = tape.backward(obj).map_err(|e| Error::Contract(e.to_string()))?;
    let g = grads.get(u).expect("controls are trainable");
    Ok((value, g.chunks(2).map(|c| [c[0], c[1]]).collect()))
}

fn project(u: &mut [[f64; 2]], bound: f64) {
    for c in u.iter_mut().flatten() {
        *c = c.clamp(-bound, bound);
    }
}

/// Projected gradient ascent from one initial sequence.
pub fn ascend(
    init: Vec<[f64; 2]>,
    inst: &PlanningInstance,
    world: &WorldConfig,
    cfg: &IcrConfig,
) -> Result<OpenLoopPlan> {
    let bound = world.control_bound;
    let mut u = init;
    project(&mut u, bound);
    let (mut value, mut grad) = objective_and_grad(&u, inst, world, true)?;
    let mut history = vec![value];
    'outer: for _ in 0..cfg.iterations {
        let mut eta = cfg.step_size;
        for _ in 0..=cfg.max_halvings {
            let mut cand: Vec<[f64; 2]> = u
                .iter()
                .zip(&grad)
                .map(|(a, g)| [a[0] + eta * g[0], a[1] + eta * g[1]])
                .collect();
            project(&mut cand, bound);
            let (v, g) = objective_and_grad(&cand, inst, world, true)?;
            if v > value {
                let rel = (v - value) / value.abs().max(f64::MIN_POSITIVE);
                u = cand;
                value = v;
                grad = g;
                history.push(value);
                if rel < cfg.rel_tol {
                    break 'outer;
                }
                continue 'outer;
            }
            eta *= 0.5;
        }
        break;
    }
    Ok(OpenLoopPlan {
        controls: u,
        objective_history: history,
        config: PlanSettings {
            horizon: world.episode_len,
            control_bound: bound,
            optimizer: cfg.clone(),
        },
    })
}

/// Multi-start optimization over `restarts` uniform random initial sequences;
/// the best final objective wins (earliest start on ties).
pub fn optimize(
    inst: &PlanningInstance,
    world: &WorldConfig,
    cfg: &IcrConfig,
    rng: &mut ChaCha8Rng,
    workers: usize,
) -> Result<OpenLoopPlan> {
    cfg.validate()?;
    inst.check()?;
    let t = world.episode_len;
    let b = world.control_bound;
    let inits: Vec<Vec<[f64; 2]>> = (0..cfg.restarts)
        .map(|_| {
            let mut r = stream_rng(rng.next_u64(), 5);
            (0..t)
                .map(|_| [r.random_range(-b..=b), r.random_range(-b..=b)])
                .collect()
        })
        .collect();
    let run = |init: &Vec<[f64; 2]>| ascend(init.clone(), inst, world, cfg);
    let plans: Vec<Result<OpenLoopPlan>> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| inits.par_iter().map(run).collect())
    } else {
        inits.iter().map(run).collect()
    };
    let mut best: Option<OpenLoopPlan> = None;
    for p in plans {
        let p = p?;
        let better = best
            .as_ref()
            .is_none_or(|b| p.objective_history.last() > b.objective_history.last());
        if better {
            best = Some(p);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Replays `plan` in fresh episodes, one per seed, with true hard-FoV filtering.
pub fn evaluate_plan(plan: &OpenLoopPlan, world: &WorldConfig, seeds: &[u64]) -> Result<(Summary, Vec<EpisodeStats>)> {
    if plan.controls.len() != world.episode_len {
        return Err(Error::Contract(format!(
            "plan horizon {} differs from episode length {}",
            plan.controls.len(),
            world.episode_len
        )));
    }
    let stats = evaluate(
        world,
        seeds,
        &mut OpenLoop {
            controls: &plan.controls,
        },
    )?;
    Ok((summarize(&stats), stats))
}

/// The planning instance an episode with this seed starts from.
pub fn instance_for_seed(world: &WorldConfig, seed: u64) -> Result<PlanningInstance> {
    let (ep, _) = crate::env::Episode::reset(world, seed)?;
    Ok(PlanningInstance {
        x0: ep.state.x,
        mu0: ep.state.belief.mu.clone(),
        lambda0: ep.state.belief.info_soft.clone(),
    })
}
