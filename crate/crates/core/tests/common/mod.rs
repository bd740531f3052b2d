//! Oracles and checks shared by the focused test files and the acceptance runner.
#![allow(dead_code)]

pub mod gradcheck;
pub mod tables;

use infogain::belief::{logdet_gain, LandmarkBelief, SensorModel};
use infogain::env::{Episode, Scenario, WorldConfig};
use infogain::fov::{probit, soft_visibility_weight, BodyFramePoint, FieldOfView};
use infogain::icr::{icr_objective, instance_for_seed, objective_and_grad, optimize, IcrConfig};
use infogain::policy::ppo::stream_rng;
use infogain::policy::{gae, ActorCritic, Arch, FeatureSpec, PpoConfig};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-6)
}

/// Scalar Kalman filter in covariance form, one coordinate at a time.
fn scalar_kf(mut x: f64, mut p: f64, zs: &[Option<f64>], r: f64) -> (f64, f64) {
    for z in zs.iter().flatten() {
        let k = p / (p + r);
        x += k * (z - x);
        p -= k * p;
    }
    (x, p)
}

/// Joint covariance-form KF over all `2n` coordinates with `H` selecting the visible rows.
fn joint_kf(x0: &[f64], p0: &[f64], steps: &[(Vec<usize>, Vec<[f64; 2]>)], r: f64) -> (DVector<f64>, DMatrix<f64>) {
    let d = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut p = DMatrix::from_diagonal(&DVector::from_column_slice(p0));
    for (vis, z) in steps {
        if vis.is_empty() {
            continue;
        }
        let m = 2 * vis.len();
        let mut h = DMatrix::zeros(m, d);
        let mut zv = DVector::zeros(m);
        for (i, (&j, zj)) in vis.iter().zip(z).enumerate() {
            h[(2 * i, 2 * j)] = 1.0;
            h[(2 * i + 1, 2 * j + 1)] = 1.0;
            zv[2 * i] = zj[0];
            zv[2 * i + 1] = zj[1];
        }
        let s = &h * &p * h.transpose() + DMatrix::identity(m, m) * r;
        let k = &p * h.transpose() * s.try_inverse().expect("innovation covariance is SPD");
        x = &x + &k * (zv - &h * &x);
        p = (DMatrix::identity(d, d) - &k * &h) * &p;
    }
    (x, p)
}

/// Worst relative error between the information filter and a covariance KF
/// over `instances` random problems (half scalar, half joint 2-D).
pub fn kf_oracle_max_rel_err(instances: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for inst in 0..instances {
        let sigma: f64 = rng.random_range(0.1..2.0);
        let model = SensorModel::new(sigma).unwrap();
        let m = model.info_rate();
        let n = if inst % 2 == 0 { 1 } else { rng.random_range(1..=4) };
        let y: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mu0: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let info0: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.1..10.0)).collect();
        let mut belief = LandmarkBelief::new(mu0.clone(), info0.clone()).unwrap();
        let mut steps = Vec::new();
        for _ in 0..rng.random_range(1..=10) {
            let vis: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
            let z: Vec<[f64; 2]> = vis
                .iter()
                .map(|&j| {
                    let e: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
                    [y[2 * j] + sigma * e[0], y[2 * j + 1] + sigma * e[1]]
                })
                .collect();
            belief = belief
                .mean_update(&z, &vis, &model)
                .unwrap()
                .hard_info_update(&vis, m)
                .unwrap();
            steps.push((vis, z));
        }
        if inst % 2 == 0 {
            for c in 0..2 {
                let zs: Vec<Option<f64>> = steps
                    .iter()
                    .map(|(vis, z)| if vis.is_empty() { None } else { Some(z[0][c]) })
                    .collect();
                let (x, p) = scalar_kf(mu0[c], 1.0 / info0[c], &zs, sigma * sigma);
                worst = worst.max(rel(belief.mu[c], x)).max(rel(belief.info_hard[c], 1.0 / p));
            }
        } else {
            let p0: Vec<f64> = info0.iter().map(|l| 1.0 / l).collect();
            let (x, p) = joint_kf(&mu0, &p0, &steps, sigma * sigma);
            for i in 0..2 * n {
                worst = worst
                    .max(rel(belief.mu[i], x[i]))
                    .max(rel(belief.info_hard[i], 1.0 / p[(i, i)]));
            }
        }
    }
    worst
}

pub struct Telescoping {
    pub max_abs_err: f64,
    pub bound_violations: usize,
    pub max_fraction_of_bound: f64,
}

/// Random-control episodes across the landmark scenarios.
pub fn telescoping(episodes: usize, seed: u64) -> Telescoping {
    let scenarios = [
        Scenario::Landmarks3,
        Scenario::Landmarks5,
        Scenario::Landmarks8,
        Scenario::Nonuniform,
    ];
    let mut rng = rng(seed);
    let mut out = Telescoping {
        max_abs_err: 0.0,
        bound_violations: 0,
        max_fraction_of_bound: 0.0,
    };
    for e in 0..episodes {
        let world = WorldConfig::scenario(scenarios[e % scenarios.len()]);
        let b = world.control_bound;
        let (mut ep, obs0) = Episode::reset(&world, rng.random()).unwrap();
        let lam0 = obs0.lambda_soft().to_vec();
        let mut total = 0.0;
        while !ep.done() {
            let u = [rng.random_range(-1.5 * b..1.5 * b), rng.random_range(-1.5 * b..1.5 * b)];
            total += ep.step(u).unwrap().r_land;
        }
        let direct = logdet_gain(&ep.state.belief.info_soft, &lam0).unwrap();
        out.max_abs_err = out.max_abs_err.max((total - direct).abs());
        let bound = world.landmark_reward_bound();
        if total > bound {
            out.bound_violations += 1;
        }
        out.max_fraction_of_bound = out.max_fraction_of_bound.max(total / bound);
    }
    out
}

/// Worst absolute error of `probit` and of the soft weight against the frozen table.
pub fn probit_table_max_err() -> f64 {
    let mut worst: f64 = 0.0;
    for &(x, kappa, p, w) in tables::PROBIT.iter() {
        let fov = FieldOfView::circle(2.0, kappa).unwrap();
        worst = worst.max((probit(x, kappa) - p).abs());
        // signed distances below -radius are not reachable by a point
        if x >= -2.0 {
            let q = BodyFramePoint([0.0, x + 2.0]);
            worst = worst.max((soft_visibility_weight(&q, &fov) - w).abs());
        }
    }
    worst
}

/// Largest gap between the soft weight and the hard indicator for `|d| >= gap`.
pub fn hard_limit_deviation(kappa: f64, gap: f64) -> f64 {
    let fov = FieldOfView::circle(2.0, kappa).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=2000 {
        let d = -2.0 + 5.0 * i as f64 / 2000.0;
        if d.abs() < gap {
            continue;
        }
        let w = soft_visibility_weight(&BodyFramePoint([2.0 + d, 0.0]), &fov);
        let hard = if d <= 0.0 { 1.0 } else { 0.0 };
        worst = worst.max((w - hard).abs());
    }
    worst
}

/// Central differences of the iCR objective on random landmarks5 instances,
/// every control component. The relative error is floored at
/// `1e-6 * max(1, |f|)`, the scale where finite-difference rounding
/// (`eps * |f| / h`) starts to dominate.
pub fn icr_gradcheck(trials: usize, seed: u64) -> f64 {
    let world = WorldConfig::scenario(Scenario::Landmarks5);
    let mut rng = rng(seed);
    let b = world.control_bound;
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let inst = instance_for_seed(&world, rng.random()).unwrap();
        let u: Vec<[f64; 2]> = (0..world.episode_len)
            .map(|_| [rng.random_range(-b..b), rng.random_range(-b..b)])
            .collect();
        let (f, g) = objective_and_grad(&u, &inst, &world, true).unwrap();
        let floor = 1e-6 * f.abs().max(1.0);
        for k in 0..u.len() {
            for c in 0..2 {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[k][c] += h;
                dn[k][c] -= h;
                let fd = (icr_objective(&up, &inst, &world).unwrap() - icr_objective(&dn, &inst, &world).unwrap())
                    / (2.0 * h);
                worst = worst.max((g[k][c] - fd).abs() / g[k][c].abs().max(fd.abs()).max(floor));
            }
        }
    }
    worst
}

/// `A_k` straight from its definition: the discounted sum of TD residuals
/// up to the end of the episode that contains step `k`.
pub fn gae_literal(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let v_next = |t: usize| {
        if dones[t] {
            0.0
        } else if t + 1 < n {
            values[t + 1]
        } else {
            bootstrap
        }
    };
    (0..n)
        .map(|k| {
            let mut total = 0.0;
            for t in k..n {
                let delta = rewards[t] + gamma * v_next(t) - values[t];
                total += (gamma * lambda).powi((t - k) as i32) * delta;
                if dones[t] {
                    break;
                }
            }
            total
        })
        .collect()
}

pub fn gae_max_err(trials: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(1..=10);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.25)).collect();
        let boot = rng.random_range(-3.0..3.0);
        let gamma = rng.random_range(0.5..1.0);
        let lambda = rng.random_range(0.0..=1.0);
        let (adv, ret) = gae(&r, &v, &d, boot, gamma, lambda).unwrap();
        let lit = gae_literal(&r, &v, &d, boot, gamma, lambda);
        for k in 0..n {
            worst = worst.max((adv[k] - lit[k]).abs()).max((ret[k] - lit[k] - v[k]).abs());
        }
    }
    worst
}

/// A policy with every parameter redrawn from `U(-1, 1)` so the outputs are far from zero.
pub fn random_policy(arch: Arch, world: &WorldConfig, seed: u64) -> ActorCritic {
    let mut pi = ActorCritic::new(
        arch,
        FeatureSpec::from_world(world),
        &PpoConfig::default(),
        &mut stream_rng(seed, 0),
    )
    .unwrap();
    let mut rng = rng(seed ^ 0x5eed);
    for net in std::iter::once(&mut pi.actor).chain(pi.critic.as_mut()) {
        for p in &mut net.params {
            for v in p.value.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
    }
    pi
}

/// Random observation for `world`: agent, soft information, means (and map block).
pub fn random_observation(world: &WorldConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let r = world.landmark_range;
    let mut s = vec![
        rng.random_range(-r..r) + world.center[0],
        rng.random_range(-r..r) + world.center[1],
    ];
    for _ in 0..world.n_landmarks {
        let l = rng.random_range(1.0..200.0);
        s.extend([l, l]);
    }
    for _ in 0..world.n_landmarks {
        s.extend([
            rng.random_range(-r..r) + world.center[0],
            rng.random_range(-r..r) + world.center[1],
        ]);
    }
    for _ in 0..world.n_tiles() {
        s.push(rng.random_range(0.0..1.0));
    }
    for _ in 0..world.n_tiles() {
        s.push(rng.random_range(1.0..30.0));
    }
    s
}

/// Reorders the landmark blocks of an observation.
pub fn permute_landmarks(s: &[f64], n: usize, perm: &[usize]) -> Vec<f64> {
    let mut out = s.to_vec();
    for (dst, &src) in perm.iter().enumerate() {
        for c in 0..2 {
            out[2 + 2 * dst + c] = s[2 + 2 * src + c];
            out[2 + 2 * n + 2 * dst + c] = s[2 + 2 * n + 2 * src + c];
        }
    }
    out
}

pub struct AttentionChecks {
    pub singleton_weight_exact: bool,
    pub permutation_exact: bool,
    pub draws: usize,
}

pub fn attention_checks(draws: usize, seed: u64) -> AttentionChecks {
    let mut rng = rng(seed);
    let mut single = WorldConfig::scenario(Scenario::Landmarks3);
    single.n_landmarks = 1;
    let mut singleton_weight_exact = true;
    let mut permutation_exact = true;
    for d in 0..draws {
        let pi = random_policy(Arch::Attention, &single, seed + d as u64);
        let s = random_observation(&single, &mut rng);
        let f = pi.featurize(&[&s]).unwrap();
        let w = pi.actor.attention_weights(&f).unwrap().unwrap();
        singleton_weight_exact &= w == vec![1.0];

        let world = if d % 2 == 0 {
            WorldConfig::scenario(Scenario::Landmarks5)
        } else {
            WorldConfig::scenario(Scenario::Joint)
        };
        let arch = if d % 2 == 0 { Arch::Attention } else { Arch::Joint };
        let pi = random_policy(arch, &world, seed + d as u64);
        let s = random_observation(&world, &mut rng);
        let mut perm: Vec<usize> = (0..world.n_landmarks).collect();
        perm.shuffle(&mut rng);
        let sp = permute_landmarks(&s, world.n_landmarks, &perm);
        let (m0, v0) = pi.evaluate(&pi.featurize(&[&s]).unwrap()).unwrap();
        let (m1, v1) = pi.evaluate(&pi.featurize(&[&sp]).unwrap()).unwrap();
        permutation_exact &= m0 == m1 && v0 == v1;
    }
    AttentionChecks {
        singleton_weight_exact,
        permutation_exact,
        draws,
    }
}

pub struct IcrSanity {
    pub plan_objective: f64,
    pub best_random: f64,
    pub history_monotone: bool,
}

/// Plans on the first evaluation map of the 5-landmark scenario and compares
/// against `n_random` uniform feasible control sequences.
pub fn icr_sanity(n_random: usize, seed: u64) -> IcrSanity {
    let world = WorldConfig::scenario(Scenario::Landmarks5);
    let inst = instance_for_seed(&world, 1_000_000).unwrap();
    let plan = optimize(&inst, &world, &IcrConfig::default(), &mut stream_rng(seed, 1000), 1).unwrap();
    let mut rng = rng(seed);
    let b = world.control_bound;
    let best_random = (0..n_random)
        .map(|_| {
            let u: Vec<[f64; 2]> = (0..world.episode_len)
                .map(|_| [rng.random_range(-b..=b), rng.random_range(-b..=b)])
                .collect();
            icr_objective(&u, &inst, &world).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    IcrSanity {
        plan_objective: icr_objective(&plan.controls, &inst, &world).unwrap(),
        best_random,
        history_monotone: plan.objective_history.windows(2).all(|w| w[1] >= w[0]),
    }
}
