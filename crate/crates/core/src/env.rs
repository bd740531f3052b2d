//! Episodic active-localization environments.
//!
//! A single-integrator robot moves in the plane, measures every landmark (and
//! map tile) inside its circular FoV, and fuses the measurements into a
//! diagonal information filter. The per-step reward is the log-det increase
//! of the soft information vector, optionally mixed with the map's.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::belief::{logdet_gain, LandmarkBelief, MapBelief, SensorModel};
use crate::error::{Error, Result};
use crate::fov::{body_frame, hard_visible_set, soft_visibility_weight, FieldOfView, RobotState, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Landmarks3,
    Landmarks5,
    Landmarks8,
    Nonuniform,
    Joint,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Landmarks3,
        Scenario::Landmarks5,
        Scenario::Landmarks8,
        Scenario::Nonuniform,
        Scenario::Joint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Landmarks3 => "landmarks3",
            Scenario::Landmarks5 => "landmarks5",
            Scenario::Landmarks8 => "landmarks8",
            Scenario::Nonuniform => "nonuniform",
            Scenario::Joint => "joint",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub n_landmarks: usize,
    pub episode_len: usize,
    /// Per-axis control clamp.
    pub control_bound: f64,
    /// Center of the landmark and agent boxes (and of the map).
    pub center: Vec2,
    /// Half-width of the uniform landmark box.
    pub landmark_range: f64,
    /// Half-width of the uniform initial-position box.
    pub agent_init_range: f64,
    pub sigma: f64,
    pub fov: FieldOfView,
    /// Standard deviation of additive motion noise; 0 disables it.
    pub motion_noise_std: f64,
    pub gamma: f64,
    pub map_enabled: bool,
    /// Tile grid `[h_m, w_m]`.
    pub map_dims: [usize; 2],
    pub map_tile_size: f64,
    pub obstacle_density: f64,
    pub map_info_init: f64,
    pub rho: f64,
    pub alpha_land: f64,
    /// `None` means `2 n_l / n_m`.
    pub alpha_map: Option<f64>,
    /// Initial per-coordinate landmark information; `None` means `1 / sigma^2`.
    pub info_init: Option<f64>,
    /// The first `high_info_count` landmarks start with `high_info_multiplier`
    /// times the base information.
    pub high_info_count: usize,
    pub high_info_multiplier: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self::scenario(Scenario::Landmarks3)
    }
}

impl WorldConfig {
    pub fn scenario(scenario: Scenario) -> Self {
        let base = Self {
            n_landmarks: 3,
            episode_len: 8,
            control_bound: 3.0,
            center: [0.0, 0.0],
            landmark_range: 8.0,
            agent_init_range: 2.0,
            sigma: 0.5,
            fov: FieldOfView::default(),
            motion_noise_std: 0.0,
            gamma: 0.99,
            map_enabled: false,
            map_dims: [15, 15],
            map_tile_size: 2.0,
            obstacle_density: 0.2,
            map_info_init: 1.0,
            rho: 1.0,
            alpha_land: 1.0,
            alpha_map: None,
            info_init: None,
            high_info_count: 0,
            high_info_multiplier: 50.0,
        };
        match scenario {
            Scenario::Landmarks3 => base,
            Scenario::Landmarks5 => Self {
                n_landmarks: 5,
                episode_len: 15,
                landmark_range: 10.0,
                ..base
            },
            Scenario::Landmarks8 => Self {
                n_landmarks: 8,
                episode_len: 18,
                landmark_range: 12.0,
                ..base
            },
            Scenario::Nonuniform => Self {
                high_info_count: 1,
                ..base
            },
            Scenario::Joint => Self {
                n_landmarks: 5,
                episode_len: 15,
                center: [15.0, 15.0],
                landmark_range: 10.0,
                map_enabled: true,
                rho: 0.2,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_landmarks == 0 {
            return bad("n_landmarks must be >= 1".into());
        }
        if self.episode_len == 0 {
            return bad("episode_len must be >= 1".into());
        }
        if !(self.control_bound > 0.0 && self.control_bound.is_finite()) {
            return bad(format!("control_bound must be > 0, got {}", self.control_bound));
        }
        if !(self.landmark_range >= 0.0 && self.agent_init_range >= 0.0) {
            return bad("box half-widths must be >= 0".into());
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return bad("center must be finite".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        self.fov.validate()?;
        if !(self.motion_noise_std >= 0.0) {
            return bad(format!("motion_noise_std must be >= 0, got {}", self.motion_noise_std));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if !(self.alpha_land >= 0.0) || self.alpha_map.is_some_and(|a| !(a >= 0.0)) {
            return bad("reward normalizers must be >= 0".into());
        }
        if self.info_init.is_some_and(|v| !(v > 0.0)) {
            return bad("info_init must be > 0".into());
        }
        if self.high_info_count > self.n_landmarks {
            return bad(format!(
                "high_info_count {} exceeds n_landmarks {}",
                self.high_info_count, self.n_landmarks
            ));
        }
        if !(self.high_info_multiplier > 0.0) {
            return bad("high_info_multiplier must be > 0".into());
        }
        if self.map_enabled {
            if self.map_dims[0] == 0 || self.map_dims[1] == 0 {
                return bad("map_dims must be positive".into());
            }
            if !(self.map_tile_size > 0.0) {
                return bad("map_tile_size must be > 0".into());
            }
            if !(0.0..=1.0).contains(&self.obstacle_density) {
                return bad(format!(
                    "obstacle_density must lie in [0, 1], got {}",
                    self.obstacle_density
                ));
            }
            if !(self.map_info_init > 0.0) {
                return bad("map_info_init must be > 0".into());
            }
        }
        Ok(())
    }

    pub fn n_tiles(&self) -> usize {
        if self.map_enabled {
            self.map_dims[0] * self.map_dims[1]
        } else {
            0
        }
    }

    pub fn obs_dim(&self) -> usize {
        2 + 4 * self.n_landmarks + 2 * self.n_tiles()
    }

    pub fn sensor(&self) -> SensorModel {
        SensorModel { sigma: self.sigma }
    }

    pub fn base_info(&self) -> f64 {
        self.info_init.unwrap_or_else(|| self.sensor().info_rate())
    }

    /// Initial per-coordinate information, length `2 n_l`.
    pub fn initial_info(&self) -> Vec<f64> {
        let base = self.base_info();
        (0..self.n_landmarks)
            .flat_map(|j| {
                let v = if j < self.high_info_count {
                    base * self.high_info_multiplier
                } else {
                    base
                };
                [v, v]
            })
            .collect()
    }

    pub fn alpha_map_value(&self) -> f64 {
        self.alpha_map
            .unwrap_or_else(|| 2.0 * self.n_landmarks as f64 / self.n_tiles().max(1) as f64)
    }

    /// Tile centers in row-major order; row `i` runs along y, column `c` along x.
    pub fn tile_positions(&self) -> Vec<Vec2> {
        let [h, w] = self.map_dims;
        let s = self.map_tile_size;
        let x0 = self.center[0] - 0.5 * s * w as f64;
        let y0 = self.center[1] - 0.5 * s * h as f64;
        let mut out = Vec::with_capacity(h * w);
        for i in 0..h {
            for c in 0..w {
                out.push([x0 + (c as f64 + 0.5) * s, y0 + (i as f64 + 0.5) * s]);
            }
        }
        out
    }

    /// Closed-form ceiling on the cumulative landmark reward of one episode.
    pub fn landmark_reward_bound(&self) -> f64 {
        let m = self.sensor().info_rate();
        let k = self.episode_len as f64;
        self.initial_info().iter().map(|&l0| ((l0 + k * m) / l0).ln()).sum()
    }
}

/// `rho * alpha_land * r_land + (1 - rho) * alpha_map * r_map`.
pub fn combined_reward(r_land: f64, r_map: f64, config: &WorldConfig) -> f64 {
    config.rho * config.alpha_land * r_land + (1.0 - config.rho) * config.alpha_map_value() * r_map
}

/// Mean over all coordinates of `|mu_i - y_i|`.
pub fn mae(mu_final: &[f64], y_true: &[f64]) -> Result<f64> {
    if mu_final.len() != y_true.len() || mu_final.is_empty() {
        return Err(Error::Dimension(format!(
            "means have {} entries, ground truth {}",
            mu_final.len(),
            y_true.len()
        )));
    }
    let total: f64 = mu_final.iter().zip(y_true).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / mu_final.len() as f64)
}

/// Mean Euclidean distance between estimated and true landmark positions.
pub fn mae_euclidean(mu_final: &[f64], y_true: &[f64]) -> Result<f64> {
    if mu_final.len() != y_true.len() || mu_final.is_empty() || !mu_final.len().is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "means have {} entries, ground truth {}",
            mu_final.len(),
            y_true.len()
        )));
    }
    let n = mu_final.len() / 2;
    let total: f64 = (0..n)
        .map(|j| (mu_final[2 * j] - y_true[2 * j]).hypot(mu_final[2 * j + 1] - y_true[2 * j + 1]))
        .sum();
    Ok(total / n as f64)
}

fn uniform_box(rng: &mut ChaCha8Rng, center: Vec2, half: f64) -> Vec2 {
    let mut draw = |c: f64| {
        if half > 0.0 {
            rng.random_range(c - half..=c + half)
        } else {
            c
        }
    };
    let a = draw(center[0]);
    let b = draw(center[1]);
    [a, b]
}

/// Random axis-aligned rectangular obstacles until the occupied fraction
/// reaches `obstacle_density`. Returns `+1` for occupied and `-1` for free.
pub fn generate_map_ground_truth(config: &WorldConfig, rng: &mut ChaCha8Rng) -> Vec<i8> {
    let [h, w] = config.map_dims;
    let n = h * w;
    let mut grid = vec![-1i8; n];
    let target = (config.obstacle_density * n as f64).round() as usize;
    if target >= n {
        grid.fill(1);
        return grid;
    }
    let max_h = (h / 4).max(1);
    let max_w = (w / 4).max(1);
    let mut occupied = 0;
    while occupied < target {
        let rh = rng.random_range(1..=max_h);
        let rw = rng.random_range(1..=max_w);
        let r0 = rng.random_range(0..=h - rh);
        let c0 = rng.random_range(0..=w - rw);
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                let cell = &mut grid[r * w + c];
                if *cell < 0 {
                    *cell = 1;
                    occupied += 1;
                }
            }
        }
    }
    grid
}

/// Flat MDP state `[x; lambda_soft; mu]`, followed by `[xi; Y_map]` when the map is on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpObservation {
    pub s: Vec<f64>,
    pub n_landmarks: usize,
    pub n_tiles: usize,
}

impl MdpObservation {
    pub fn x(&self) -> &[f64] {
        &self.s[..2]
    }

    pub fn lambda_soft(&self) -> &[f64] {
        &self.s[2..2 + 2 * self.n_landmarks]
    }

    pub fn mu(&self) -> &[f64] {
        &self.s[2 + 2 * self.n_landmarks..2 + 4 * self.n_landmarks]
    }

    pub fn xi(&self) -> &[f64] {
        let o = 2 + 4 * self.n_landmarks;
        &self.s[o..o + self.n_tiles]
    }

    pub fn map_info(&self) -> &[f64] {
        let o = 2 + 4 * self.n_landmarks + self.n_tiles;
        &self.s[o..o + self.n_tiles]
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeState {
    pub x: Vec2,
    /// Flat `[y0x, y0y, y1x, ...]`.
    pub y_true: Vec<f64>,
    pub belief: LandmarkBelief,
    pub map_true: Option<Vec<i8>>,
    pub map_belief: Option<MapBelief>,
    /// Soft tile weights at the current position.
    pub xi: Vec<f64>,
    pub k: usize,
    pub rng: ChaCha8Rng,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: MdpObservation,
    pub reward: f64,
    pub r_land: f64,
    pub r_map: f64,
    pub done: bool,
    pub applied_control: Vec2,
    pub visible: Vec<usize>,
}

/// One environment instance: configuration plus mutable episode state.
#[derive(Clone, Debug)]
pub struct Episode {
    pub config: WorldConfig,
    pub state: EpisodeState,
    tiles: Vec<Vec2>,
}

fn tile_weights(x: Vec2, tiles: &[Vec2], fov: &FieldOfView) -> Vec<f64> {
    let robot = RobotState::at(x);
    tiles
        .iter()
        .map(|p| soft_visibility_weight(&body_frame(&robot, *p), fov))
        .collect()
}

impl Episode {
    pub fn reset(config: &WorldConfig, seed: u64) -> Result<(Self, MdpObservation)> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform_box(&mut rng, config.center, config.agent_init_range);
        let mut y_true = Vec::with_capacity(2 * config.n_landmarks);
        for _ in 0..config.n_landmarks {
            y_true.extend(uniform_box(&mut rng, config.center, config.landmark_range));
        }
        // The prior mean is drawn with the spread implied by the prior information.
        let info = config.initial_info();
        let mu: Vec<f64> = y_true
            .iter()
            .zip(&info)
            .map(|(&y, &l)| {
                let e: f64 = rng.sample(StandardNormal);
                y + e / l.sqrt()
            })
            .collect();
        let belief = LandmarkBelief::new(mu, info)?;
        let tiles = if config.map_enabled {
            config.tile_positions()
        } else {
            Vec::new()
        };
        let (map_true, map_belief) = if config.map_enabled {
            let gt = generate_map_ground_truth(config, &mut rng);
            (Some(gt), Some(MapBelief::new(tiles.clone(), config.map_info_init)?))
        } else {
            (None, None)
        };
        let xi = tile_weights(x, &tiles, &config.fov);
        let episode = Self {
            config: config.clone(),
            state: EpisodeState {
                x,
                y_true,
                belief,
                map_true,
                map_belief,
                xi,
                k: 0,
                rng,
            },
            tiles,
        };
        let obs = episode.observation();
        Ok((episode, obs))
    }

    pub fn done(&self) -> bool {
        self.state.k >= self.config.episode_len
    }

    pub fn landmarks(&self) -> Vec<Vec2> {
        self.state.y_true.chunks(2).map(|c| [c[0], c[1]]).collect()
    }

    pub fn step(&mut self, u: Vec2) -> Result<StepOutcome> {
        if self.done() {
            return Err(Error::Contract(format!(
                "step on a finished episode (k = {})",
                self.state.k
            )));
        }
        if !(u[0].is_finite() && u[1].is_finite()) {
            return Err(Error::Contract(format!("non-finite control {u:?}")));
        }
        let cfg = &self.config;
        let st = &mut self.state;
        let b = cfg.control_bound;
        let applied = [u[0].clamp(-b, b), u[1].clamp(-b, b)];
        let mut x = [st.x[0] + applied[0], st.x[1] + applied[1]];
        if cfg.motion_noise_std > 0.0 {
            for c in &mut x {
                let e: f64 = st.rng.sample(StandardNormal);
                *c += cfg.motion_noise_std * e;
            }
        }
        st.x = x;
        let robot = RobotState::at(x);
        let model = cfg.sensor();
        let m = model.info_rate();

        let landmarks: Vec<Vec2> = st.y_true.chunks(2).map(|c| [c[0], c[1]]).collect();
        let visible = hard_visible_set(&robot, &landmarks, &cfg.fov);
        let z: Vec<Vec2> = visible
            .iter()
            .map(|&j| {
                let ex: f64 = st.rng.sample(StandardNormal);
                let ey: f64 = st.rng.sample(StandardNormal);
                [landmarks[j][0] + cfg.sigma * ex, landmarks[j][1] + cfg.sigma * ey]
            })
            .collect();
        let updated = st
            .belief
            .mean_update(&z, &visible, &model)?
            .hard_info_update(&visible, m)?;
        let weights: Vec<f64> = (0..cfg.n_landmarks)
            .map(|j| soft_visibility_weight(&body_frame(&robot, updated.mean(j)), &cfg.fov))
            .collect();
        let updated = updated.soft_info_update(&weights, m)?;
        let r_land = logdet_gain(&updated.info_soft, &st.belief.info_soft)?;
        st.belief = updated;

        let mut r_map = 0.0;
        if let (Some(map), Some(gt)) = (st.map_belief.as_ref(), st.map_true.as_ref()) {
            st.xi = tile_weights(x, &self.tiles, &cfg.fov);
            let seen = hard_visible_set(&robot, &self.tiles, &cfg.fov);
            let zm: Vec<f64> = seen
                .iter()
                .map(|&j| {
                    let e: f64 = st.rng.sample(StandardNormal);
                    f64::from(gt[j]) + cfg.sigma * e
                })
                .collect();
            let next = map
                .map_info_update(&st.xi, cfg.sigma)?
                .occupancy_update(&seen, &zm, cfg.sigma)?;
            r_map = logdet_gain(&next.info, &map.info)?;
            st.map_belief = Some(next);
        }
        let reward = if cfg.map_enabled {
            combined_reward(r_land, r_map, cfg)
        } else {
            r_land
        };
        st.k += 1;
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            r_land,
            r_map,
            done: self.done(),
            applied_control: applied,
            visible,
        })
    }

    pub fn observation(&self) -> MdpObservation {
        assemble_observation(&self.state, &self.config)
    }

    pub fn mae(&self) -> f64 {
        mae(&self.state.belief.mu, &self.state.y_true).expect("belief and ground truth sizes agree")
    }

    /// Fraction of tiles whose thresholded occupancy estimate matches the ground truth.
    pub fn map_accuracy(&self) -> Option<f64> {
        let (map, gt) = (self.state.map_belief.as_ref()?, self.state.map_true.as_ref()?);
        let est = map.threshold_occupancy();
        let hits = est.iter().zip(gt).filter(|(a, b)| a == b).count();
        Some(hits as f64 / gt.len() as f64)
    }

    pub fn record(&self, u: Option<Vec2>, reward: Option<f64>, visible: Vec<usize>) -> TrajectoryRecord {
        TrajectoryRecord {
            k: self.state.k,
            x: self.state.x,
            u,
            reward,
            mu: self.state.belief.mu.clone(),
            lambda_soft: self.state.belief.info_soft.clone(),
            visible_indices: visible,
        }
    }
}

pub fn assemble_observation(state: &EpisodeState, config: &WorldConfig) -> MdpObservation {
    let n_tiles = config.n_tiles();
    let mut s = Vec::with_capacity(config.obs_dim());
    s.extend_from_slice(&state.x);
    s.extend_from_slice(&state.belief.info_soft);
    s.extend_from_slice(&state.belief.mu);
    if let Some(map) = &state.map_belief {
        s.extend_from_slice(&state.xi);
        s.extend_from_slice(&map.info);
    }
    MdpObservation {
        s,
        n_landmarks: config.n_landmarks,
        n_tiles,
    }
}

/// One line of an exported trajectory. `u` and `reward` are null for the
/// initial state; `visible_indices` lists the landmarks measured on arrival.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub x: Vec2,
    pub u: Option<Vec2>,
    pub reward: Option<f64>,
    pub mu: Vec<f64>,
    pub lambda_soft: Vec<f64>,
    pub visible_indices: Vec<usize>,
}
