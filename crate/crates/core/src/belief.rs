//! Information-form Kalman filtering over static landmarks and map tiles.
//!
//! With an identity observation matrix and isotropic noise `sigma^2 I` the
//! information matrix stays diagonal, so every belief is a vector of
//! per-coordinate information values next to the posterior means. Two
//! information tracks are kept per landmark: `info_hard` is the estimator's
//! own information (updated only for landmarks actually inside the FoV) and
//! `info_soft` is the smoothed track that drives the reward and the policy
//! input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fov::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub sigma: f64,
}

impl SensorModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidModel(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// Scalar `1 / sigma^2`; the sensor information matrix is this times `I_2`.
    pub fn info_rate(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }

    /// `H^T V^-1 H` with `H = I_2`, `V = sigma^2 I_2`.
    pub fn sensor_info_matrix(&self) -> Result<[[f64; 2]; 2]> {
        Self::new(self.sigma)?;
        let m = self.info_rate();
        Ok([[m, 0.0], [0.0, m]])
    }
}

/// Posterior over `n` planar landmarks; vectors are laid out `[x0, y0, x1, y1, ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkBelief {
    pub mu: Vec<f64>,
    pub info_hard: Vec<f64>,
    pub info_soft: Vec<f64>,
}

fn check_rate(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::Contract(format!("information rate must be > 0, got {m}")))
    }
}

impl LandmarkBelief {
    /// Both information tracks start at `info_init` (one value per coordinate).
    pub fn new(mu: Vec<f64>, info_init: Vec<f64>) -> Result<Self> {
        if !mu.len().is_multiple_of(2) || mu.len() != info_init.len() {
            return Err(Error::Dimension(format!(
                "means have {} entries, information {}",
                mu.len(),
                info_init.len()
            )));
        }
        if let Some(bad) = info_init.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Domain(format!("initial information must be > 0, got {bad}")));
        }
        Ok(Self {
            mu,
            info_hard: info_init.clone(),
            info_soft: info_init,
        })
    }

    pub fn n_landmarks(&self) -> usize {
        self.mu.len() / 2
    }

    pub fn mean(&self, j: usize) -> Vec2 {
        [self.mu[2 * j], self.mu[2 * j + 1]]
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j < self.n_landmarks() {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "landmark index {j} out of range for {} landmarks",
                self.n_landmarks()
            )))
        }
    }

    /// Adds `m` to both coordinates of every visible landmark's hard information.
    pub fn hard_info_update(&self, visible: &[usize], m: f64) -> Result<Self> {
        check_rate(m)?;
        let mut next = self.clone();
        for &j in visible {
            self.check_index(j)?;
            next.info_hard[2 * j] += m;
            next.info_hard[2 * j + 1] += m;
        }
        Ok(next)
    }

    /// Adds `weights[j] * m` to both coordinates of every landmark's soft information.
    pub fn soft_info_update(&self, weights: &[f64], m: f64) -> Result<Self> {
        check_rate(m)?;
        if weights.len() != self.n_landmarks() {
            return Err(Error::Contract(format!(
                "{} weights for {} landmarks",
                weights.len(),
                self.n_landmarks()
            )));
        }
        let mut next = self.clone();
        for (j, &w) in weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Contract(format!("weight {w} for landmark {j} outside [0, 1]")));
            }
            next.info_soft[2 * j] += w * m;
            next.info_soft[2 * j + 1] += w * m;
        }
        Ok(next)
    }

    /// Scalar information-filter mean update for each visible landmark.
    ///
    /// `z[i]` is the world-frame measurement of landmark `visible[i]`. The
    /// prior weight is the hard information before this step's update.
    pub fn mean_update(&self, z: &[Vec2], visible: &[usize], model: &SensorModel) -> Result<Self> {
        if z.len() != visible.len() {
            return Err(Error::Contract(format!(
                "{} measurements for {} visible landmarks",
                z.len(),
                visible.len()
            )));
        }
        let m = model.info_rate();
        let mut next = self.clone();
        for (zj, &j) in z.iter().zip(visible) {
            self.check_index(j)?;
            for c in 0..2 {
                let i = 2 * j + c;
                let lam = self.info_hard[i];
                next.mu[i] = (lam * self.mu[i] + m * zj[c]) / (lam + m);
            }
        }
        Ok(next)
    }
}

/// `sum_i (ln next_i - ln prev_i)`: the log-det change of a diagonal information matrix.
pub fn logdet_gain(info_next: &[f64], info_prev: &[f64]) -> Result<f64> {
    if info_next.len() != info_prev.len() {
        return Err(Error::Dimension(format!(
            "information vectors of length {} and {}",
            info_next.len(),
            info_prev.len()
        )));
    }
    let mut total = 0.0;
    for (&a, &b) in info_next.iter().zip(info_prev) {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!("log-det of non-positive information ({a}, {b})")));
        }
        total += a.ln() - b.ln();
    }
    Ok(total)
}

/// Per-tile occupancy belief for the volumetric map.
///
/// `info` is the smoothed information used for the exploration reward.
/// `occ_info` is the estimator's information for `occ_mean`, updated only for
/// tiles inside the hard FoV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapBelief {
    pub info: Vec<f64>,
    pub occ_info: Vec<f64>,
    pub occ_mean: Vec<f64>,
    pub tile_positions: Vec<Vec2>,
}

impl MapBelief {
    /// Zero-mean occupancy prior with information `info_init` on every tile.
    pub fn new(tile_positions: Vec<Vec2>, info_init: f64) -> Result<Self> {
        if !(info_init > 0.0) {
            return Err(Error::Domain(format!(
                "initial map information must be > 0, got {info_init}"
            )));
        }
        let n = tile_positions.len();
        Ok(Self {
            info: vec![info_init; n],
            occ_info: vec![info_init; n],
            occ_mean: vec![0.0; n],
            tile_positions,
        })
    }

    pub fn n_tiles(&self) -> usize {
        self.tile_positions.len()
    }

    /// `info_j += xi_j / sigma^2`.
    pub fn map_info_update(&self, xi: &[f64], sigma: f64) -> Result<Self> {
        let model = SensorModel::new(sigma)?;
        if xi.len() != self.n_tiles() {
            return Err(Error::Contract(format!(
                "{} weights for {} tiles",
                xi.len(),
                self.n_tiles()
            )));
        }
        let m = model.info_rate();
        let mut next = self.clone();
        for (j, &w) in xi.iter().enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Contract(format!("weight {w} for tile {j} outside [0, 1]")));
            }
            next.info[j] += w * m;
        }
        Ok(next)
    }

    /// Fuses scalar occupancy measurements `z[i]` of tiles `visible[i]`.
    pub fn occupancy_update(&self, visible: &[usize], z: &[f64], sigma: f64) -> Result<Self> {
        let m = SensorModel::new(sigma)?.info_rate();
        if z.len() != visible.len() {
            return Err(Error::Contract(format!(
                "{} measurements for {} visible tiles",
                z.len(),
                visible.len()
            )));
        }
        let mut next = self.clone();
        for (&j, &zj) in visible.iter().zip(z) {
            if j >= self.n_tiles() {
                return Err(Error::Contract(format!("tile index {j} out of range")));
            }
            let lam = self.occ_info[j];
            next.occ_mean[j] = (lam * self.occ_mean[j] + m * zj) / (lam + m);
            next.occ_info[j] = lam + m;
        }
        Ok(next)
    }

    /// `+1` for a positive occupancy estimate, `-1` otherwise (zero counts as free).
    pub fn threshold_occupancy(&self) -> Vec<i8> {
        self.occ_mean.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect()
    }
}
