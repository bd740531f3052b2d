//! Limited field-of-view geometry.
//!
//! The sensing footprint is a disk of fixed radius around the robot. Hard
//! visibility is membership in the closed disk; soft visibility smooths the
//! indicator with a shifted probit of the signed distance to the boundary so
//! that information gain varies continuously with the robot position.

use std::f64::consts::SQRT_2;

use infogain_autodiff::special::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FovShape {
    Circle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldOfView {
    pub shape: FovShape,
    pub radius: f64,
    pub kappa: f64,
}

impl FieldOfView {
    pub fn circle(radius: f64, kappa: f64) -> Result<Self> {
        let fov = Self {
            shape: FovShape::Circle,
            radius,
            kappa,
        };
        fov.validate()?;
        Ok(fov)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!("fov radius must be > 0, got {}", self.radius)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("fov kappa must be > 0, got {}", self.kappa)));
        }
        Ok(())
    }
}

impl Default for FieldOfView {
    fn default() -> Self {
        Self {
            shape: FovShape::Circle,
            radius: 2.0,
            kappa: 0.5,
        }
    }
}

/// Robot pose. Only the position is controlled; `heading` is carried for
/// pose-based sensors but no rotation is applied to body-frame points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub position: Vec2,
    pub heading: Option<f64>,
}

impl RobotState {
    pub fn at(position: Vec2) -> Self {
        Self {
            position,
            heading: None,
        }
    }
}

/// A target expressed in the robot body frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyFramePoint(pub Vec2);

impl BodyFramePoint {
    pub fn norm(&self) -> f64 {
        self.0[0].hypot(self.0[1])
    }
}

pub fn body_frame(x: &RobotState, p: Vec2) -> BodyFramePoint {
    BodyFramePoint([p[0] - x.position[0], p[1] - x.position[1]])
}

/// Distance to the FoV boundary: negative inside, zero on it, positive outside.
pub fn signed_distance(q: &BodyFramePoint, fov: &FieldOfView) -> f64 {
    match fov.shape {
        FovShape::Circle => q.norm() - fov.radius,
    }
}

fn probit_arg(x: f64, kappa: f64) -> f64 {
    x / (SQRT_2 * kappa) - 2.0
}

/// `0.5 * (1 + erf(x / (sqrt(2) kappa) - 2))`.
pub fn probit(x: f64, kappa: f64) -> f64 {
    0.5 * erfc(-probit_arg(x, kappa))
}

/// `1 - probit(d)`, evaluated through `erfc` so that it stays accurate when
/// the point is deep inside the footprint.
pub fn soft_visibility_weight(q: &BodyFramePoint, fov: &FieldOfView) -> f64 {
    0.5 * erfc(probit_arg(signed_distance(q, fov), fov.kappa))
}

/// Indices of points inside the closed FoV.
pub fn hard_visible_set(x: &RobotState, points: &[Vec2], fov: &FieldOfView) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| signed_distance(&body_frame(x, **p), fov) <= 0.0)
        .map(|(j, _)| j)
        .collect()
}
