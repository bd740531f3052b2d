//! Actor and critic networks built on the autodiff tape.
//!
//! All three architectures share the agent encoder and the output head; they
//! differ in how the landmark (and map) part of the state is summarized.
//! Parameters live in a flat list of named tensors whose order is fixed by
//! the architecture, which is also the checkpoint order.

use infogain_autodiff::{Padding, Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::WorldConfig;
use crate::error::{Error, Result};

pub const AGENT_WIDTH: usize = 32;
pub const LANDMARK_HIDDEN: usize = 64;
pub const EMBED_WIDTH: usize = 32;
pub const HEAD_WIDTH: usize = 64;
pub const CONV_CHANNELS: [usize; 2] = [8, 16];
pub const CONV_KERNEL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Attention,
    Mlp,
    Joint,
}

impl Arch {
    pub fn tag(self) -> &'static str {
        match self {
            Arch::Attention => "attention",
            Arch::Mlp => "mlp",
            Arch::Joint => "joint",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "attention" => Ok(Arch::Attention),
            "mlp" => Ok(Arch::Mlp),
            "joint" => Ok(Arch::Joint),
            other => Err(Error::Checkpoint(format!("unknown architecture '{other}'"))),
        }
    }
}

/// Fixed input normalization applied before the first learned layer.
///
/// Positions are shifted to the world center and divided by the landmark box
/// half-width; information values enter as `ln(value / initial value)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub n_landmarks: usize,
    pub center: [f64; 2],
    pub pos_scale: f64,
    pub info_ref: f64,
    pub map_dims: Option<[usize; 2]>,
    pub map_info_ref: f64,
}

impl FeatureSpec {
    pub fn from_world(world: &WorldConfig) -> Self {
        Self {
            n_landmarks: world.n_landmarks,
            center: world.center,
            pos_scale: world.landmark_range.max(1.0),
            info_ref: world.base_info(),
            map_dims: world.map_enabled.then_some(world.map_dims),
            map_info_ref: world.map_info_init,
        }
    }

    pub fn obs_dim(&self) -> usize {
        let tiles = self.map_dims.map_or(0, |[h, w]| h * w);
        2 + 4 * self.n_landmarks + 2 * tiles
    }
}

/// A batch of normalized network inputs.
#[derive(Clone, Debug)]
pub struct Features {
    pub batch: usize,
    /// `[B, 2]`
    pub agent: Tensor,
    /// `[B * n_l, 4]`, row `(lambda_x, lambda_y, mu_x, mu_y)` per landmark.
    pub landmarks: Tensor,
    /// `[B, 2, h_m, w_m]` when the map is enabled.
    pub map: Option<Tensor>,
}

impl Features {
    /// Normalizes raw observations. With `sort_landmarks` the landmark rows of
    /// every sample are put in lexicographic order, which makes the features
    /// (and hence any network on top) exactly invariant to landmark order.
    pub fn build(spec: &FeatureSpec, obs: &[&[f64]], sort_landmarks: bool) -> Result<Self> {
        let n = spec.n_landmarks;
        let b = obs.len();
        let mut agent = Vec::with_capacity(2 * b);
        let mut landmarks = Vec::with_capacity(4 * n * b);
        let tiles = spec.map_dims.map_or(0, |[h, w]| h * w);
        let mut map = Vec::with_capacity(2 * tiles * b);
        for s in obs {
            if s.len() != spec.obs_dim() {
                return Err(Error::Dimension(format!(
                    "observation has {} entries, expected {}",
                    s.len(),
                    spec.obs_dim()
                )));
            }
            for c in 0..2 {
                agent.push((s[c] - spec.center[c]) / spec.pos_scale);
            }
            let lam = &s[2..2 + 2 * n];
            let mu = &s[2 + 2 * n..2 + 4 * n];
            let mut rows: Vec<[f64; 4]> = (0..n)
                .map(|j| {
                    [
                        (lam[2 * j] / spec.info_ref).ln(),
                        (lam[2 * j + 1] / spec.info_ref).ln(),
                        (mu[2 * j] - spec.center[0]) / spec.pos_scale,
                        (mu[2 * j + 1] - spec.center[1]) / spec.pos_scale,
                    ]
                })
                .collect();
            if sort_landmarks {
                rows.sort_by(|a, b| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            }
            for r in rows {
                landmarks.extend_from_slice(&r);
            }
            if tiles > 0 {
                let o = 2 + 4 * n;
                map.extend_from_slice(&s[o..o + tiles]);
                map.extend(s[o + tiles..o + 2 * tiles].iter().map(|v| (v / spec.map_info_ref).ln()));
            }
        }
        Ok(Self {
            batch: b,
            agent: Tensor::matrix(b, 2, agent),
            landmarks: Tensor::matrix(b * n, 4, landmarks),
            map: spec.map_dims.map(|[h, w]| Tensor::new(vec![b, 2, h, w], map)),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedParam {
    pub name: String,
    pub value: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Dense {
    w: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Act {
    Tanh,
    Linear,
}

/// Parameter indices, in creation order.
#[derive(Clone, Debug, PartialEq)]
struct Layout {
    agent: [Dense; 2],
    /// Attention and joint: per-landmark encoder. Mlp: encoder on the flat landmark block.
    lm: [Dense; 2],
    /// Query, key and value projections (no bias).
    qkv: Option<[usize; 3]>,
    head: [Dense; 2],
    conv: Option<[Dense; 2]>,
    fusion: Option<Dense>,
    out: Dense,
}

/// One actor or critic network.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub arch: Arch,
    pub n_landmarks: usize,
    pub map_dims: Option<[usize; 2]>,
    pub out_dim: usize,
    pub params: Vec<NamedParam>,
    layout: Layout,
}

struct Builder<'a> {
    params: Vec<NamedParam>,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    /// Uniform on `[-a, a]` with `a = gain * sqrt(3 / fan_in)`, i.e. standard
    /// deviation `gain / sqrt(fan_in)`. Biases start at zero.
    fn uniform(&mut self, name: &str, shape: Vec<usize>, fan_in: usize, gain: f64) -> usize {
        let a = gain * (3.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| self.rng.random_range(-a..=a)).collect();
        self.push(name, Tensor::new(shape, data))
    }

    fn push(&mut self, name: &str, value: Tensor) -> usize {
        self.params.push(NamedParam {
            name: name.to_string(),
            value,
        });
        self.params.len() - 1
    }

    fn dense(&mut self, name: &str, fan_in: usize, fan_out: usize, gain: f64) -> Dense {
        let w = self.uniform(&format!("{name}.w"), vec![fan_in, fan_out], fan_in, gain);
        let b = self.push(&format!("{name}.b"), Tensor::zeros(vec![fan_out]));
        Dense { w, b }
    }

    fn conv(&mut self, name: &str, c_in: usize, c_out: usize, gain: f64) -> Dense {
        let k = CONV_KERNEL;
        let fan_in = c_in * k * k;
        let w = self.uniform(&format!("{name}.w"), vec![c_out, c_in, k, k], fan_in, gain);
        let b = self.push(&format!("{name}.b"), Tensor::zeros(vec![c_out]));
        Dense { w, b }
    }
}

pub const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;

impl Network {
    /// Fresh network. `out_gain` scales the output layer (0.01 for the
    /// action mean, 1 for the value).
    pub fn new(
        arch: Arch,
        n_landmarks: usize,
        map_dims: Option<[usize; 2]>,
        out_dim: usize,
        out_gain: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if n_landmarks == 0 || out_dim == 0 {
            return Err(Error::Config("network needs >= 1 landmark and output".into()));
        }
        let conv_out = match (arch, map_dims) {
            (Arch::Joint, Some([h, w])) => {
                let shrink = 2 * (CONV_KERNEL - 1);
                if h <= shrink || w <= shrink {
                    return Err(Error::Config(format!(
                        "map {h}x{w} too small for two valid 3x3 convolutions"
                    )));
                }
                CONV_CHANNELS[1] * (h - shrink) * (w - shrink)
            }
            (Arch::Joint, None) => return Err(Error::Config("joint architecture needs map_dims".into())),
            (_, Some(_)) => {
                return Err(Error::Config(format!("{} architecture cannot use a map", arch.tag())));
            }
            _ => 0,
        };
        let g = HIDDEN_GAIN;
        let mut bld = Builder {
            params: Vec::new(),
            rng,
        };
        let agent = [
            bld.dense("agent.0", 2, AGENT_WIDTH, g),
            bld.dense("agent.1", AGENT_WIDTH, AGENT_WIDTH, g),
        ];
        let lm_in = if arch == Arch::Mlp { 4 * n_landmarks } else { 4 };
        let lm = [
            bld.dense("landmark.0", lm_in, LANDMARK_HIDDEN, g),
            bld.dense("landmark.1", LANDMARK_HIDDEN, EMBED_WIDTH, g),
        ];
        let qkv = (arch != Arch::Mlp).then(|| {
            let e = EMBED_WIDTH;
            [
                bld.uniform("attention.q", vec![AGENT_WIDTH, e], AGENT_WIDTH, 1.0),
                bld.uniform("attention.k", vec![e, e], e, 1.0),
                bld.uniform("attention.v", vec![e, e], e, 1.0),
            ]
        });
        let head = [
            bld.dense("head.0", AGENT_WIDTH + EMBED_WIDTH, HEAD_WIDTH, g),
            bld.dense("head.1", HEAD_WIDTH, HEAD_WIDTH, g),
        ];
        let (conv, fusion) = if arch == Arch::Joint {
            let conv = [
                bld.conv("map.conv0", 2, CONV_CHANNELS[0], g),
                bld.conv("map.conv1", CONV_CHANNELS[0], CONV_CHANNELS[1], g),
            ];
            let fusion = bld.dense("fusion.0", HEAD_WIDTH + conv_out, HEAD_WIDTH, g);
            (Some(conv), Some(fusion))
        } else {
            (None, None)
        };
        let out = bld.dense("out", HEAD_WIDTH, out_dim, out_gain);
        Ok(Self {
            arch,
            n_landmarks,
            map_dims,
            out_dim,
            params: bld.params,
            layout: Layout {
                agent,
                lm,
                qkv,
                head,
                conv,
                fusion,
                out,
            },
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Whether landmark rows are put in canonical order before the network.
    pub fn sorts_landmarks(&self) -> bool {
        self.arch != Arch::Mlp
    }

    /// Registers every parameter on `tape`, trainable or frozen.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    tape.param(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect()
    }

    /// Output `[B, out_dim]`.
    pub fn forward(&self, tape: &mut Tape, p: &[Var], f: &Features) -> Result<Var> {
        Ok(self.forward_parts(tape, p, f)?.0)
    }

    /// Output together with the `[B, n_l]` attention weights (attention and joint only).
    pub fn forward_parts(&self, tape: &mut Tape, p: &[Var], f: &Features) -> Result<(Var, Option<Var>)> {
        if p.len() != self.params.len() {
            return Err(Error::Contract(format!(
                "{} bound parameters for a network with {}",
                p.len(),
                self.params.len()
            )));
        }
        let b = f.batch;
        let n = self.n_landmarks;
        if f.landmarks.shape() != [b * n, 4] || f.agent.shape() != [b, 2] {
            return Err(Error::Dimension(format!(
                "features {:?}/{:?} do not match {n} landmarks",
                f.agent.shape(),
                f.landmarks.shape()
            )));
        }
        let l = &self.layout;
        let x = tape.constant(f.agent.clone());
        let ex = dense(tape, x, l.agent[0], p, Act::Tanh);
        let ex = dense(tape, ex, l.agent[1], p, Act::Tanh);

        let (summary, weights) = match l.qkv {
            Some([q, k, v]) => {
                let rows = tape.constant(f.landmarks.clone());
                let h = dense(tape, rows, l.lm[0], p, Act::Tanh);
                let e = dense(tape, h, l.lm[1], p, Act::Tanh);
                let query = tape.matmul(ex, p[q]);
                let key = tape.matmul(e, p[k]);
                let value = tape.matmul(e, p[v]);
                let repeat: Vec<usize> = (0..b).flat_map(|i| std::iter::repeat_n(i, n)).collect();
                let query = tape.gather_rows(query, &repeat);
                let prod = tape.mul(query, key);
                let scores = tape.reduce_sum(prod, Some(1));
                let scores = tape.reshape(scores, vec![b, n]);
                let scores = tape.scale(scores, 1.0 / (EMBED_WIDTH as f64).sqrt());
                let w = tape.softmax(scores);
                let wcol = tape.reshape(w, vec![b * n, 1]);
                let ones = tape.constant(Tensor::full(vec![1, EMBED_WIDTH], 1.0));
                let wide = tape.matmul(wcol, ones);
                let weighted = tape.mul(wide, value);
                let weighted = tape.reshape(weighted, vec![b, n, EMBED_WIDTH]);
                (tape.reduce_sum(weighted, Some(1)), Some(w))
            }
            None => {
                let flat = tape.constant(f.landmarks.clone());
                let flat = tape.reshape(flat, vec![b, 4 * n]);
                let h = dense(tape, flat, l.lm[0], p, Act::Tanh);
                (dense(tape, h, l.lm[1], p, Act::Tanh), None)
            }
        };
        let joined = tape.concat(&[ex, summary]);
        let h = dense(tape, joined, l.head[0], p, Act::Tanh);
        let mut h = dense(tape, h, l.head[1], p, Act::Tanh);

        if let (Some(conv), Some(fusion)) = (l.conv, l.fusion) {
            let map = f
                .map
                .as_ref()
                .ok_or_else(|| Error::Dimension("joint network needs map features".into()))?;
            let expected = self.map_dims.map(|[mh, mw]| vec![b, 2, mh, mw]);
            if Some(map.shape().to_vec()) != expected {
                return Err(Error::Dimension(format!(
                    "map features {:?}, expected {expected:?}",
                    map.shape()
                )));
            }
            let img = tape.constant(map.clone());
            let c = tape.conv2d(img, p[conv[0].w], p[conv[0].b], Padding::Valid);
            let c = tape.relu(c);
            let c = tape.conv2d(c, p[conv[1].w], p[conv[1].b], Padding::Valid);
            let c = tape.relu(c);
            let c = tape.flatten(c);
            let fused = tape.concat(&[h, c]);
            h = dense(tape, fused, fusion, p, Act::Tanh);
        }
        Ok((dense(tape, h, l.out, p, Act::Linear), weights))
    }

    /// Plain inference without gradients; returns `[B, out_dim]` row-major.
    pub fn predict(&self, f: &Features) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape, false);
        let out = self.forward(&mut tape, &p, f)?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Attention weights `[B, n_l]` for the given features.
    pub fn attention_weights(&self, f: &Features) -> Result<Option<Vec<f64>>> {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape, false);
        let (_, w) = self.forward_parts(&mut tape, &p, f)?;
        Ok(w.map(|w| tape.value(w).data().to_vec()))
    }

    /// Replaces parameter values, checking names and shapes against the layout.
    pub fn load_params(&mut self, values: Vec<NamedParam>) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "{} parameter blocks, architecture needs {}",
                values.len(),
                self.params.len()
            )));
        }
        for (have, new) in self.params.iter().zip(&values) {
            if have.name != new.name || have.value.shape() != new.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "block {} {:?} does not match expected {} {:?}",
                    new.name,
                    new.value.shape(),
                    have.name,
                    have.value.shape()
                )));
            }
        }
        self.params = values;
        Ok(())
    }
}

fn dense(tape: &mut Tape, x: Var, d: Dense, p: &[Var], act: Act) -> Var {
    let y = tape.affine(x, p[d.w], p[d.b]);
    match act {
        Act::Tanh => tape.tanh(y),
        Act::Linear => y,
    }
}
