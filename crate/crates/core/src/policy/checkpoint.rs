//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"IGCK"            magic
//! u32                format version (1)
//! u64                header length in bytes
//! [u8; header len]   JSON header (see `CheckpointHeader`)
//! f64 * n            parameter blocks, in header order, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use infogain_autodiff::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{Arch, FeatureSpec, NamedParam, AGENT_WIDTH, CONV_CHANNELS, EMBED_WIDTH, HEAD_WIDTH, LANDMARK_HIDDEN};
use super::ppo::{ActorCritic, PpoConfig};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"IGCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Widths {
    pub agent: usize,
    pub landmark_hidden: usize,
    pub embed: usize,
    pub head: usize,
    pub conv_channels: [usize; 2],
}

impl Widths {
    pub fn current() -> Self {
        Self {
            agent: AGENT_WIDTH,
            landmark_hidden: LANDMARK_HIDDEN,
            embed: EMBED_WIDTH,
            head: HEAD_WIDTH,
            conv_channels: CONV_CHANNELS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub arch: String,
    pub n_landmarks: usize,
    pub map_dims: Option<[usize; 2]>,
    pub shared_network: bool,
    pub widths: Widths,
    pub features: FeatureSpec,
    /// Free-form provenance, e.g. scenario, method, seed, env steps.
    pub meta: serde_json::Map<String, serde_json::Value>,
    pub blocks: Vec<BlockInfo>,
}

pub fn to_bytes(policy: &ActorCritic, meta: serde_json::Map<String, serde_json::Value>) -> Result<Vec<u8>> {
    let blocks = policy.named_blocks();
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        arch: policy.arch().tag().to_string(),
        n_landmarks: policy.features.n_landmarks,
        map_dims: policy.features.map_dims,
        shared_network: policy.critic.is_none(),
        widths: Widths::current(),
        features: policy.features.clone(),
        meta,
        blocks: blocks
            .iter()
            .map(|b| BlockInfo {
                name: b.name.clone(),
                shape: b.value.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * policy.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for b in &blocks {
        for v in b.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<(ActorCritic, CheckpointHeader)> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)
        .map_err(|_| Error::Checkpoint("truncated version".into()))?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)
        .map_err(|_| Error::Checkpoint("truncated header length".into()))?;
    let len = u64::from_le_bytes(len) as usize;
    if r.len() < len {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&r[..len])?;
    r = &r[len..];
    if header.widths != Widths::current() {
        return Err(Error::Checkpoint(format!(
            "layer widths {:?} differ from this build",
            header.widths
        )));
    }
    let arch = Arch::from_tag(&header.arch)?;
    let ppo = PpoConfig {
        shared_network: header.shared_network,
        ..PpoConfig::default()
    };
    let mut policy = ActorCritic::new(arch, header.features.clone(), &ppo, &mut ChaCha8Rng::seed_from_u64(0))?;

    let mut blocks = Vec::with_capacity(header.blocks.len());
    for info in &header.blocks {
        let n: usize = info.shape.iter().product();
        if r.len() < 8 * n {
            return Err(Error::Checkpoint(format!("truncated data for block {}", info.name)));
        }
        let data: Vec<f64> = r[..8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        r = &r[8 * n..];
        blocks.push(NamedParam {
            name: info.name.clone(),
            value: Tensor::new(info.shape.clone(), data),
        });
    }
    if !r.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.len())));
    }
    let strip = |prefix: &str, blocks: &[NamedParam]| -> Vec<NamedParam> {
        blocks
            .iter()
            .filter_map(|b| {
                b.name.strip_prefix(prefix).map(|n| NamedParam {
                    name: n.to_string(),
                    value: b.value.clone(),
                })
            })
            .collect()
    };
    policy.actor.load_params(strip("actor.", &blocks))?;
    if let Some(critic) = policy.critic.as_mut() {
        critic.load_params(strip("critic.", &blocks))?;
    }
    let log_std = blocks
        .iter()
        .find(|b| b.name == "log_std" && b.value.shape() == [2])
        .ok_or_else(|| Error::Checkpoint("missing log_std block".into()))?;
    policy.log_std = [log_std.value.data()[0], log_std.value.data()[1]];
    if policy.named_blocks().len() != blocks.len() {
        return Err(Error::Checkpoint("unexpected extra parameter blocks".into()));
    }
    Ok((policy, header))
}

pub fn save(path: &Path, policy: &ActorCritic, meta: serde_json::Map<String, serde_json::Value>) -> Result<()> {
    let bytes = to_bytes(policy, meta)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(ActorCritic, CheckpointHeader)> {
    from_bytes(&std::fs::read(path)?)
}
