//! Fast sanity checks that run in a couple of seconds from the CLI.

use serde::Serialize;

use crate::belief::{logdet_gain, LandmarkBelief};
use crate::env::{Episode, Scenario, WorldConfig};
use crate::error::Result;
use crate::fov::{soft_visibility_weight, BodyFramePoint, FieldOfView};
use crate::icr::{instance_for_seed, objective_and_grad};
use crate::policy::checkpoint;
use crate::policy::ppo::stream_rng;
use crate::policy::{ActorCritic, Arch, FeatureSpec, PpoConfig};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

pub fn run() -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let fov = FieldOfView::circle(2.0, 0.5)?;
    let w_center = soft_visibility_weight(&BodyFramePoint([0.0, 0.0]), &fov);
    let w_edge = soft_visibility_weight(&BodyFramePoint([2.0, 0.0]), &fov);
    out.push(check(
        "soft_weight",
        (w_edge - 0.997_661_132_509_476_5).abs() < 1e-12 && w_center > w_edge,
        format!("w(0)={w_center:.12} w(r)={w_edge:.12}"),
    ));

    let b = LandmarkBelief::new(vec![0.0; 4], vec![1.0; 4])?;
    let b = b.soft_info_update(&[1.0, 0.5], 4.0)?;
    let gain = logdet_gain(&b.info_soft, &[1.0; 4])?;
    let expect = 2.0 * (5f64.ln() + 3f64.ln());
    out.push(check(
        "logdet_gain",
        (gain - expect).abs() < 1e-12,
        format!("{gain:.12}"),
    ));

    let world = WorldConfig::scenario(Scenario::Landmarks3);
    let (mut a, _) = Episode::reset(&world, 11)?;
    let (mut b, _) = Episode::reset(&world, 11)?;
    let mut same = true;
    while !a.done() {
        let ra = a.step([0.7, -0.3])?;
        let rb = b.step([0.7, -0.3])?;
        same &= ra.reward.to_bits() == rb.reward.to_bits() && ra.observation == rb.observation;
    }
    out.push(check("env_determinism", same, format!("{} steps", world.episode_len)));

    let policy = ActorCritic::new(
        Arch::Attention,
        FeatureSpec::from_world(&world),
        &PpoConfig::default(),
        &mut stream_rng(3, 0),
    )?;
    let bytes = checkpoint::to_bytes(&policy, Default::default())?;
    let (back, _) = checkpoint::from_bytes(&bytes)?;
    out.push(check(
        "checkpoint_round_trip",
        back.named_blocks() == policy.named_blocks(),
        format!("{} bytes", bytes.len()),
    ));

    let inst = instance_for_seed(&world, 5)?;
    let u: Vec<[f64; 2]> = (0..world.episode_len).map(|k| [0.3 * k as f64 - 1.0, 0.5]).collect();
    let (_, g) = objective_and_grad(&u, &inst, &world, true)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..u.len() {
        for c in 0..2 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[k][c] += h;
            dn[k][c] -= h;
            let fd = (objective_and_grad(&up, &inst, &world, false)?.0
                - objective_and_grad(&dn, &inst, &world, false)?.0)
                / (2.0 * h);
            worst = worst.max((fd - g[k][c]).abs() / fd.abs().max(1.0));
        }
    }
    out.push(check("icr_gradient", worst < 1e-5, format!("max rel err {worst:.2e}")));

    Ok(out)
}
