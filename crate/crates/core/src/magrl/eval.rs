use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::policy::{act, ActionMode};
use super::trainer::{charging_reward, Model};
use crate::config::WorldConfig;
use crate::env::{Environment, TrajectoryLog};
use crate::error::{CheckpointError, Error, NnError, Result};
use crate::scenario::Scenario;

/// Outcome of one deterministic rollout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub seed: u64,
    pub device_final: Vec<f64>,
    pub device_reached: Vec<bool>,
    pub uav_residual: Vec<f64>,
    pub uav_reserve_kept: Vec<bool>,
    pub h_total: u64,
    pub r_ac: f64,
    pub pen0: u64,
    pub pen1: u64,
    #[serde(skip)]
    pub trajectory: TrajectoryLog,
}

impl EvalReport {
    /// Every device reached the threshold and every UAV kept its reserve.
    pub fn success(&self) -> bool {
        self.h_total == 0 && self.device_reached.iter().all(|&r| r) && self.uav_reserve_kept.iter().all(|&k| k)
    }
}

/// Rolls out the mean action of every policy for one episode.
pub fn evaluate(model: &Model, cfg: &WorldConfig, scenario: &Scenario, seed: u64) -> Result<EvalReport> {
    if model.agents.len() != scenario.uavs {
        return Err(CheckpointError::Mismatch(format!("{} agents for {} UAVs", model.agents.len(), scenario.uavs)).into());
    }
    if model.obs_dim() != scenario.obs_dim() {
        return Err(CheckpointError::Mismatch(format!(
            "observation length {} for a scenario needing {}",
            model.obs_dim(),
            scenario.obs_dim()
        ))
        .into());
    }
    let mut env = Environment::new(cfg, scenario, charging_reward(model.variant))?;
    env.record_trajectory(true);
    let mut obs = env.reset(seed);
    // unused by the deterministic policy
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut reward, mut pen0, mut pen1) = (0.0, 0u64, 0u64);
    while !env.is_done() {
        let actions = model
            .agents
            .iter()
            .zip(&obs)
            .map(|(a, o)| act(&a.policy, o, ActionMode::Deterministic, cfg.mdp.v_max, &mut rng).map(|p| p.action))
            .collect::<Result<Vec<_>, NnError>>()?;
        let out = env.step(&actions)?;
        reward += out.rewards.iter().sum::<f64>();
        pen0 += out.penalties.iter().filter(|p| p[0]).count() as u64;
        pen1 += out.penalties.iter().filter(|p| p[1]).count() as u64;
        obs = out.observations;
    }
    let st = env.state();
    let device_final: Vec<f64> = st.dev_batt.iter().map(|b| b.level).collect();
    let uav_residual: Vec<f64> = st.uav_batt.iter().map(|b| b.level).collect();
    Ok(EvalReport {
        seed,
        device_reached: st.dev_batt.iter().map(|b| b.satisfied()).collect(),
        uav_reserve_kept: uav_residual.iter().map(|&l| l >= cfg.uav.battery_reserve).collect(),
        device_final,
        uav_residual,
        h_total: env.h_total(),
        r_ac: reward / scenario.uavs as f64,
        pen0,
        pen1,
        trajectory: env.take_trajectory().ok_or_else(|| Error::Diverged("trajectory recording lost".into()))?,
    })
}
