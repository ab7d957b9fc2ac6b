//! The multi-UAV WET environment.
//!
//! One [`Environment::step`] plays a slot in a fixed order:
//!
//! 1. candidate positions from `(V, phi)`, speed clamped to `V_max`;
//! 2. distance and area penalties on the candidates, then positions clamped
//!    into the area;
//! 3. WET switched off for any UAV whose battery cannot fund the slot;
//! 4. device harvest at the start-of-slot positions, then device and UAV
//!    battery updates;
//! 5. HoE update;
//! 6. rewards.

mod reward;
mod similarity;
mod trajectory;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use reward::{charging_terms, effective_wet_weights, penalty_terms, rewards, ChargingReward, RewardInputs, RewardWeights};
pub use similarity::{similarity, SimilarityMatrix};
pub use trajectory::{DeviceRecord, TrajectoryLog, UavRecord};

use crate::channel::{avg_channel_gain, ChannelParams, Position3};
use crate::config::WorldConfig;
use crate::energy::{harvest_dc_power, DeviceBattery, HarvesterParams, PropulsionParams, UavBattery};
use crate::error::{ConfigError, EnvError};
use crate::hoe::{unsatisfied_set, HoeState};
use crate::scenario::Scenario;

/// Decision of one UAV for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentAction {
    /// Horizontal speed, m/s. Values above `V_max` are clamped.
    pub speed: f64,
    /// Heading in radians.
    pub heading: f64,
    pub wet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub slot: usize,
    pub uav_pos: Vec<Position3>,
    pub uav_batt: Vec<UavBattery>,
    pub dev_batt: Vec<DeviceBattery>,
    pub hoe: HoeState,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Per-UAV `[distance, area]` violation flags of the candidate positions.
    pub penalties: Vec<[bool; 2]>,
    pub harvested: Vec<f64>,
    /// WET flags after the battery check.
    pub wet: Vec<bool>,
    /// Speed actually flown, after the area clamp.
    pub speeds: Vec<f64>,
    pub wet_weights: Vec<f64>,
    pub unsatisfied: Vec<usize>,
    pub done: bool,
}

pub struct Environment {
    cfg: WorldConfig,
    scenario: Scenario,
    channel: ChannelParams,
    propulsion: PropulsionParams,
    harvester: HarvesterParams,
    devices: Vec<Position3>,
    charging: ChargingReward,
    state: EnvState,
    log: Option<TrajectoryLog>,
}

impl Environment {
    pub fn new(cfg: &WorldConfig, scenario: &Scenario, charging: ChargingReward) -> Result<Self, ConfigError> {
        cfg.validate()?;
        scenario.validate()?;
        let devices = scenario.devices.iter().map(|&[x, y]| Position3::ground(x, y)).collect();
        let placeholder = EnvState {
            slot: 0,
            uav_pos: Vec::new(),
            uav_batt: Vec::new(),
            dev_batt: Vec::new(),
            hoe: HoeState::new(&[], cfg.device.threshold, scenario.horizon),
            seed: 0,
        };
        let mut env = Self {
            cfg: cfg.clone(),
            scenario: scenario.clone(),
            channel: cfg.channel.params(),
            propulsion: cfg.propulsion.params(),
            harvester: cfg.harvester.params(),
            devices,
            charging,
            state: placeholder,
            log: None,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn devices(&self) -> &[Position3] {
        &self.devices
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn harvester(&self) -> &HarvesterParams {
        &self.harvester
    }

    pub fn propulsion(&self) -> &PropulsionParams {
        &self.propulsion
    }

    pub fn num_agents(&self) -> usize {
        self.scenario.uavs
    }

    pub fn obs_dim(&self) -> usize {
        self.scenario.obs_dim()
    }

    pub fn horizon(&self) -> usize {
        self.scenario.horizon
    }

    pub fn is_done(&self) -> bool {
        self.state.slot >= self.scenario.horizon
    }

    /// Starts a new episode. UAVs start uniformly in the area with full
    /// batteries; devices draw their initial level uniformly from the
    /// configured range.
    pub fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.cfg.channel.altitude;
        let uav_pos = (0..self.scenario.uavs)
            .map(|_| {
                let x = rng.random::<f64>() * self.scenario.width;
                let y = rng.random::<f64>() * self.scenario.length;
                Position3::new(x, y, h)
            })
            .collect();
        let uav_batt = vec![UavBattery::full(self.cfg.uav.battery_capacity, self.cfg.uav.battery_reserve); self.scenario.uavs];
        let d = &self.cfg.device;
        let dev_batt: Vec<DeviceBattery> = (0..self.devices.len())
            .map(|_| DeviceBattery {
                level: d.initial_min + rng.random::<f64>() * (d.initial_max - d.initial_min),
                capacity: d.battery_capacity,
                threshold: d.threshold,
            })
            .collect();
        let levels: Vec<f64> = dev_batt.iter().map(|b| b.level).collect();
        let hoe = HoeState::new(&levels, d.threshold, self.scenario.horizon);
        self.state = EnvState { slot: 0, uav_pos, uav_batt, dev_batt, hoe, seed };
        if self.log.is_some() {
            self.log = Some(TrajectoryLog::default());
        }
        self.observations()
    }

    /// Overwrites the UAV positions of the current state. Intended for
    /// constructing test situations.
    pub fn place_uavs(&mut self, xy: &[[f64; 2]]) {
        let h = self.cfg.channel.altitude;
        self.state.uav_pos = xy.iter().map(|&[x, y]| Position3::new(x, y, h)).collect();
    }

    /// Overwrites device battery levels and re-derives their initial HoE.
    pub fn set_device_levels(&mut self, levels: &[f64]) {
        for (b, &l) in self.state.dev_batt.iter_mut().zip(levels) {
            b.level = l;
        }
        self.state.hoe = HoeState::new(levels, self.cfg.device.threshold, self.scenario.horizon);
    }

    pub fn set_uav_levels(&mut self, levels: &[f64]) {
        for (b, &l) in self.state.uav_batt.iter_mut().zip(levels) {
            b.level = l;
        }
    }

    /// Enables trajectory recording from the current slot on.
    pub fn record_trajectory(&mut self, on: bool) {
        self.log = on.then(TrajectoryLog::default);
    }

    pub fn take_trajectory(&mut self) -> Option<TrajectoryLog> {
        let log = self.log.take();
        if log.is_some() {
            self.log = Some(TrajectoryLog::default());
        }
        log
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.scenario.uavs).map(|u| self.observation(u)).collect()
    }

    /// `(x, y, H_1..H_I, B_1..B_I, B_u)`, each scaled to order one.
    pub fn observation(&self, u: usize) -> Vec<f64> {
        let s = &self.state;
        let pos_scale = self.scenario.width.max(self.scenario.length);
        let horizon = self.scenario.horizon as f64;
        let mut o = Vec::with_capacity(self.obs_dim());
        o.push(s.uav_pos[u].x / pos_scale);
        o.push(s.uav_pos[u].y / pos_scale);
        o.extend(s.hoe.levels.iter().map(|&h| f64::from(h) / horizon));
        o.extend(s.dev_batt.iter().map(|b| b.level / b.capacity));
        o.push(s.uav_batt[u].level / s.uav_batt[u].capacity);
        o
    }

    pub fn similarity(&self) -> SimilarityMatrix {
        similarity(&self.state.uav_pos, self.cfg.mdp.kernel_width_sq)
    }

    /// Devices currently below the threshold.
    pub fn unsatisfied_now(&self) -> Vec<usize> {
        let levels: Vec<f64> = self.state.dev_batt.iter().map(|b| b.level).collect();
        unsatisfied_set(&levels, &vec![0.0; levels.len()], self.cfg.device.threshold)
    }

    /// `H_total` over the slots played so far, counting the devices that are
    /// unsatisfied now.
    pub fn h_total(&self) -> u64 {
        self.state.hoe.h_total_running(&self.unsatisfied_now())
    }

    pub fn reward_weights(&self) -> RewardWeights {
        let m = &self.cfg.mdp;
        RewardWeights { xi0: m.xi0, xi1: m.xi1, xi2: m.xi2, shared_penalty: m.shared_penalty, energy_unit: m.reward_energy_unit }
    }

    pub fn step(&mut self, actions: &[AgentAction]) -> Result<StepOutcome, EnvError> {
        let horizon = self.scenario.horizon;
        if self.state.slot >= horizon {
            return Err(EnvError::EpisodeFinished(self.state.slot));
        }
        let n_uav = self.scenario.uavs;
        if actions.len() != n_uav {
            return Err(EnvError::ActionCount { expected: n_uav, got: actions.len() });
        }
        for (u, a) in actions.iter().enumerate() {
            if !(a.speed.is_finite() && a.speed >= 0.0 && a.heading.is_finite()) {
                return Err(EnvError::InvalidAction { uav: u, reason: format!("speed {} heading {}", a.speed, a.heading) });
            }
        }
        let mdp = &self.cfg.mdp;
        let dt = mdp.slot;
        let (w_max, l_max) = (self.scenario.width, self.scenario.length);
        let prev_pos = self.state.uav_pos.clone();

        // (1) candidates
        let candidates: Vec<Position3> = prev_pos
            .iter()
            .zip(actions)
            .map(|(q, a)| {
                let step = a.speed.min(mdp.v_max) * dt;
                Position3::new(q.x + step * a.heading.cos(), q.y + step * a.heading.sin(), q.z)
            })
            .collect();

        // (2) penalties on candidates, then clamp into the area
        let d_min_sq = mdp.d_min * mdp.d_min;
        let penalties: Vec<[bool; 2]> = (0..n_uav)
            .map(|u| {
                let c = &candidates[u];
                let too_close = (0..n_uav).any(|v| v != u && c.horizontal_dist_sq(&candidates[v]) < d_min_sq);
                let outside = !(0.0..=w_max).contains(&c.x) || !(0.0..=l_max).contains(&c.y);
                [too_close, outside]
            })
            .collect();
        let next_pos: Vec<Position3> =
            candidates.iter().map(|c| Position3::new(c.x.clamp(0.0, w_max), c.y.clamp(0.0, l_max), c.z)).collect();
        let speeds: Vec<f64> = prev_pos.iter().zip(&next_pos).map(|(a, b)| a.horizontal_dist_sq(b).sqrt() / dt).collect();

        // (3) WET only if the battery funds the whole slot
        let tx = self.cfg.uav.tx_power;
        let wet: Vec<bool> = (0..n_uav)
            .map(|u| {
                actions[u].wet && self.state.uav_batt[u].level >= UavBattery::slot_draw(speeds[u], true, tx, dt, &self.propulsion)
            })
            .collect();

        // (4) harvest at the positions held during the slot
        let n_dev = self.devices.len();
        let gains: Vec<Vec<f64>> =
            prev_pos.iter().map(|q| self.devices.iter().map(|d| avg_channel_gain(q, d, &self.channel)).collect()).collect();
        let mut harvested = vec![0.0; n_dev];
        let mut solo = vec![vec![0.0; n_dev]; n_uav];
        for i in 0..n_dev {
            let rf: f64 = (0..n_uav).filter(|&u| wet[u]).map(|u| tx * gains[u][i]).sum();
            harvested[i] = harvest_dc_power(rf, &self.harvester) * dt;
            for u in (0..n_uav).filter(|&u| wet[u]) {
                solo[u][i] = harvest_dc_power(tx * gains[u][i], &self.harvester) * dt;
            }
        }
        let wet_weights = effective_wet_weights(&solo, &harvested);

        let dev_before: Vec<f64> = self.state.dev_batt.iter().map(|b| b.level).collect();
        let unsatisfied = unsatisfied_set(&dev_before, &harvested, self.cfg.device.threshold);
        let dev_batt: Vec<DeviceBattery> = self.state.dev_batt.iter().zip(&harvested).map(|(b, &e)| b.step(e)).collect();
        let uav_batt: Vec<UavBattery> =
            (0..n_uav).map(|u| self.state.uav_batt[u].step(speeds[u], wet[u], tx, dt, &self.propulsion)).collect();
        let dev_after: Vec<f64> = dev_batt.iter().map(|b| b.level).collect();
        let uav_after: Vec<f64> = uav_batt.iter().map(|b| b.level).collect();

        // (5) HoE; keep the start-of-slot values for the reward
        let hoe_before = self.state.hoe.levels.clone();
        if let Some(log) = self.log.as_mut() {
            let t = self.state.slot;
            for u in 0..n_uav {
                log.uavs.push(UavRecord {
                    t,
                    uav: u,
                    x: prev_pos[u].x,
                    y: prev_pos[u].y,
                    v: speeds[u],
                    phi: actions[u].heading,
                    c: u8::from(wet[u]),
                    battery: self.state.uav_batt[u].level,
                });
            }
            for i in 0..n_dev {
                log.devices.push(DeviceRecord { t, device: i, battery: dev_before[i], hoe: hoe_before[i], e_har: harvested[i] });
            }
        }
        self.state.hoe.advance(&harvested, &dev_after);

        // (6) rewards
        let inputs = RewardInputs {
            wet_weights: &wet_weights,
            dev_before: &dev_before,
            dev_after: &dev_after,
            hoe: &hoe_before,
            unsatisfied: &unsatisfied,
            uav_after: &uav_after,
            uav_reserve: self.cfg.uav.battery_reserve,
            penalties: &penalties,
        };
        let rewards = rewards(&inputs, &self.reward_weights(), self.charging);

        self.state.uav_pos = next_pos;
        self.state.uav_batt = uav_batt;
        self.state.dev_batt = dev_batt;
        self.state.slot += 1;
        let done = self.state.slot >= horizon;

        if done {
            if let Some(log) = self.log.as_mut() {
                let t = self.state.slot;
                for (u, q) in self.state.uav_pos.iter().enumerate() {
                    log.uavs.push(UavRecord {
                        t,
                        uav: u,
                        x: q.x,
                        y: q.y,
                        v: 0.0,
                        phi: 0.0,
                        c: 0,
                        battery: self.state.uav_batt[u].level,
                    });
                }
                for (i, b) in self.state.dev_batt.iter().enumerate() {
                    log.devices.push(DeviceRecord { t, device: i, battery: b.level, hoe: self.state.hoe.levels[i], e_har: 0.0 });
                }
            }
        }

        Ok(StepOutcome {
            observations: self.observations(),
            rewards,
            penalties,
            harvested,
            wet,
            speeds,
            wet_weights,
            unsatisfied,
            done,
        })
    }
}
