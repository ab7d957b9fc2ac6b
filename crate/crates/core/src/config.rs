//! World and training configuration.
//!
//! The on-disk format is TOML with one table per subsystem. Every key is
//! optional and falls back to the shipped defaults; unknown keys are
//! rejected. Power levels are written in dBm / dB and converted to linear
//! units when an [`crate::env::Environment`] is built.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::energy::{HarvesterParams, LogisticCurve, PropulsionParams};
use crate::error::ConfigError;
use crate::scenario::Scenario;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub los_a: f64,
    pub los_b: f64,
    /// Channel gain at 1 m, dB.
    pub ref_gain_db: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    /// UAV flight altitude `h_fix`, m.
    pub altitude: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { los_a: 12.08, los_b: 0.11, ref_gain_db: 0.0, los_exponent: 3.0, nlos_exponent: 5.0, altitude: 5.0 }
    }
}

impl ChannelConfig {
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            los_a: self.los_a,
            los_b: self.los_b,
            ref_gain: db_to_linear(self.ref_gain_db),
            los_exponent: self.los_exponent,
            nlos_exponent: self.nlos_exponent,
            altitude: self.altitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropulsionConfig {
    pub blade_profile_power: f64,
    pub induced_power: f64,
    pub tip_speed: f64,
    pub induced_velocity: f64,
    pub fuselage_drag_ratio: f64,
    pub rotor_solidity: f64,
    pub air_density: f64,
    pub rotor_disc_area: f64,
}

impl Default for PropulsionConfig {
    fn default() -> Self {
        Self {
            blade_profile_power: 79.86,
            induced_power: 88.63,
            tip_speed: 120.0,
            induced_velocity: 4.03,
            fuselage_drag_ratio: 0.6,
            rotor_solidity: 0.05,
            air_density: 1.225,
            rotor_disc_area: 0.503,
        }
    }
}

impl PropulsionConfig {
    pub fn params(&self) -> PropulsionParams {
        PropulsionParams {
            blade_profile_power: self.blade_profile_power,
            induced_power: self.induced_power,
            tip_speed: self.tip_speed,
            induced_velocity: self.induced_velocity,
            fuselage_drag_ratio: self.fuselage_drag_ratio,
            rotor_solidity: self.rotor_solidity,
            air_density: self.air_density,
            rotor_disc_area: self.rotor_disc_area,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarvesterConfig {
    pub sensitivity_dbm: f64,
    pub saturation_dbm: f64,
    /// RF-to-DC efficiency reached at saturation.
    pub peak_efficiency: f64,
    /// Logistic slope, 1/W.
    pub steepness: f64,
    /// Logistic midpoint, W.
    pub midpoint: f64,
}

impl Default for HarvesterConfig {
    fn default() -> Self {
        Self { sensitivity_dbm: -10.0, saturation_dbm: 7.0, peak_efficiency: 0.55, steepness: 6000.0, midpoint: 2.5e-3 }
    }
}

impl HarvesterConfig {
    pub fn params(&self) -> HarvesterParams {
        let saturation = dbm_to_watts(self.saturation_dbm);
        HarvesterParams {
            sensitivity: dbm_to_watts(self.sensitivity_dbm),
            saturation,
            curve: LogisticCurve::fit(saturation, self.peak_efficiency, self.steepness, self.midpoint),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavConfig {
    /// WET transmit power `P_u`, W.
    pub tx_power: f64,
    pub battery_capacity: f64,
    /// Residual energy required for the return flight, W·s.
    pub battery_reserve: f64,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self { tx_power: 1.0, battery_capacity: 140_000.0, battery_reserve: 20_000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub battery_capacity: f64,
    pub threshold: f64,
    pub initial_min: f64,
    pub initial_max: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self { battery_capacity: 20e-3, threshold: 10e-3, initial_min: 2e-3, initial_max: 5e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpConfig {
    /// Slot length, s.
    pub slot: f64,
    pub v_max: f64,
    /// Minimum inter-UAV distance, m.
    pub d_min: f64,
    pub xi0: f64,
    pub xi1: f64,
    pub xi2: f64,
    /// Gaussian kernel width of the similarity matrix.
    pub kernel_width_sq: f64,
    /// Every agent is charged for all constraint violations when true,
    /// only for its own otherwise.
    pub shared_penalty: bool,
    /// Energy unit (W·s) in which device battery increments enter the
    /// charging reward.
    pub reward_energy_unit: f64,
}

impl Default for MdpConfig {
    fn default() -> Self {
        Self {
            slot: 1.0,
            v_max: 20.0,
            d_min: 5.0,
            xi0: 0.25,
            xi1: 1.0,
            xi2: 1e-5,
            kernel_width_sq: 100.0,
            shared_penalty: true,
            reward_energy_unit: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// HoE-weighted reward with global guidance.
    Magrl,
    /// Reward without HoE weighting.
    MagrlHoe,
    /// No global networks.
    MagrlG,
    MagrlHoeG,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Magrl, Variant::MagrlHoe, Variant::MagrlG, Variant::MagrlHoeG];

    pub fn uses_hoe(self) -> bool {
        matches!(self, Variant::Magrl | Variant::MagrlG)
    }

    pub fn uses_global(self) -> bool {
        matches!(self, Variant::Magrl | Variant::MagrlHoe)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Magrl => "magrl",
            Variant::MagrlHoe => "magrl-hoe",
            Variant::MagrlG => "magrl-g",
            Variant::MagrlHoeG => "magrl-hoe-g",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown variant `{s}` (expected magrl, magrl-hoe, magrl-g, magrl-hoe-g)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetEntropy {
    /// `-|a|`, the usual SAC choice.
    NegActionDim,
    /// `|s_u|`, the observation length.
    StateDim,
    /// An explicit value, written `{ fixed = -1.5 }`.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalReward {
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub gamma: f64,
    /// Weight of the local target against the global Q-value.
    pub epsilon: f64,
    /// Soft-update retention factor.
    pub tau: f64,
    pub lr: f64,
    pub lr_policy: f64,
    pub lr_alpha: f64,
    pub buffer_capacity: usize,
    pub minibatch: usize,
    pub hidden_width: usize,
    pub episodes: usize,
    pub grad_clip: f64,
    pub init_alpha: f64,
    pub target_entropy: TargetEntropy,
    pub optimizer: OptimizerKind,
    /// Include the tanh change-of-variables term in log-probabilities.
    pub squash_correction: bool,
    pub global_reward: GlobalReward,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Magrl,
            gamma: 0.985,
            epsilon: 0.8,
            tau: 0.999,
            lr: 2e-4,
            lr_policy: 3e-4,
            lr_alpha: 2e-4,
            buffer_capacity: 1 << 17,
            minibatch: 128,
            hidden_width: 256,
            episodes: 300,
            grad_clip: 10.0,
            init_alpha: 0.1,
            target_entropy: TargetEntropy::NegActionDim,
            optimizer: OptimizerKind::Adam,
            squash_correction: true,
            global_reward: GlobalReward::Mean,
        }
    }
}

impl TrainConfig {
    /// Local/global mixing weight actually used: variants without global
    /// training always run with epsilon = 1.
    pub fn effective_epsilon(&self) -> f64 {
        if self.variant.uses_global() {
            self.epsilon
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::OutOfRange(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("train.gamma must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("train.epsilon must lie in (0, 1]");
        }
        if !(self.tau >= 0.0 && self.tau < 1.0) {
            return bad("train.tau must lie in [0, 1)");
        }
        if !(self.lr > 0.0 && self.lr_policy > 0.0 && self.lr_alpha > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.minibatch == 0 || self.buffer_capacity < self.minibatch {
            return bad("train.buffer_capacity must hold at least one minibatch");
        }
        if self.hidden_width == 0 {
            return bad("train.hidden_width must be positive");
        }
        if !(self.grad_clip > 0.0) {
            return bad("train.grad_clip must be positive");
        }
        if !(self.init_alpha > 0.0) {
            return bad("train.init_alpha must be positive");
        }
        Ok(())
    }
}

/// Every physical, MDP and learning constant of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub channel: ChannelConfig,
    pub propulsion: PropulsionConfig,
    pub harvester: HarvesterConfig,
    pub uav: UavConfig,
    pub device: DeviceConfig,
    pub mdp: MdpConfig,
    pub train: TrainConfig,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |m: String| ConfigError::OutOfRange(m);
        self.channel.params().validate().map_err(range)?;
        self.propulsion.params().validate().map_err(range)?;
        self.harvester.params().validate().map_err(range)?;
        if !(self.harvester.peak_efficiency > 0.0 && self.harvester.peak_efficiency <= 1.0) {
            return Err(range("harvester.peak_efficiency must lie in (0, 1]".into()));
        }
        let u = &self.uav;
        if !(u.tx_power >= 0.0 && u.battery_capacity > 0.0 && u.battery_reserve >= 0.0 && u.battery_reserve < u.battery_capacity)
        {
            return Err(range("uav battery needs 0 <= reserve < capacity and tx_power >= 0".into()));
        }
        let d = &self.device;
        if d.threshold > d.battery_capacity {
            return Err(range(format!(
                "device.threshold {} exceeds device.battery_capacity {}",
                d.threshold, d.battery_capacity
            )));
        }
        if !(d.threshold > 0.0 && d.initial_min >= 0.0 && d.initial_min <= d.initial_max && d.initial_max <= d.battery_capacity) {
            return Err(range("device initial range must satisfy 0 <= min <= max <= capacity".into()));
        }
        let m = &self.mdp;
        if !(m.slot > 0.0 && m.v_max > 0.0 && m.d_min >= 0.0 && m.kernel_width_sq > 0.0 && m.reward_energy_unit > 0.0) {
            return Err(range("mdp slot, v_max, kernel_width_sq and reward_energy_unit must be positive".into()));
        }
        if !(m.xi0 >= 0.0 && m.xi1 >= 0.0 && m.xi2 >= 0.0) {
            return Err(range("reward weights must be non-negative".into()));
        }
        self.train.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Optional custom scenario table in a config file. All keys are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub width: f64,
    pub length: f64,
    pub uavs: usize,
    pub horizon: usize,
    pub devices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    channel: ChannelConfig,
    propulsion: PropulsionConfig,
    harvester: HarvesterConfig,
    uav: UavConfig,
    device: DeviceConfig,
    mdp: MdpConfig,
    train: TrainConfig,
    scenario: Option<ScenarioConfig>,
}

/// Parses config text. Returns the world config and the custom scenario
/// if the file defines one.
pub fn parse_config(text: &str) -> Result<(WorldConfig, Option<Scenario>), ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let world = WorldConfig {
        channel: file.channel,
        propulsion: file.propulsion,
        harvester: file.harvester,
        uav: file.uav,
        device: file.device,
        mdp: file.mdp,
        train: file.train,
    };
    world.validate()?;
    let scenario = file.scenario.map(Scenario::from_config).transpose()?;
    Ok((world, scenario))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<(WorldConfig, Option<Scenario>), ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}
