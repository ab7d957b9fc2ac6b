//! Deployment scenarios: area, fleet size and device layout.

use crate::config::ScenarioConfig;
use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Area extent along x, `W_max`.
    pub width: f64,
    /// Area extent along y, `L_max`.
    pub length: f64,
    pub uavs: usize,
    /// Ground device coordinates, fixed for every episode.
    pub devices: Vec<[f64; 2]>,
    /// Slots per episode, `T`.
    pub horizon: usize,
}

impl Scenario {
    /// 400 m x 400 m, 4 UAVs, 6 devices.
    pub fn train4x6() -> Self {
        Self {
            name: "train4x6".into(),
            width: 400.0,
            length: 400.0,
            uavs: 4,
            devices: vec![[70.0, 90.0], [110.0, 60.0], [310.0, 80.0], [200.0, 210.0], [80.0, 320.0], [330.0, 340.0]],
            horizon: 100,
        }
    }

    /// 200 m x 200 m, 2 UAVs, 3 devices: two close together, one apart.
    pub fn test2x3() -> Self {
        Self {
            name: "test2x3".into(),
            width: 200.0,
            length: 200.0,
            uavs: 2,
            devices: vec![[50.0, 60.0], [75.0, 45.0], [150.0, 140.0]],
            horizon: 100,
        }
    }

    pub fn builtin(name: &str) -> Result<Self, ConfigError> {
        match name {
            "train4x6" => Ok(Self::train4x6()),
            "test2x3" => Ok(Self::test2x3()),
            other => Err(ConfigError::UnknownScenario(other.to_string())),
        }
    }

    pub fn from_config(c: ScenarioConfig) -> Result<Self, ConfigError> {
        let s = Self { name: c.name, width: c.width, length: c.length, uavs: c.uavs, devices: c.devices, horizon: c.horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::OutOfRange(m));
        if !(self.width > 0.0 && self.length > 0.0) {
            return bad(format!("scenario {}: area must be positive", self.name));
        }
        if self.uavs < 2 {
            return bad(format!("scenario {}: needs at least two UAVs", self.name));
        }
        if self.devices.is_empty() {
            return bad(format!("scenario {}: needs at least one device", self.name));
        }
        if self.horizon == 0 {
            return bad(format!("scenario {}: horizon must be positive", self.name));
        }
        for [x, y] in &self.devices {
            if !(0.0..=self.width).contains(x) || !(0.0..=self.length).contains(y) {
                return bad(format!("scenario {}: device ({x}, {y}) outside the area", self.name));
            }
        }
        Ok(())
    }

    /// Per-agent observation length `2I + 3`.
    pub fn obs_dim(&self) -> usize {
        2 * self.devices.len() + 3
    }
}
