//! Per-slot trajectory records and their CSV encoding.
//!
//! Two files are written side by side:
//!
//! * `uav_trajectory.csv`: `t,uav,x,y,v,phi,c,battery`
//! * `device_trajectory.csv`: `t,device,battery,hoe,e_har`
//!
//! Row `t` holds the state at the start of slot `t` and the decision taken in
//! it. A final row at `t = T` records the terminal state with zero action.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavRecord {
    pub t: usize,
    pub uav: usize,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub phi: f64,
    pub c: u8,
    pub battery: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub t: usize,
    pub device: usize,
    pub battery: f64,
    pub hoe: u32,
    pub e_har: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub uavs: Vec<UavRecord>,
    pub devices: Vec<DeviceRecord>,
}

impl TrajectoryLog {
    pub fn write_csv(&self, dir: &Path) -> Result<(), csv::Error> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("uav_trajectory.csv"))?;
        for r in &self.uavs {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("device_trajectory.csv"))?;
        for r in &self.devices {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(dir: &Path) -> Result<Self, csv::Error> {
        let uavs =
            csv::Reader::from_path(dir.join("uav_trajectory.csv"))?.deserialize().collect::<Result<Vec<UavRecord>, _>>()?;
        let devices =
            csv::Reader::from_path(dir.join("device_trajectory.csv"))?.deserialize().collect::<Result<Vec<DeviceRecord>, _>>()?;
        Ok(Self { uavs, devices })
    }

    /// True if some UAV was recorded transmitting in a slot whose draw its
    /// battery could not cover.
    pub fn any_unfunded_wet(&self, needs: impl Fn(&UavRecord) -> f64) -> bool {
        self.uavs.iter().any(|r| r.c == 1 && r.battery < needs(r))
    }
}
