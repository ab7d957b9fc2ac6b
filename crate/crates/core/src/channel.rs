//! Air-to-ground geometry and the average LoS/NLoS channel power gain.

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// A point in the simulation frame, meters.
///
/// UAVs fly at `z = h_fix`, ground devices sit at `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    /// Squared horizontal distance, ignoring altitude.
    pub fn horizontal_dist_sq(&self, other: &Position3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Parameters of the probabilistic LoS air-to-ground channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Environment constant `a` of the LoS probability.
    pub los_a: f64,
    /// Environment constant `b` of the LoS probability (per degree).
    pub los_b: f64,
    /// Linear channel power gain at the 1 m reference distance.
    pub ref_gain: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    /// Fixed flight altitude of every UAV, meters.
    pub altitude: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.los_a > 0.0 && self.los_b > 0.0) {
            return Err("LoS constants a and b must be positive".into());
        }
        if !(self.ref_gain > 0.0) {
            return Err("reference gain must be positive".into());
        }
        if !(self.los_exponent > 0.0 && self.nlos_exponent > self.los_exponent) {
            return Err("path-loss exponents must satisfy 0 < alpha_los < alpha_nlos".into());
        }
        if !(self.altitude > 0.0) {
            return Err("altitude must be positive".into());
        }
        Ok(())
    }
}

pub fn distance(a: &Position3, b: &Position3) -> f64 {
    let dz = a.z - b.z;
    (a.horizontal_dist_sq(b) + dz * dz).sqrt()
}

/// Elevation angle in degrees for slant distance `d` at altitude `h_fix`.
pub fn elevation_deg(d: f64, h_fix: f64) -> Result<f64, DomainError> {
    if !(h_fix > 0.0) || !(d >= h_fix) {
        return Err(DomainError::Elevation { distance: d, altitude: h_fix });
    }
    Ok((h_fix / d).asin().to_degrees())
}

/// LoS probability for an elevation given in degrees.
pub fn p_los(beta_deg: f64, p: &ChannelParams) -> f64 {
    1.0 / (1.0 + p.los_a * (-p.los_b * beta_deg + p.los_a * p.los_b).exp())
}

/// Average channel power gain between a UAV and a ground device.
///
/// Mixes the LoS and NLoS path-loss laws weighted by the elevation-dependent
/// LoS probability. Points closer than the altitude are treated as if they
/// were at the altitude, which cannot occur for a UAV/device pair.
pub fn avg_channel_gain(uav: &Position3, device: &Position3, p: &ChannelParams) -> f64 {
    let d = distance(uav, device).max(p.altitude);
    let beta = (p.altitude / d).min(1.0).asin().to_degrees();
    let plos = p_los(beta, p);
    plos * p.ref_gain * d.powf(-p.los_exponent) + (1.0 - plos) * p.ref_gain * d.powf(-p.nlos_exponent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_params() -> ChannelParams {
        ChannelParams { los_a: 12.08, los_b: 0.11, ref_gain: 1.0, los_exponent: 3.0, nlos_exponent: 5.0, altitude: 5.0 }
    }

    #[test]
    fn distance_cases() {
        let dev = Position3::ground(0.0, 0.0);
        assert_eq!(distance(&Position3::new(0.0, 0.0, 5.0), &dev), 5.0);
        assert_relative_eq!(distance(&Position3::new(3.0, 4.0, 5.0), &dev), 50f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(50f64.sqrt(), 7.0711, epsilon = 1e-4);
        assert_eq!(distance(&Position3::new(7.0, -2.0, 5.0), &Position3::ground(7.0, -2.0)), 5.0);
    }

    #[test]
    fn elevation_cases() {
        assert_eq!(elevation_deg(5.0, 5.0).unwrap(), 90.0);
        assert_relative_eq!(elevation_deg(10.0, 5.0).unwrap(), 30.0, epsilon = 1e-12);
        assert_relative_eq!(elevation_deg(5.0 * 2f64.sqrt(), 5.0).unwrap(), 45.0, epsilon = 1e-12);
        assert!(elevation_deg(4.0, 5.0).is_err());
        assert!(elevation_deg(f64::NAN, 5.0).is_err());
    }

    #[test]
    fn los_probability_values() {
        let p = table_params();
        assert_relative_eq!(p_los(90.0, &p), 0.99772, epsilon = 1e-5);
        let expected_30 = 1.0 / (1.0 + 12.08 * (-3.3f64 + 12.08 * 0.11).exp());
        assert_relative_eq!(p_los(30.0, &p), expected_30, max_relative = 1e-14);
        assert!(p_los(1000.0, &p) > 1.0 - 1e-12);
        let mut prev = 0.0;
        for k in 1..=90 {
            let v = p_los(k as f64, &p);
            assert!(v > prev && v < 1.0);
            prev = v;
        }
    }

    #[test]
    fn gain_bounds_and_degenerate_mixture() {
        let p = ChannelParams { ref_gain: 1e-3, ..table_params() };
        let uav = Position3::new(0.0, 0.0, 5.0);
        let dev = Position3::ground(0.0, 0.0);
        let g = avg_channel_gain(&uav, &dev, &p);
        assert!(g >= 1e-3 / 5f64.powi(5) && g <= 1e-3 / 5f64.powi(3));

        // a tiny `a` pushes P_LoS to 1 for any elevation
        let all_los = ChannelParams { los_a: 1e-300, ..p };
        let far = Position3::ground(30.0, 40.0);
        let d = distance(&uav, &far);
        assert_relative_eq!(avg_channel_gain(&uav, &far, &all_los), 1e-3 * d.powf(-3.0), max_relative = 1e-12);
    }

    #[test]
    fn gain_at_ten_meters() {
        let p = table_params();
        let uav = Position3::new(0.0, 0.0, 5.0);
        let dev = Position3::ground(75f64.sqrt(), 0.0);
        let plos = 1.0 / (1.0 + 12.08 * (-0.11 * 30.0 + 12.08 * 0.11f64).exp());
        let expected = plos * 1e-3 + (1.0 - plos) * 1e-5;
        assert_relative_eq!(avg_channel_gain(&uav, &dev, &p), expected, max_relative = 1e-12);
    }

    #[test]
    fn gain_decreases_with_horizontal_offset() {
        let p = table_params();
        let uav = Position3::new(0.0, 0.0, 5.0);
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let g = avg_channel_gain(&uav, &Position3::ground(k as f64 * 0.5, 0.0), &p);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn gain_decreases_with_vertical_distance() {
        // beta stays at 90 degrees along the vertical axis
        let p = table_params();
        let dev = Position3::ground(0.0, 0.0);
        let g1 = avg_channel_gain(&Position3::new(0.0, 0.0, 6.0), &dev, &ChannelParams { altitude: 6.0, ..p });
        let g2 = avg_channel_gain(&Position3::new(0.0, 0.0, 9.0), &dev, &ChannelParams { altitude: 9.0, ..p });
        assert!(g1 > g2);
    }
}
