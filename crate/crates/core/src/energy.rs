//! UAV propulsion and battery, rectenna harvesting, device battery.
//!
//! All energies are in W·s and all powers in W.

use crate::channel::{avg_channel_gain, ChannelParams, Position3};

/// Rotary-wing propulsion constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropulsionParams {
    /// Blade profile power in hover, `P_a`.
    pub blade_profile_power: f64,
    /// Induced power in hover, `P_b`.
    pub induced_power: f64,
    /// Rotor blade tip speed, `V_tip`.
    pub tip_speed: f64,
    /// Mean rotor induced velocity in hover, `e_0`.
    pub induced_velocity: f64,
    /// Fuselage drag ratio, `e_1`.
    pub fuselage_drag_ratio: f64,
    /// Rotor solidity, `f_0`.
    pub rotor_solidity: f64,
    pub air_density: f64,
    pub rotor_disc_area: f64,
}

impl PropulsionParams {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.blade_profile_power,
            self.induced_power,
            self.tip_speed,
            self.induced_velocity,
            self.fuselage_drag_ratio,
            self.rotor_solidity,
            self.air_density,
            self.rotor_disc_area,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err("propulsion parameters must be finite and strictly positive".into())
        }
    }
}

/// Propulsion power at horizontal speed `v`.
pub fn propulsion_power(v: f64, p: &PropulsionParams) -> f64 {
    let v2 = v * v;
    let blade = p.blade_profile_power * (1.0 + 3.0 * v2 / (p.tip_speed * p.tip_speed));
    let parasite = 0.5 * p.rotor_solidity * p.air_density * p.fuselage_drag_ratio * p.rotor_disc_area * v2 * v;
    // sqrt(1 + x^2) - x rewritten as 1 / (sqrt(1 + x^2) + x) to avoid cancellation
    let x = v2 / (2.0 * p.induced_velocity * p.induced_velocity);
    let induced = p.induced_power * (1.0 / ((1.0 + x * x).sqrt() + x)).sqrt();
    blade + parasite + induced
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavBattery {
    pub level: f64,
    pub capacity: f64,
    /// Energy that must remain for the return flight.
    pub reserve: f64,
}

impl UavBattery {
    pub fn full(capacity: f64, reserve: f64) -> Self {
        Self { level: capacity, capacity, reserve }
    }

    /// Energy drawn in one slot of length `slot` at speed `v`.
    pub fn slot_draw(v: f64, wet_on: bool, tx_power: f64, slot: f64, prop: &PropulsionParams) -> f64 {
        let wet = if wet_on { tx_power * slot } else { 0.0 };
        propulsion_power(v, prop) * slot + wet
    }

    pub fn step(&self, v: f64, wet_on: bool, tx_power: f64, slot: f64, prop: &PropulsionParams) -> Self {
        let draw = Self::slot_draw(v, wet_on, tx_power, slot, prop);
        Self { level: (self.level - draw).max(0.0), ..*self }
    }
}

/// Logistic RF-to-DC transfer `f(p) = peak / (1 + exp(-steepness (p - midpoint)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticCurve {
    pub peak: f64,
    pub steepness: f64,
    pub midpoint: f64,
}

impl LogisticCurve {
    /// Chooses `peak` so the curve delivers `efficiency * saturation` at `saturation`.
    pub fn fit(saturation: f64, efficiency: f64, steepness: f64, midpoint: f64) -> Self {
        let peak = efficiency * saturation * (1.0 + (-steepness * (saturation - midpoint)).exp());
        Self { peak, steepness, midpoint }
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.peak / (1.0 + (-self.steepness * (p - self.midpoint)).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvesterParams {
    /// Sensitivity power `P_sen`, W.
    pub sensitivity: f64,
    /// Saturation power `P_sat`, W.
    pub saturation: f64,
    pub curve: LogisticCurve,
}

impl HarvesterParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.sensitivity > 0.0 && self.saturation > self.sensitivity) {
            return Err("harvester needs 0 < P_sen < P_sat".into());
        }
        // sampled check that the fitted curve never outputs more than it receives
        let n = 2000;
        for k in 0..=n {
            let p = self.sensitivity + (self.saturation - self.sensitivity) * k as f64 / n as f64;
            if self.curve.eval(p) > p {
                return Err(format!("harvester curve exceeds its input at {p} W"));
            }
        }
        Ok(())
    }
}

/// DC power out of the rectenna for received RF power `p_rf`.
pub fn harvest_dc_power(p_rf: f64, h: &HarvesterParams) -> f64 {
    if p_rf < h.sensitivity {
        0.0
    } else if p_rf < h.saturation {
        h.curve.eval(p_rf)
    } else {
        h.curve.eval(h.saturation)
    }
}

/// Received RF power at `device`, summed over every transmitting UAV.
pub fn received_rf_power(device: &Position3, uavs: &[(Position3, bool)], tx_power: f64, ch: &ChannelParams) -> f64 {
    uavs.iter().filter(|(_, on)| *on).map(|(q, _)| tx_power * avg_channel_gain(q, device, ch)).sum()
}

/// Energy harvested by `device` over one slot. RF powers add before the
/// non-linear conversion.
pub fn harvested_energy(
    device: &Position3,
    uavs: &[(Position3, bool)],
    tx_power: f64,
    ch: &ChannelParams,
    h: &HarvesterParams,
    slot: f64,
) -> f64 {
    harvest_dc_power(received_rf_power(device, uavs, tx_power, ch), h) * slot
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceBattery {
    pub level: f64,
    pub capacity: f64,
    /// Required level `B_thr`.
    pub threshold: f64,
}

impl DeviceBattery {
    pub fn step(&self, e_har: f64) -> Self {
        Self { level: (self.level + e_har).min(self.capacity), ..*self }
    }

    pub fn satisfied(&self) -> bool {
        self.level >= self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn prop() -> PropulsionParams {
        PropulsionParams {
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

    fn harvester() -> HarvesterParams {
        let sat = 1e-3 * 10f64.powf(0.7);
        HarvesterParams { sensitivity: 1e-4, saturation: sat, curve: LogisticCurve::fit(sat, 0.55, 6000.0, 2.5e-3) }
    }

    fn channel() -> ChannelParams {
        ChannelParams { los_a: 12.08, los_b: 0.11, ref_gain: 1.0, los_exponent: 3.0, nlos_exponent: 5.0, altitude: 5.0 }
    }

    // term-by-term evaluation, written without the cancellation rewrite
    fn propulsion_oracle(v: f64) -> f64 {
        let t1 = 79.86 * (1.0 + 3.0 * v * v / (120.0 * 120.0));
        let t2 = 0.5 * 0.05 * 1.225 * 0.6 * 0.503 * v.powi(3);
        let t3 = 88.63 * ((1.0 + v.powi(4) / (4.0 * 4.03f64.powi(4))).sqrt() - v * v / (2.0 * 4.03 * 4.03)).sqrt();
        t1 + t2 + t3
    }

    #[test]
    fn hover_power_is_sum_of_constants() {
        assert_eq!(propulsion_power(0.0, &prop()), 79.86 + 88.63);
    }

    #[test]
    fn propulsion_matches_term_oracle() {
        for v in [0.5, 3.0, 10.0, 17.3, 20.0] {
            assert_relative_eq!(propulsion_power(v, &prop()), propulsion_oracle(v), max_relative = 1e-12);
        }
        // frozen from the oracle
        assert_relative_eq!(propulsion_power(10.0, &prop()), propulsion_oracle(10.0), max_relative = 1e-14);
    }

    #[test]
    fn parasite_term_dominates_at_speed() {
        // cubic growth once the blade and induced terms are negligible
        let ratio = propulsion_power(600.0, &prop()) / propulsion_power(300.0, &prop());
        assert!((ratio - 8.0).abs() / 8.0 < 0.02, "ratio {ratio}");
    }

    #[test]
    fn uav_battery_cases() {
        let p = prop();
        let empty = UavBattery { level: 0.0, capacity: 140000.0, reserve: 20000.0 };
        assert_eq!(empty.step(20.0, true, 1.0, 1.0, &p).level, 0.0);

        let full = UavBattery::full(140000.0, 20000.0);
        assert_eq!(full.step(0.0, false, 1.0, 1.0, &p).level, 140000.0 - (79.86 + 88.63));
        let after = full.step(10.0, true, 1.0, 1.0, &p);
        assert_relative_eq!(after.level, 140000.0 - propulsion_oracle(10.0) - 1.0, max_relative = 1e-15);
        assert!(after.level < full.level);
    }

    #[test]
    fn harvester_regions() {
        let h = harvester();
        assert_eq!(harvest_dc_power(0.5 * h.sensitivity, &h), 0.0);
        assert_eq!(harvest_dc_power(2.0 * h.saturation, &h), harvest_dc_power(h.saturation, &h));
        assert_relative_eq!(harvest_dc_power(h.saturation, &h), 0.55 * h.saturation, max_relative = 1e-14);
        assert_eq!(harvest_dc_power(h.sensitivity * (1.0 - 1e-12), &h), 0.0);
        assert_eq!(harvest_dc_power(h.sensitivity, &h), h.curve.eval(h.sensitivity));
        assert!(h.curve.eval(h.sensitivity) <= 1e-6 * h.saturation);
        assert_relative_eq!(h.saturation, 5.0119e-3, max_relative = 1e-4);
        h.validate().unwrap();
    }

    #[test]
    fn harvester_monotone_and_lossy() {
        let h = harvester();
        let mut prev = 0.0;
        for k in 0..=4000 {
            let p = 8e-3 * k as f64 / 4000.0;
            let out = harvest_dc_power(p, &h);
            assert!(out >= prev);
            assert!(out <= p);
            prev = out;
        }
    }

    #[test]
    fn silent_uavs_deliver_nothing() {
        let dev = Position3::ground(0.0, 0.0);
        let uavs = [(Position3::new(0.0, 0.0, 5.0), false), (Position3::new(1.0, 0.0, 5.0), false)];
        assert_eq!(harvested_energy(&dev, &uavs, 1.0, &channel(), &harvester(), 1.0), 0.0);
    }

    #[test]
    fn two_weak_uavs_cross_sensitivity() {
        let ch = channel();
        let h = harvester();
        let dev = Position3::ground(0.0, 0.0);
        // bisect a horizontal offset whose single-UAV power is 0.75 P_sen
        let target = 0.75 * h.sensitivity;
        let (mut lo, mut hi) = (0.0, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if avg_channel_gain(&Position3::new(mid, 0.0, 5.0), &dev, &ch) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let one = Position3::new(lo, 0.0, 5.0);
        let two = Position3::new(-lo, 0.0, 5.0);
        let single = received_rf_power(&dev, &[(one, true)], 1.0, &ch);
        assert!(single > h.sensitivity / 2.0 && single < h.sensitivity);
        assert_eq!(harvested_energy(&dev, &[(one, true)], 1.0, &ch, &h, 1.0), 0.0);
        let both = harvested_energy(&dev, &[(one, true), (two, true)], 1.0, &ch, &h, 1.0);
        assert!(both > 0.0);
    }

    #[test]
    fn overhead_uav_matches_composed_oracle() {
        let ch = channel();
        let h = harvester();
        let dev = Position3::ground(0.0, 0.0);
        let uav = Position3::new(0.0, 0.0, 5.0);
        let plos = 1.0 / (1.0 + 12.08 * (-0.11 * 90.0 + 12.08 * 0.11f64).exp());
        let g = plos * 5f64.powi(-3) + (1.0 - plos) * 5f64.powi(-5);
        let expected = if g >= h.saturation { h.curve.eval(h.saturation) } else { h.curve.eval(g) };
        assert_relative_eq!(harvested_energy(&dev, &[(uav, true)], 1.0, &ch, &h, 1.0), expected, max_relative = 1e-12);
    }

    #[test]
    fn device_battery_cases() {
        let b = DeviceBattery { level: 2e-3, capacity: 20e-3, threshold: 10e-3 };
        assert_eq!(b.step(0.0), b);
        let full = DeviceBattery { level: 20e-3, ..b };
        assert_eq!(full.step(5e-3).level, 20e-3);
        assert_relative_eq!(b.step(1e-3).level, 3e-3, max_relative = 1e-15);
    }
}
