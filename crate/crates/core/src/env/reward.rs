//! Effective WET weights and per-agent rewards.

/// Share of each UAV in the slot's harvest.
///
/// `solo[u][i]` is the DC energy device `i` would harvest from UAV `u`
/// alone and `e_har[i]` the energy it actually harvested from all UAVs.
/// A device that harvested nothing contributes no weight. When nobody
/// contributes, every weight is 0.
pub fn effective_wet_weights(solo: &[Vec<f64>], e_har: &[f64]) -> Vec<f64> {
    let w: Vec<f64> =
        solo.iter().map(|row| row.iter().zip(e_har).map(|(&s, &e)| if e > 0.0 { s / e } else { 0.0 }).sum()).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter().map(|x| x / total).collect()
    } else {
        vec![0.0; w.len()]
    }
}

/// Form of the charging term in the local reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargingReward {
    /// Battery increments weighted by each device's HoE.
    HoeWeighted,
    /// Unweighted battery increments.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub xi0: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub shared_penalty: bool,
    /// Unit in which device battery increments are counted.
    pub energy_unit: f64,
}

/// Inputs of one slot's reward evaluation.
#[derive(Debug, Clone)]
pub struct RewardInputs<'a> {
    pub wet_weights: &'a [f64],
    /// Device batteries at the start and end of the slot.
    pub dev_before: &'a [f64],
    pub dev_after: &'a [f64],
    /// Start-of-slot HoE.
    pub hoe: &'a [u32],
    /// Devices still unsatisfied after the slot's harvest.
    pub unsatisfied: &'a [usize],
    /// UAV batteries at the end of the slot.
    pub uav_after: &'a [f64],
    pub uav_reserve: f64,
    /// Per-UAV [inter-UAV distance, area] violation flags.
    pub penalties: &'a [[bool; 2]],
}

/// Charging-plus-residual term `r_{u,0}` for every agent.
pub fn charging_terms(inp: &RewardInputs<'_>, w: &RewardWeights, form: ChargingReward) -> Vec<f64> {
    let delta = |i: usize| (inp.dev_after[i] - inp.dev_before[i]) / w.energy_unit;
    let count = inp.unsatisfied.len() as f64;
    let shared = match form {
        ChargingReward::HoeWeighted => {
            let num: f64 = inp.unsatisfied.iter().map(|&i| delta(i) * f64::from(inp.hoe[i])).sum();
            let hsum: f64 = inp.unsatisfied.iter().map(|&i| f64::from(inp.hoe[i])).sum();
            num / (1.0 + count * hsum)
        }
        ChargingReward::Plain => {
            let num: f64 = inp.unsatisfied.iter().map(|&i| delta(i)).sum();
            num / (1.0 + count)
        }
    };
    inp.wet_weights.iter().zip(inp.uav_after).map(|(n, b)| n * shared + w.xi2 * (b - inp.uav_reserve)).collect()
}

/// Penalty term `r_{u,1}` for every agent.
pub fn penalty_terms(penalties: &[[bool; 2]], shared: bool) -> Vec<f64> {
    let own: Vec<f64> = penalties.iter().map(|p| p.iter().filter(|&&f| f).count() as f64).collect();
    if shared {
        let total: f64 = own.iter().sum();
        vec![total; own.len()]
    } else {
        own
    }
}

pub fn rewards(inp: &RewardInputs<'_>, w: &RewardWeights, form: ChargingReward) -> Vec<f64> {
    let charge = charging_terms(inp, w, form);
    let pen = penalty_terms(inp.penalties, w.shared_penalty);
    charge.iter().zip(&pen).map(|(c, p)| w.xi0 * c - w.xi1 * p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn weights() -> RewardWeights {
        RewardWeights { xi0: 0.25, xi1: 1.0, xi2: 1e-5, shared_penalty: true, energy_unit: 1e-3 }
    }

    #[test]
    fn sole_contributor_takes_all() {
        let n = effective_wet_weights(&[vec![2e-3, 0.0], vec![0.0, 0.0]], &[2e-3, 0.0]);
        assert_eq!(n, vec![1.0, 0.0]);
    }

    #[test]
    fn mirrored_pair_splits_evenly() {
        let n = effective_wet_weights(&[vec![1e-3], vec![1e-3]], &[2.5e-3]);
        assert_eq!(n, vec![0.5, 0.5]);
    }

    #[test]
    fn nobody_harvests() {
        assert_eq!(effective_wet_weights(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[0.0, 0.0]), vec![0.0, 0.0]);
        // harvest only from the joint sum: no solo share
        assert_eq!(effective_wet_weights(&[vec![0.0], vec![0.0]], &[1e-3]), vec![0.0, 0.0]);
    }

    fn idle_inputs<'a>(pen: &'a [[bool; 2]], uav: &'a [f64]) -> RewardInputs<'a> {
        RewardInputs {
            wet_weights: &[0.0, 0.0, 0.0][..uav.len()],
            dev_before: &[3e-3, 4e-3],
            dev_after: &[3e-3, 4e-3],
            hoe: &[2, 5],
            unsatisfied: &[0, 1],
            uav_after: uav,
            uav_reserve: 20_000.0,
            penalties: pen,
        }
    }

    #[test]
    fn silent_slot_reward_is_residual_term() {
        let pen = [[false; 2]; 2];
        let uav = [100_000.0, 20_000.0];
        let r = rewards(&idle_inputs(&pen, &uav), &weights(), ChargingReward::HoeWeighted);
        assert_relative_eq!(r[0], 0.25 * 1e-5 * 80_000.0, max_relative = 1e-15);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn shared_penalty_counts_every_violation() {
        let pen = [[false, true], [false, false], [false, false]];
        let uav = [20_000.0; 3];
        let r = rewards(&idle_inputs(&pen, &uav), &weights(), ChargingReward::HoeWeighted);
        assert_eq!(r, vec![-1.0, -1.0, -1.0]);
        let own = RewardWeights { shared_penalty: false, ..weights() };
        let r = rewards(&idle_inputs(&pen, &uav), &own, ChargingReward::HoeWeighted);
        assert_eq!(r, vec![-1.0, 0.0, 0.0]);
    }

    #[test]
    fn hoe_weighted_charging_term() {
        let inp = RewardInputs {
            wet_weights: &[1.0, 0.0],
            dev_before: &[3e-3, 4e-3, 9e-3],
            dev_after: &[5e-3, 4e-3, 11e-3],
            hoe: &[4, 2, 6],
            // device 2 crossed the threshold this slot
            unsatisfied: &[0, 1],
            uav_after: &[20_000.0, 20_000.0],
            uav_reserve: 20_000.0,
            penalties: &[[false; 2]; 2],
        };
        let c = charging_terms(&inp, &weights(), ChargingReward::HoeWeighted);
        // (2 mW·s * 4) / (1 + 2 * 6)
        assert_relative_eq!(c[0], 8.0 / 13.0, max_relative = 1e-12);
        assert_eq!(c[1], 0.0);
        let p = charging_terms(&inp, &weights(), ChargingReward::Plain);
        assert_relative_eq!(p[0], 2.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn violation_strictly_lowers_reward() {
        let clean = [[false; 2]; 2];
        let dirty = [[true, false], [false; 2]];
        let uav = [60_000.0, 50_000.0];
        let a = rewards(&idle_inputs(&clean, &uav), &weights(), ChargingReward::HoeWeighted);
        let b = rewards(&idle_inputs(&dirty, &uav), &weights(), ChargingReward::HoeWeighted);
        assert!(b.iter().zip(&a).all(|(x, y)| x < y));
    }
}
