use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::env::AgentAction;
use crate::error::NnError;
use crate::nn::{Activation, BoundMlp, Graph, Mlp, Params, Tensor, Var};

/// Normalized action: speed, heading, WET logit, each in `[-1, 1]`.
pub const ACTION_DIM: usize = 3;

const LOG_STD_MIN: f64 = -5.0;
const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Stochastic,
    Deterministic,
}

/// Squashed-Gaussian actor. The head emits a mean and a raw log-std for
/// each action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub net: Mlp,
}

impl Policy {
    pub fn new(obs_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self { net: Mlp::new(&[obs_dim, hidden, hidden, 2 * ACTION_DIM], Activation::Tanh, rng) }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }
}

impl Params for Policy {
    fn params(&self) -> Vec<&Tensor> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.params_mut()
    }
}

/// Reparameterized actions and their log-densities.
#[derive(Debug, Clone, Copy)]
pub struct Sampled {
    /// `B x 3`, in `(-1, 1)`.
    pub actions: Var,
    /// `B x 1`.
    pub log_prob: Var,
}

/// `a = tanh(mu + sigma * noise)` with `log pi(a | s)`.
///
/// With `squash_correction` the density accounts for the tanh change of
/// variables, `log(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u))`.
pub fn sample_actions(
    g: &mut Graph,
    policy: &BoundMlp,
    obs: Var,
    noise: &Tensor,
    squash_correction: bool,
) -> Result<Sampled, NnError> {
    let head = policy.forward(g, obs)?;
    let mu = g.slice_cols(head, 0, ACTION_DIM)?;
    let raw = g.slice_cols(head, ACTION_DIM, 2 * ACTION_DIM)?;
    let half_range = 0.5 * (LOG_STD_MAX - LOG_STD_MIN);
    let t = g.tanh(raw)?;
    let t = g.scale(t, half_range)?;
    let log_std = g.add_scalar(t, LOG_STD_MIN + half_range)?;
    let std = g.exp(log_std)?;
    let eps = g.constant(noise.clone());
    let spread = g.mul(std, eps)?;
    let u = g.add(mu, spread)?;
    let actions = g.tanh(u)?;

    let base = g.constant(noise.map(|e| -0.5 * e * e - 0.5 * (2.0 * PI).ln()));
    let mut lp = g.sub(base, log_std)?;
    if squash_correction {
        let m2u = g.scale(u, -2.0)?;
        let sp = g.softplus(m2u)?;
        let s = g.add(u, sp)?;
        let s = g.add_scalar(s, -LN_2)?;
        let corr = g.scale(s, -2.0)?;
        lp = g.sub(lp, corr)?;
    }
    let log_prob = g.sum_cols(lp)?;
    Ok(Sampled { actions, log_prob })
}

/// Mean action `tanh(mu)`.
pub fn mean_actions(g: &mut Graph, policy: &BoundMlp, obs: Var) -> Result<Var, NnError> {
    let head = policy.forward(g, obs)?;
    let mu = g.slice_cols(head, 0, ACTION_DIM)?;
    g.tanh(mu)
}

/// Draws a `rows x 3` standard-normal noise matrix.
pub fn draw_noise(rows: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * ACTION_DIM).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::from_vec(rows, ACTION_DIM, data).expect("noise shape")
}

/// Maps a normalized action onto the environment's ranges.
pub fn to_env_action(a: &[f64], v_max: f64) -> AgentAction {
    AgentAction { speed: (v_max * 0.5 * (a[0] + 1.0)).clamp(0.0, v_max), heading: PI * (a[1] + 1.0), wet: a[2] >= 0.0 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAction {
    pub action: AgentAction,
    pub normalized: [f64; ACTION_DIM],
}

/// Chooses an action for a single observation.
pub fn act(policy: &Policy, obs: &[f64], mode: ActionMode, v_max: f64, rng: &mut impl Rng) -> Result<PolicyAction, NnError> {
    let mut g = Graph::new();
    let b = policy.net.bind(&mut g, false);
    let x = g.constant(Tensor::from_vec(1, obs.len(), obs.to_vec())?);
    let a = match mode {
        ActionMode::Deterministic => mean_actions(&mut g, &b, x)?,
        ActionMode::Stochastic => sample_actions(&mut g, &b, x, &draw_noise(1, rng), false)?.actions,
    };
    let v = g.value(a).data();
    let normalized = [v[0], v[1], v[2]];
    Ok(PolicyAction { action: to_env_action(&normalized, v_max), normalized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy() -> Policy {
        Policy::new(9, 16, &mut ChaCha8Rng::seed_from_u64(5))
    }

    const OBS: [f64; 9] = [0.3, 0.6, 0.01, 0.02, 0.0, 0.2, 0.15, 0.6, 0.9];

    #[test]
    fn deterministic_is_repeatable() {
        let p = policy();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = act(&p, &OBS, ActionMode::Deterministic, 20.0, &mut rng).unwrap();
        let b = act(&p, &OBS, ActionMode::Deterministic, 20.0, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stochastic_actions_explore_within_range() {
        let p = policy();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let (mut sv, mut sv2, mut sp, mut sp2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let a = act(&p, &OBS, ActionMode::Stochastic, 20.0, &mut rng).unwrap().action;
            assert!((0.0..=20.0).contains(&a.speed));
            assert!((0.0..=2.0 * PI).contains(&a.heading));
            sv += a.speed;
            sv2 += a.speed * a.speed;
            sp += a.heading;
            sp2 += a.heading * a.heading;
        }
        let var = |s: f64, s2: f64| s2 / n as f64 - (s / n as f64).powi(2);
        assert!(var(sv, sv2) > 1e-3);
        assert!(var(sp, sp2) > 1e-3);
    }

    #[test]
    fn wet_follows_sign_of_logit() {
        assert!(to_env_action(&[0.0, 0.0, 0.0], 20.0).wet);
        assert!(!to_env_action(&[0.0, 0.0, -1e-9], 20.0).wet);
        let a = to_env_action(&[-1.0, 1.0, 0.5], 20.0);
        assert_eq!(a.speed, 0.0);
        assert_eq!(a.heading, 2.0 * PI);
        assert_eq!(to_env_action(&[1.0, -1.0, 0.5], 20.0).speed, 20.0);
    }

    #[test]
    fn log_prob_matches_closed_form() {
        let p = policy();
        let noise = Tensor::from_vec(1, 3, vec![0.3, -1.2, 0.7]).unwrap();
        let mut g = Graph::new();
        let b = p.net.bind(&mut g, false);
        let x = g.constant(Tensor::from_vec(1, 9, OBS.to_vec()).unwrap());
        let s = sample_actions(&mut g, &b, x, &noise, true).unwrap();
        let lp = g.value(s.log_prob).item();

        let head = p.net.infer(&Tensor::from_vec(1, 9, OBS.to_vec()).unwrap()).unwrap();
        let mut expected = 0.0;
        for d in 0..3 {
            let mu = head.get(0, d);
            let log_std = -5.0 + 3.5 * (head.get(0, d + 3).tanh() + 1.0);
            let e = noise.get(0, d);
            let u = mu + log_std.exp() * e;
            let normal = -0.5 * e * e - log_std - 0.5 * (2.0 * PI).ln();
            expected += normal - (1.0 - u.tanh().powi(2)).ln();
        }
        assert!((lp - expected).abs() < 1e-10, "{lp} vs {expected}");
    }
}
