use rand::Rng;

use super::policy::{Policy, ACTION_DIM};
use crate::error::NnError;
use crate::nn::{
    collect_grads, Activation, AttentionBlock, BoundAttention, BoundLinear, Graph, Linear, Mlp, Params, Tensor, Var,
};

fn critic(input: usize, hidden: usize, rng: &mut impl Rng) -> Mlp {
    Mlp::new(&[input, hidden, hidden, 1], Activation::Relu, rng)
}

/// The five networks and the temperature of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalAgent {
    pub policy: Policy,
    /// Twin action-value critics on `[s, a]`.
    pub q: [Mlp; 2],
    /// Online state-value critic.
    pub v: Mlp,
    /// Target state-value critic, moved only by soft updates.
    pub v_target: Mlp,
    pub alpha: f64,
}

impl LocalAgent {
    pub fn new(obs_dim: usize, hidden: usize, alpha: f64, rng: &mut impl Rng) -> Self {
        let policy = Policy::new(obs_dim, hidden, rng);
        let q = [critic(obs_dim + ACTION_DIM, hidden, rng), critic(obs_dim + ACTION_DIM, hidden, rng)];
        let v = critic(obs_dim, hidden, rng);
        Self { policy, q, v_target: v.clone(), v, alpha }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.obs_dim()
    }
}

/// Attention block followed by a per-UAV fully connected layer, mean pooling
/// over UAVs and a scalar head.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalCritic {
    pub attention: AttentionBlock,
    pub fc1: Linear,
    pub fc2: Linear,
    /// Width of the per-UAV action input, 0 for state-value critics.
    pub action_dim: usize,
}

impl GlobalCritic {
    pub fn new(obs_dim: usize, action_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            attention: AttentionBlock::new(obs_dim, rng),
            fc1: Linear::new(obs_dim + action_dim, hidden, rng),
            fc2: Linear::new(hidden, 1, rng),
            action_dim,
        }
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundGlobalCritic {
        BoundGlobalCritic {
            attention: self.attention.bind(g, trainable),
            fc1: self.fc1.bind(g, trainable),
            fc2: self.fc2.bind(g, trainable),
        }
    }
}

impl Params for GlobalCritic {
    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.attention.params();
        p.extend(self.fc1.params());
        p.extend(self.fc2.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.attention.params_mut();
        p.extend(self.fc1.params_mut());
        p.extend(self.fc2.params_mut());
        p
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundGlobalCritic {
    attention: BoundAttention,
    fc1: BoundLinear,
    fc2: BoundLinear,
}

impl BoundGlobalCritic {
    /// `o` and `actions` stack `B` groups of `n` UAV rows, `z` their
    /// similarity matrices. Returns `B x 1`.
    pub fn forward(&self, g: &mut Graph, o: Var, actions: Option<Var>, z: Var, n: usize) -> Result<Var, NnError> {
        let f = self.attention.forward(g, o, z, n)?;
        let x = match actions {
            Some(a) => g.concat_cols(&[f, a])?,
            None => f,
        };
        let h = self.fc1.forward(g, x)?;
        let h = g.relu(h)?;
        let pooled = g.block_mean(h, n)?;
        self.fc2.forward(g, pooled)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut v = self.attention.vars();
        v.extend(self.fc1.vars());
        v.extend(self.fc2.vars());
        v
    }

    pub fn grads(&self, g: &Graph) -> Vec<Tensor> {
        collect_grads(g, &self.vars())
    }
}

/// The central controller's critics.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalNets {
    pub q: GlobalCritic,
    pub v: GlobalCritic,
    /// Moved only by soft updates.
    pub v_target: GlobalCritic,
}

impl GlobalNets {
    pub fn new(obs_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let q = GlobalCritic::new(obs_dim, ACTION_DIM, hidden, rng);
        let v = GlobalCritic::new(obs_dim, 0, hidden, rng);
        Self { q, v_target: v.clone(), v }
    }
}
