use rand::Rng;

use super::policy::ACTION_DIM;
use crate::nn::Tensor;

/// One slot of joint experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Per-agent observations.
    pub obs: Vec<Vec<f64>>,
    /// Per-agent normalized actions.
    pub actions: Vec<[f64; ACTION_DIM]>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
    /// Row-major `U x U` similarity before and after the slot.
    pub z: Vec<f64>,
    pub z_next: Vec<f64>,
}

/// Fixed-capacity FIFO store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::new(), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `t`, evicting the oldest record when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Uniform indices, with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut impl Rng) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Batch {
        let idx = self.sample_indices(n, rng);
        Batch::from_transitions(&idx.iter().map(|&i| &self.items[i]).collect::<Vec<_>>())
    }
}

/// A minibatch laid out for the networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub agents: usize,
    /// Per agent, `B x M`.
    pub obs: Vec<Tensor>,
    /// Per agent, `B x 3`.
    pub actions: Vec<Tensor>,
    /// Per agent, `B x 1`.
    pub rewards: Vec<Tensor>,
    pub next_obs: Vec<Tensor>,
    /// `(B U) x U`: sample `b`'s matrix occupies rows `b U .. (b + 1) U`.
    pub z: Tensor,
    pub z_next: Tensor,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Self {
        let b = ts.len();
        let agents = ts.first().map_or(0, |t| t.obs.len());
        let per_agent = |f: &dyn Fn(&Transition, usize) -> Vec<f64>| -> Vec<Tensor> {
            (0..agents)
                .map(|u| Tensor::from_rows(&ts.iter().map(|t| f(t, u)).collect::<Vec<_>>()).expect("ragged batch"))
                .collect()
        };
        let obs = per_agent(&|t, u| t.obs[u].clone());
        let actions = per_agent(&|t, u| t.actions[u].to_vec());
        let rewards = per_agent(&|t, u| vec![t.rewards[u]]);
        let next_obs = per_agent(&|t, u| t.next_obs[u].clone());
        let stack = |f: &dyn Fn(&Transition) -> &Vec<f64>| {
            let data: Vec<f64> = ts.iter().flat_map(|t| f(t).iter().copied()).collect();
            Tensor::from_vec(b * agents, agents, data).expect("similarity shape")
        };
        let z = stack(&|t| &t.z);
        let z_next = stack(&|t| &t.z_next);
        Self { size: b, agents, obs, actions, rewards, next_obs, z, z_next }
    }

    /// Team reward per sample, `B x 1`: mean or sum over agents.
    pub fn team_reward(&self, mean: bool) -> Tensor {
        let mut out = Tensor::zeros(self.size, 1);
        for r in &self.rewards {
            for (o, v) in out.data_mut().iter_mut().zip(r.data()) {
                *o += v;
            }
        }
        if mean && self.agents > 0 {
            let k = 1.0 / self.agents as f64;
            for o in out.data_mut() {
                *o *= k;
            }
        }
        out
    }
}

/// Interleaves per-agent `B x C` tensors into `(B U) x C` with each sample's
/// agents in consecutive rows.
pub fn interleave(parts: &[Tensor]) -> Tensor {
    let u = parts.len();
    let (b, c) = (parts[0].rows(), parts[0].cols());
    let mut out = Tensor::zeros(b * u, c);
    for (a, p) in parts.iter().enumerate() {
        for r in 0..b {
            for k in 0..c {
                out.set(r * u + a, k, p.get(r, k));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(k: f64) -> Transition {
        Transition {
            obs: vec![vec![k, k + 0.1], vec![k + 0.2, k + 0.3]],
            actions: vec![[k, 0.0, 0.0], [0.0, k, 0.0]],
            rewards: vec![k, 2.0 * k],
            next_obs: vec![vec![k + 1.0, 0.0], vec![0.0, k + 1.0]],
            z: vec![1.0, k, k, 1.0],
            z_next: vec![0.5, 0.5, 0.5, 0.5],
        }
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut buf = ReplayBuffer::new(3);
        for k in 0..5 {
            buf.push(tr(k as f64));
        }
        assert_eq!(buf.len(), 3);
        let kept: Vec<f64> = (0..3).map(|i| buf.get(i).rewards[0]).collect();
        assert_eq!(kept, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let mut buf = ReplayBuffer::new(100);
        for k in 0..50 {
            buf.push(tr(k as f64));
        }
        let a = buf.sample_indices(128, &mut ChaCha8Rng::seed_from_u64(9));
        let b = buf.sample_indices(128, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.iter().all(|&i| i < 50));
    }

    #[test]
    fn batch_layout() {
        let (a, b) = (tr(1.0), tr(2.0));
        let batch = Batch::from_transitions(&[&a, &b]);
        assert_eq!(batch.obs[1].row(1), &[2.2, 2.3]);
        assert_eq!(batch.z.row(2), &[1.0, 2.0]);
        assert_eq!(batch.team_reward(true).data(), &[1.5, 3.0]);
        assert_eq!(batch.team_reward(false).data(), &[3.0, 6.0]);
        let joint = interleave(&batch.obs);
        assert_eq!(joint.row(1), &[1.2, 1.3]);
        assert_eq!(joint.row(2), &[2.0, 2.1]);
    }
}
