use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{
    global_q_loss, global_v_loss, global_value, local_q_loss, local_q_target, local_v_loss, policy_loss, temperature_loss,
};
use super::nets::{GlobalNets, LocalAgent};
use super::policy::{act, draw_noise, sample_actions, ActionMode};
use super::replay::{interleave, Batch, ReplayBuffer, Transition};
use crate::config::{GlobalReward, OptimizerKind, TargetEntropy, Variant, WorldConfig};
use crate::env::{ChargingReward, Environment};
use crate::error::{Error, NnError, Result};
use crate::nn::{clip_grad_norm, soft_update, Adam, Graph, Optimizer, Params, Tensor};
use crate::scenario::Scenario;

/// Named random substreams derived from one root seed.
pub mod streams {
    pub const ENV: u64 = 1;
    pub const INIT: u64 = 2;
    pub const POLICY_NOISE: u64 = 3;
    pub const REPLAY: u64 = 4;
}

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Smallest temperature kept by the clamp after each update.
pub const MIN_ALPHA: f64 = 1e-6;

pub fn charging_reward(variant: Variant) -> ChargingReward {
    if variant.uses_hoe() {
        ChargingReward::HoeWeighted
    } else {
        ChargingReward::Plain
    }
}

/// Every trainable network of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub variant: Variant,
    pub agents: Vec<LocalAgent>,
    /// Present only for variants with global training.
    pub global: Option<GlobalNets>,
}

impl Model {
    pub fn new(variant: Variant, agents: usize, obs_dim: usize, hidden: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Self {
        let local = (0..agents).map(|_| LocalAgent::new(obs_dim, hidden, alpha, rng)).collect();
        let global = variant.uses_global().then(|| GlobalNets::new(obs_dim, hidden, rng));
        Self { variant, agents: local, global }
    }

    pub fn obs_dim(&self) -> usize {
        self.agents[0].obs_dim()
    }

    pub fn hidden(&self) -> usize {
        self.agents[0].v.layers[0].weight.cols()
    }

    /// Parameter names in [`Params::params`] order.
    pub fn param_names(&self) -> Vec<String> {
        let mlp = |prefix: String, layers: usize| -> Vec<String> {
            (0..layers).flat_map(|i| [format!("{prefix}.l{i}.weight"), format!("{prefix}.l{i}.bias")]).collect()
        };
        let global = |prefix: &str| -> Vec<String> {
            ["attention.wq", "attention.wk", "attention.wv", "fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"]
                .iter()
                .map(|s| format!("{prefix}.{s}"))
                .collect()
        };
        let mut names = Vec::new();
        for (u, a) in self.agents.iter().enumerate() {
            names.extend(mlp(format!("agent{u}.policy"), a.policy.net.layers.len()));
            names.extend(mlp(format!("agent{u}.q0"), a.q[0].layers.len()));
            names.extend(mlp(format!("agent{u}.q1"), a.q[1].layers.len()));
            names.extend(mlp(format!("agent{u}.v"), a.v.layers.len()));
            names.extend(mlp(format!("agent{u}.v_target"), a.v_target.layers.len()));
        }
        if self.global.is_some() {
            names.extend(global("global.q"));
            names.extend(global("global.v"));
            names.extend(global("global.v_target"));
        }
        names
    }
}

impl Params for Model {
    fn params(&self) -> Vec<&Tensor> {
        let mut p = Vec::new();
        for a in &self.agents {
            p.extend(a.policy.net.params());
            p.extend(a.q[0].params());
            p.extend(a.q[1].params());
            p.extend(a.v.params());
            p.extend(a.v_target.params());
        }
        if let Some(g) = &self.global {
            p.extend(g.q.params());
            p.extend(g.v.params());
            p.extend(g.v_target.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = Vec::new();
        for a in &mut self.agents {
            p.extend(a.policy.net.params_mut());
            let [q0, q1] = &mut a.q;
            p.extend(q0.params_mut());
            p.extend(q1.params_mut());
            p.extend(a.v.params_mut());
            p.extend(a.v_target.params_mut());
        }
        if let Some(g) = &mut self.global {
            p.extend(g.q.params_mut());
            p.extend(g.v.params_mut());
            p.extend(g.v_target.params_mut());
        }
        p
    }
}

/// Per-episode training record. `r_ac` is the per-agent average of the
/// accumulated rewards; `pen0` and `pen1` count distance and area
/// violations over all UAVs and slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub r_ac: f64,
    pub h_total: u64,
    pub pen0: u64,
    pub pen1: u64,
    pub wall_time: f64,
}

/// Loss values of one update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateLosses {
    pub v: Vec<f64>,
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    pub policy: Vec<f64>,
    pub alpha: Vec<f64>,
    pub global_v: Option<f64>,
    pub global_q: Option<f64>,
}

impl UpdateLosses {
    fn all_finite(&self) -> bool {
        [&self.v, &self.q0, &self.q1, &self.policy, &self.alpha].iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.global_v.is_none_or(f64::is_finite)
            && self.global_q.is_none_or(f64::is_finite)
    }
}

#[derive(Debug, Clone)]
struct AgentOpt {
    policy: Optimizer,
    q: [Optimizer; 2],
    v: Optimizer,
}

#[derive(Debug, Clone)]
struct GlobalOpt {
    q: Optimizer,
    v: Optimizer,
}

fn optimizer<P: Params>(kind: OptimizerKind, module: &P, lr: f64) -> Optimizer {
    match kind {
        OptimizerKind::Sgd => Optimizer::Sgd { lr },
        OptimizerKind::Adam => Optimizer::Adam(Adam::new(module, lr)),
    }
}

fn diverged(e: NnError) -> Error {
    match e {
        NnError::NonFinite(op) => Error::Diverged(format!("non-finite value in {op}")),
        other => Error::Nn(other),
    }
}

/// Runs the training loop: act, step, store, update once per slot.
pub struct Trainer {
    cfg: WorldConfig,
    pub model: Model,
    opts: Vec<AgentOpt>,
    gopt: Option<GlobalOpt>,
    replay: ReplayBuffer,
    env: Environment,
    env_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    episode: usize,
    updates: u64,
}

impl Trainer {
    pub fn new(cfg: &WorldConfig, scenario: &Scenario, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let tc = &cfg.train;
        let env = Environment::new(cfg, scenario, charging_reward(tc.variant))?;
        let mut init = substream(seed, streams::INIT);
        let model = Model::new(tc.variant, scenario.uavs, scenario.obs_dim(), tc.hidden_width, tc.init_alpha, &mut init);
        let opts = model
            .agents
            .iter()
            .map(|a| AgentOpt {
                policy: optimizer(tc.optimizer, &a.policy, tc.lr_policy),
                q: [optimizer(tc.optimizer, &a.q[0], tc.lr), optimizer(tc.optimizer, &a.q[1], tc.lr)],
                v: optimizer(tc.optimizer, &a.v, tc.lr),
            })
            .collect();
        let gopt = model
            .global
            .as_ref()
            .map(|g| GlobalOpt { q: optimizer(tc.optimizer, &g.q, tc.lr), v: optimizer(tc.optimizer, &g.v, tc.lr) });
        Ok(Self {
            cfg: cfg.clone(),
            model,
            opts,
            gopt,
            replay: ReplayBuffer::new(tc.buffer_capacity),
            env,
            env_rng: substream(seed, streams::ENV),
            noise_rng: substream(seed, streams::POLICY_NOISE),
            replay_rng: substream(seed, streams::REPLAY),
            episode: 0,
            updates: 0,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn replay_mut(&mut self) -> &mut ReplayBuffer {
        &mut self.replay
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn updates_done(&self) -> u64 {
        self.updates
    }

    pub fn target_entropy(&self) -> f64 {
        match self.cfg.train.target_entropy {
            TargetEntropy::NegActionDim => -(super::ACTION_DIM as f64),
            TargetEntropy::StateDim => self.model.obs_dim() as f64,
            TargetEntropy::Fixed(h) => h,
        }
    }

    /// Plays one episode with stochastic actions, updating after every slot
    /// once the buffer holds a minibatch.
    pub fn run_episode(&mut self) -> Result<EpisodeMetrics> {
        let start = Instant::now();
        let n = self.model.agents.len();
        let v_max = self.cfg.mdp.v_max;
        let mut obs = self.env.reset(self.env_rng.next_u64());
        let mut z = self.env.similarity().values;
        let (mut reward_sum, mut pen0, mut pen1) = (0.0, 0u64, 0u64);
        while !self.env.is_done() {
            let mut actions = Vec::with_capacity(n);
            let mut normalized = Vec::with_capacity(n);
            for (agent, o) in self.model.agents.iter().zip(&obs) {
                let a = act(&agent.policy, o, ActionMode::Stochastic, v_max, &mut self.noise_rng).map_err(diverged)?;
                actions.push(a.action);
                normalized.push(a.normalized);
            }
            let out = self.env.step(&actions)?;
            let z_next = self.env.similarity().values;
            reward_sum += out.rewards.iter().sum::<f64>();
            pen0 += out.penalties.iter().filter(|p| p[0]).count() as u64;
            pen1 += out.penalties.iter().filter(|p| p[1]).count() as u64;
            self.replay.push(Transition {
                obs: std::mem::take(&mut obs),
                actions: normalized,
                rewards: out.rewards,
                next_obs: out.observations.clone(),
                z: std::mem::take(&mut z),
                z_next: z_next.clone(),
            });
            obs = out.observations;
            z = z_next;
            if self.replay.len() >= self.cfg.train.minibatch {
                self.update()?;
            }
        }
        let metrics = EpisodeMetrics {
            episode: self.episode,
            r_ac: reward_sum / n as f64,
            h_total: self.env.h_total(),
            pen0,
            pen1,
            wall_time: start.elapsed().as_secs_f64(),
        };
        self.episode += 1;
        Ok(metrics)
    }

    pub fn train(&mut self, episodes: usize, mut on_episode: impl FnMut(&EpisodeMetrics)) -> Result<Vec<EpisodeMetrics>> {
        let mut all = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let m = self.run_episode()?;
            on_episode(&m);
            all.push(m);
        }
        Ok(all)
    }

    /// One update on a freshly sampled minibatch.
    pub fn update(&mut self) -> Result<UpdateLosses> {
        let batch = self.replay.sample(self.cfg.train.minibatch, &mut self.replay_rng);
        self.update_on(&batch)
    }

    /// One update of every network on `batch`: per agent the V, Q, policy
    /// and temperature steps followed by the target soft update, then the
    /// global critics.
    pub fn update_on(&mut self, batch: &Batch) -> Result<UpdateLosses> {
        let tc = self.cfg.train.clone();
        let n = batch.agents;
        let epsilon = tc.effective_epsilon();
        let target_entropy = self.target_entropy();
        let mut losses = UpdateLosses::default();

        let joint_obs = self.model.global.as_ref().map(|_| interleave(&batch.obs));
        let q_global = match (&self.model.global, &joint_obs) {
            (Some(g), Some(o)) => Some(global_value(&g.q, o, Some(&interleave(&batch.actions)), &batch.z, n).map_err(diverged)?),
            _ => None,
        };

        for u in 0..n {
            let agent = &mut self.model.agents[u];
            let opt = &mut self.opts[u];
            let (obs, acts) = (&batch.obs[u], &batch.actions[u]);

            let noise = draw_noise(batch.size, &mut self.noise_rng);
            let mut l = local_v_loss(agent, obs, &noise, tc.squash_correction).map_err(diverged)?;
            clip_grad_norm(&mut l.grads, tc.grad_clip);
            opt.v.step(&mut agent.v, &l.grads);
            losses.v.push(l.value);

            let y = local_q_target(agent, &batch.rewards[u], &batch.next_obs[u], tc.gamma, epsilon, q_global.as_ref())
                .map_err(diverged)?;
            for j in 0..2 {
                let mut l = local_q_loss(agent, j, obs, acts, &y).map_err(diverged)?;
                clip_grad_norm(&mut l.grads, tc.grad_clip);
                opt.q[j].step(&mut agent.q[j], &l.grads);
                if j == 0 {
                    losses.q0.push(l.value);
                } else {
                    losses.q1.push(l.value);
                }
            }

            let noise = draw_noise(batch.size, &mut self.noise_rng);
            let mut p = policy_loss(agent, obs, &noise, tc.squash_correction).map_err(diverged)?;
            clip_grad_norm(&mut p.loss.grads, tc.grad_clip);
            opt.policy.step(&mut agent.policy, &p.loss.grads);
            losses.policy.push(p.loss.value);

            let t = temperature_loss(agent.alpha, &p.log_probs, target_entropy).map_err(diverged)?;
            agent.alpha = (agent.alpha - tc.lr_alpha * t.grads[0].item()).max(MIN_ALPHA);
            losses.alpha.push(t.value);

            soft_update(&mut agent.v_target, &agent.v, tc.tau);
        }

        if let (Some(g), Some(gopt), Some(o)) = (self.model.global.as_mut(), self.gopt.as_mut(), joint_obs.as_ref()) {
            let mut fresh = Vec::with_capacity(n);
            for (agent, obs) in self.model.agents.iter().zip(&batch.obs) {
                let noise = draw_noise(batch.size, &mut self.noise_rng);
                let mut gr = Graph::new();
                let pi = agent.policy.net.bind(&mut gr, false);
                let s = gr.constant(obs.clone());
                let smp = sample_actions(&mut gr, &pi, s, &noise, tc.squash_correction).map_err(diverged)?;
                fresh.push(gr.value(smp.actions).clone());
            }
            let fresh = interleave(&fresh);
            let mut l = global_v_loss(g, o, &batch.z, &fresh, n).map_err(diverged)?;
            clip_grad_norm(&mut l.grads, tc.grad_clip);
            gopt.v.step(&mut g.v, &l.grads);
            losses.global_v = Some(l.value);

            let team = batch.team_reward(tc.global_reward == GlobalReward::Mean);
            let next_o = interleave(&batch.next_obs);
            let acts = interleave(&batch.actions);
            let mut l = global_q_loss(g, o, &acts, &batch.z, &team, &next_o, &batch.z_next, tc.gamma, n).map_err(diverged)?;
            clip_grad_norm(&mut l.grads, tc.grad_clip);
            gopt.q.step(&mut g.q, &l.grads);
            losses.global_q = Some(l.value);

            soft_update(&mut g.v_target, &g.v, tc.tau);
        }

        if !losses.all_finite() {
            return Err(Error::Diverged(format!("non-finite loss at update {}", self.updates)));
        }
        self.updates += 1;
        Ok(losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Params;

    fn tiny(variant: Variant) -> (WorldConfig, Scenario) {
        let mut cfg = WorldConfig::default();
        cfg.train.variant = variant;
        cfg.train.hidden_width = 8;
        cfg.train.minibatch = 8;
        let mut sc = Scenario::test2x3();
        sc.horizon = 12;
        (cfg, sc)
    }

    fn without_time(ms: &[EpisodeMetrics]) -> Vec<(usize, u64, u64, u64, u64)> {
        ms.iter().map(|m| (m.episode, m.r_ac.to_bits(), m.h_total, m.pen0, m.pen1)).collect()
    }

    #[test]
    fn same_seed_same_metrics() {
        let (cfg, sc) = tiny(Variant::Magrl);
        let a = Trainer::new(&cfg, &sc, 5).unwrap().train(3, |_| {}).unwrap();
        let b = Trainer::new(&cfg, &sc, 5).unwrap().train(3, |_| {}).unwrap();
        assert_eq!(without_time(&a), without_time(&b));
        let c = Trainer::new(&cfg, &sc, 6).unwrap().train(3, |_| {}).unwrap();
        assert_ne!(without_time(&a), without_time(&c));
    }

    #[test]
    fn updates_start_once_a_minibatch_is_stored() {
        let (cfg, sc) = tiny(Variant::MagrlG);
        let mut t = Trainer::new(&cfg, &sc, 1).unwrap();
        t.run_episode().unwrap();
        assert_eq!(t.replay().len(), 12);
        assert_eq!(t.updates_done(), 12 - 8 + 1);
        assert!(t.model.global.is_none());
    }

    fn filled(variant: Variant, seed: u64) -> Trainer {
        let (cfg, sc) = tiny(variant);
        let mut t = Trainer::new(&cfg, &sc, seed).unwrap();
        t.run_episode().unwrap();
        t
    }

    #[test]
    fn targets_move_only_by_soft_update() {
        let mut t = filled(Variant::Magrl, 2);
        let batch = t.replay().sample(8, &mut substream(0, 9));
        let before = t.model.clone();
        t.update_on(&batch).unwrap();
        let tau = t.config().train.tau;
        for (old, new) in before.agents.iter().zip(&t.model.agents) {
            assert_ne!(old.v, new.v);
            let mut expected = old.v_target.clone();
            soft_update(&mut expected, &new.v, tau);
            assert_eq!(new.v_target, expected);
        }
        let (old, new) = (before.global.unwrap(), t.model.global.clone().unwrap());
        let mut expected = old.v_target.clone();
        soft_update(&mut expected, &new.v, tau);
        assert_eq!(new.v_target, expected);
    }

    #[test]
    fn unit_epsilon_decouples_local_updates_from_global_state() {
        let mut a = filled(Variant::Magrl, 3);
        let mut b = filled(Variant::Magrl, 3);
        for t in [&mut a, &mut b] {
            t.cfg.train.epsilon = 1.0;
        }
        for p in b.model.global.as_mut().unwrap().q.params_mut() {
            for v in p.data_mut() {
                *v = -*v * 3.0 + 0.5;
            }
        }
        let batch = a.replay().sample(8, &mut substream(0, 9));
        a.update_on(&batch).unwrap();
        b.update_on(&batch).unwrap();
        assert_eq!(a.model.agents, b.model.agents);
    }

    #[test]
    fn temperature_stays_positive() {
        let mut t = filled(Variant::MagrlG, 4);
        t.cfg.train.lr_alpha = 1e3;
        let batch = t.replay().sample(8, &mut substream(0, 9));
        for _ in 0..3 {
            t.update_on(&batch).unwrap();
        }
        assert!(t.model.agents.iter().all(|a| a.alpha >= MIN_ALPHA));
    }

    #[test]
    fn non_finite_parameters_abort_training() {
        let mut t = filled(Variant::MagrlG, 5);
        t.model.agents[0].v.layers[0].weight.data_mut()[0] = f64::NAN;
        let batch = t.replay().sample(8, &mut substream(0, 9));
        assert!(matches!(t.update_on(&batch), Err(Error::Diverged(_))));
    }

    #[test]
    fn reward_variants() {
        assert_eq!(charging_reward(Variant::Magrl), ChargingReward::HoeWeighted);
        assert_eq!(charging_reward(Variant::MagrlHoe), ChargingReward::Plain);
        assert_eq!(charging_reward(Variant::MagrlHoeG), ChargingReward::Plain);
    }
}
