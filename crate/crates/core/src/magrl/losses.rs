//! Training objectives. Each returns the loss value and the gradients of
//! the one module it trains, in that module's parameter order. Regression
//! targets are evaluated without gradient.

use super::nets::{GlobalCritic, GlobalNets, LocalAgent};
use super::policy::sample_actions;
use crate::error::NnError;
use crate::nn::{Graph, Mlp, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct LossOut {
    pub value: f64,
    pub grads: Vec<Tensor>,
}

fn half_mse(g: &mut Graph, pred: Var, target: &Tensor) -> Result<Var, NnError> {
    let t = g.constant(target.clone());
    let d = g.sub(pred, t)?;
    let sq = g.square(d)?;
    let m = g.mean_all(sq)?;
    g.scale(m, 0.5)
}

/// `min(Q0, Q1)(s, a) - alpha log pi(a | s)` with `a` drawn from the
/// current policy using `noise`. `B x 1`.
pub fn soft_state_target(agent: &LocalAgent, obs: &Tensor, noise: &Tensor, squash: bool) -> Result<Tensor, NnError> {
    let mut g = Graph::new();
    let pi = agent.policy.net.bind(&mut g, false);
    let q0 = agent.q[0].bind(&mut g, false);
    let q1 = agent.q[1].bind(&mut g, false);
    let s = g.constant(obs.clone());
    let smp = sample_actions(&mut g, &pi, s, noise, squash)?;
    let sa = g.concat_cols(&[s, smp.actions])?;
    let a = q0.forward(&mut g, sa)?;
    let b = q1.forward(&mut g, sa)?;
    let qmin = g.min(a, b)?;
    let ent = g.scale(smp.log_prob, agent.alpha)?;
    let out = g.sub(qmin, ent)?;
    Ok(g.value(out).clone())
}

/// `1/2 mean (V0(s) - (Q_min(s, a') - alpha log pi(a'|s)))^2`; gradients for `agent.v`.
pub fn local_v_loss(agent: &LocalAgent, obs: &Tensor, noise: &Tensor, squash: bool) -> Result<LossOut, NnError> {
    let target = soft_state_target(agent, obs, noise, squash)?;
    regression_loss(&agent.v, obs, &target)
}

/// `epsilon (r + gamma V1(s')) + (1 - epsilon) Q_G`. The global term is
/// dropped when `global` is `None`, which requires `epsilon = 1`.
pub fn local_q_target(
    agent: &LocalAgent,
    rewards: &Tensor,
    next_obs: &Tensor,
    gamma: f64,
    epsilon: f64,
    global: Option<&Tensor>,
) -> Result<Tensor, NnError> {
    let next_v = agent.v_target.infer(next_obs)?;
    let mut y = Tensor::zeros(rewards.rows(), 1);
    for r in 0..rewards.rows() {
        let local = rewards.get(r, 0) + gamma * next_v.get(r, 0);
        let g = global.map_or(0.0, |q| q.get(r, 0));
        y.set(r, 0, epsilon * local + (1.0 - epsilon) * g);
    }
    Ok(y)
}

/// `1/2 mean (net(x) - target)^2`; gradients for `net`.
pub fn regression_loss(net: &Mlp, input: &Tensor, target: &Tensor) -> Result<LossOut, NnError> {
    let mut g = Graph::new();
    let b = net.bind(&mut g, true);
    let x = g.constant(input.clone());
    let pred = b.forward(&mut g, x)?;
    let loss = half_mse(&mut g, pred, target)?;
    g.backward(loss)?;
    Ok(LossOut { value: g.value(loss).item(), grads: b.grads(&g) })
}

/// `1/2 mean (Q_j(s, a) - y)^2`; gradients for `agent.q[j]`.
pub fn local_q_loss(agent: &LocalAgent, j: usize, obs: &Tensor, actions: &Tensor, target: &Tensor) -> Result<LossOut, NnError> {
    let sa = concat(obs, actions)?;
    regression_loss(&agent.q[j], &sa, target)
}

fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    let mut g = Graph::new();
    let (x, y) = (g.constant(a.clone()), g.constant(b.clone()));
    let c = g.concat_cols(&[x, y])?;
    Ok(g.value(c).clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyLossOut {
    pub loss: LossOut,
    /// Per-sample `log pi` of the reparameterized actions, `B x 1`.
    pub log_probs: Tensor,
}

/// `mean (alpha log pi(f(s; noise) | s) - Q_min(s, f(s; noise)))`;
/// gradients for `agent.policy`, flowing through the action into the
/// frozen critics.
pub fn policy_loss(agent: &LocalAgent, obs: &Tensor, noise: &Tensor, squash: bool) -> Result<PolicyLossOut, NnError> {
    let mut g = Graph::new();
    let pi = agent.policy.net.bind(&mut g, true);
    let q0 = agent.q[0].bind(&mut g, false);
    let q1 = agent.q[1].bind(&mut g, false);
    let s = g.constant(obs.clone());
    let smp = sample_actions(&mut g, &pi, s, noise, squash)?;
    let sa = g.concat_cols(&[s, smp.actions])?;
    let a = q0.forward(&mut g, sa)?;
    let b = q1.forward(&mut g, sa)?;
    let qmin = g.min(a, b)?;
    let ent = g.scale(smp.log_prob, agent.alpha)?;
    let per = g.sub(ent, qmin)?;
    let loss = g.mean_all(per)?;
    g.backward(loss)?;
    Ok(PolicyLossOut {
        loss: LossOut { value: g.value(loss).item(), grads: pi.grads(&g) },
        log_probs: g.value(smp.log_prob).clone(),
    })
}

/// `mean(-alpha (log pi + H))`; the single gradient is with respect to alpha.
pub fn temperature_loss(alpha: f64, log_probs: &Tensor, target_entropy: f64) -> Result<LossOut, NnError> {
    let mut g = Graph::new();
    let a = g.param(Tensor::scalar(alpha));
    let lp = g.constant(log_probs.map(|v| v + target_entropy));
    let prod = g.mul_scalar_var(lp, a)?;
    let m = g.mean_all(prod)?;
    let loss = g.scale(m, -1.0)?;
    g.backward(loss)?;
    Ok(LossOut { value: g.value(loss).item(), grads: vec![g.grad(a).cloned().unwrap_or_else(|| Tensor::scalar(0.0))] })
}

/// Global critic output without gradient, `B x 1`.
pub fn global_value(
    critic: &GlobalCritic,
    o: &Tensor,
    actions: Option<&Tensor>,
    z: &Tensor,
    n: usize,
) -> Result<Tensor, NnError> {
    let mut g = Graph::new();
    let b = critic.bind(&mut g, false);
    let ov = g.constant(o.clone());
    let av = actions.map(|a| g.constant(a.clone()));
    let zv = g.constant(z.clone());
    let out = b.forward(&mut g, ov, av, zv, n)?;
    Ok(g.value(out).clone())
}

fn global_regression(
    critic: &GlobalCritic,
    o: &Tensor,
    actions: Option<&Tensor>,
    z: &Tensor,
    n: usize,
    target: &Tensor,
) -> Result<LossOut, NnError> {
    let mut g = Graph::new();
    let b = critic.bind(&mut g, true);
    let ov = g.constant(o.clone());
    let av = actions.map(|a| g.constant(a.clone()));
    let zv = g.constant(z.clone());
    let pred = b.forward(&mut g, ov, av, zv, n)?;
    let loss = half_mse(&mut g, pred, target)?;
    g.backward(loss)?;
    Ok(LossOut { value: g.value(loss).item(), grads: b.grads(&g) })
}

/// `1/2 mean (V_G0(o, Z) - Q_G(o, a', Z))^2` with `a'` the joint action
/// freshly drawn from the current policies; gradients for `nets.v`.
pub fn global_v_loss(nets: &GlobalNets, o: &Tensor, z: &Tensor, fresh_actions: &Tensor, n: usize) -> Result<LossOut, NnError> {
    let target = global_value(&nets.q, o, Some(fresh_actions), z, n)?;
    global_regression(&nets.v, o, None, z, n, &target)
}

/// `1/2 mean (Q_G(o, a, Z) - (r + gamma V_G1(o', Z')))^2`; gradients for `nets.q`.
#[allow(clippy::too_many_arguments)]
pub fn global_q_loss(
    nets: &GlobalNets,
    o: &Tensor,
    actions: &Tensor,
    z: &Tensor,
    team_reward: &Tensor,
    next_o: &Tensor,
    next_z: &Tensor,
    gamma: f64,
    n: usize,
) -> Result<LossOut, NnError> {
    let next_v = global_value(&nets.v_target, next_o, None, next_z, n)?;
    let data = team_reward.data().iter().zip(next_v.data()).map(|(r, v)| r + gamma * v).collect();
    let target = Tensor::from_vec(team_reward.rows(), 1, data)?;
    global_regression(&nets.q, o, Some(actions), z, n, &target)
}
