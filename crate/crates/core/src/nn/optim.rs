use super::layers::Params;
use super::tensor::Tensor;

/// `p <- p - lr * g` for every parameter.
pub fn sgd_step<P: Params + ?Sized>(module: &mut P, grads: &[Tensor], lr: f64) {
    for (p, g) in module.params_mut().into_iter().zip(grads) {
        for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
            *w -= lr * d;
        }
    }
}

/// `target <- tau * target + (1 - tau) * online`.
pub fn soft_update<P: Params + ?Sized>(target: &mut P, online: &P, tau: f64) {
    for (t, o) in target.params_mut().into_iter().zip(online.params()) {
        for (a, b) in t.data_mut().iter_mut().zip(o.data()) {
            *a = tau * *a + (1.0 - tau) * b;
        }
    }
}

pub fn grad_norm(grads: &[Tensor]) -> f64 {
    grads.iter().map(Tensor::sq_norm).sum::<f64>().sqrt()
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= k;
            }
        }
    }
    norm
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new<P: Params + ?Sized>(module: &P, lr: f64) -> Self {
        let zeros: Vec<Tensor> = module.params().iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, steps: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step<P: Params + ?Sized>(&mut self, module: &mut P, grads: &[Tensor]) {
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powi(self.steps.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - self.beta2.powi(self.steps.min(i32::MAX as u64) as i32);
        for (((p, g), m), v) in module.params_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((w, &d), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * d;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * d * d;
                *w -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Update rule applied to one module.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam(Adam),
}

impl Optimizer {
    pub fn step<P: Params + ?Sized>(&mut self, module: &mut P, grads: &[Tensor]) {
        match self {
            Self::Sgd { lr } => sgd_step(module, grads, *lr),
            Self::Adam(a) => a.step(module, grads),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{Activation, Mlp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> Mlp {
        Mlp::new(&[3, 4, 1], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn dist(a: &Mlp, b: &Mlp) -> f64 {
        a.params()
            .iter()
            .zip(b.params())
            .map(|(x, y)| x.data().iter().zip(y.data()).map(|(p, q)| (p - q).powi(2)).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn soft_update_contracts_toward_online() {
        let online = net(1);
        let mut target = net(2);
        let before = dist(&target, &online);
        soft_update(&mut target, &online, 0.9);
        let after = dist(&target, &online);
        assert!((after - 0.9 * before).abs() < 1e-12);
    }

    #[test]
    fn soft_update_extremes() {
        let online = net(1);
        let mut t = net(2);
        soft_update(&mut t, &online, 0.0);
        assert_eq!(t, online);
        let mut t = net(2);
        soft_update(&mut t, &online, 1.0);
        assert_eq!(t, net(2));
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut a = net(1);
        let grads: Vec<Tensor> = a.params().iter().map(|t| Tensor::filled(t.rows(), t.cols(), 3.0)).collect();
        sgd_step(&mut a, &grads, 0.0);
        assert_eq!(a, net(1));
        sgd_step(&mut a, &grads, 0.5);
        assert_eq!(a.layers[1].bias.item(), net(1).layers[1].bias.item() - 1.5);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![Tensor::from_vec(1, 2, vec![3.0, 4.0]).unwrap()];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((grad_norm(&g) - 1.0).abs() < 1e-15);
        assert_eq!(clip_grad_norm(&mut g, 10.0), grad_norm(&g));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut a = net(1);
        let grads: Vec<Tensor> = a.params().iter().map(|t| Tensor::filled(t.rows(), t.cols(), -0.3)).collect();
        let mut opt = Adam::new(&a, 0.01);
        opt.step(&mut a, &grads);
        let d = a.layers[0].bias.get(0, 0) - net(1).layers[0].bias.get(0, 0);
        assert!((d - 0.01).abs() < 1e-6);
    }
}
