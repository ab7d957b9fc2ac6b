use rand::Rng;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::NnError;

/// A module exposing its trainable tensors in a fixed order.
pub trait Params {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}

/// Gradients of `vars`, with zeros for those the loss did not reach.
pub fn collect_grads(g: &Graph, vars: &[Var]) -> Vec<Tensor> {
    vars.iter()
        .map(|&v| {
            g.grad(v).cloned().unwrap_or_else(|| {
                let t = g.value(v);
                Tensor::zeros(t.rows(), t.cols())
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, g: &mut Graph, x: Var) -> Result<Var, NnError> {
        match self {
            Self::Tanh => g.tanh(x),
            Self::Relu => g.relu(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `in x out`
    pub weight: Tensor,
    /// `1 x out`
    pub bias: Tensor,
}

impl Linear {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Self { weight: Tensor::uniform(input, output, bound, rng), bias: Tensor::uniform(1, output, bound, rng) }
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundLinear {
        let leaf = |g: &mut Graph, t: &Tensor| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) };
        BoundLinear { weight: leaf(g, &self.weight), bias: leaf(g, &self.bias) }
    }
}

impl Params for Linear {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundLinear {
    pub weight: Var,
    pub bias: Var,
}

impl BoundLinear {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var, NnError> {
        let h = g.matmul(x, self.weight)?;
        g.add_row(h, self.bias)
    }

    pub fn vars(&self) -> Vec<Var> {
        vec![self.weight, self.bias]
    }
}

/// Fully connected network with a shared hidden activation and a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    /// `sizes` lists the input width, hidden widths and output width.
    pub fn new(sizes: &[usize], activation: Activation, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least an input and an output size");
        let layers = sizes.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect();
        Self { layers, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.cols()
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundMlp {
        BoundMlp { layers: self.layers.iter().map(|l| l.bind(g, trainable)).collect(), activation: self.activation }
    }

    /// Forward pass outside any training graph.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let y = b.forward(&mut g, xv)?;
        Ok(g.value(y).clone())
    }
}

impl Params for Mlp {
    fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct BoundMlp {
    layers: Vec<BoundLinear>,
    activation: Activation,
}

impl BoundMlp {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var, NnError> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(g, h)?;
            if i < last {
                h = self.activation.apply(g, h)?;
            }
        }
        Ok(h)
    }

    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(BoundLinear::vars).collect()
    }

    pub fn grads(&self, g: &Graph) -> Vec<Tensor> {
        collect_grads(g, &self.vars())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss_of(mlp: &Mlp, x: &Tensor, y: &Tensor) -> f64 {
        let mut g = Graph::new();
        let b = mlp.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let yv = g.constant(y.clone());
        let out = b.forward(&mut g, xv).unwrap();
        let d = g.sub(out, yv).unwrap();
        let sq = g.square(d).unwrap();
        let l = g.mean_all(sq).unwrap();
        g.value(l).item()
    }

    fn mlp_finite_difference(act: Activation) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mlp = Mlp::new(&[3, 5, 4, 2], act, &mut rng);
        let x = Tensor::uniform(4, 3, 1.0, &mut rng);
        let y = Tensor::uniform(4, 2, 1.0, &mut rng);

        let mut g = Graph::new();
        let b = mlp.bind(&mut g, true);
        let xv = g.constant(x.clone());
        let yv = g.constant(y.clone());
        let out = b.forward(&mut g, xv).unwrap();
        let d = g.sub(out, yv).unwrap();
        let sq = g.square(d).unwrap();
        let l = g.mean_all(sq).unwrap();
        g.backward(l).unwrap();
        let grads = b.grads(&g);

        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for p in 0..grads.len() {
            for e in 0..grads[p].len() {
                let mut plus = mlp.clone();
                plus.params_mut()[p].data_mut()[e] += h;
                let mut minus = mlp.clone();
                minus.params_mut()[p].data_mut()[e] -= h;
                let numeric = (loss_of(&plus, &x, &y) - loss_of(&minus, &x, &y)) / (2.0 * h);
                let analytic = grads[p].data()[e];
                let rel = (analytic - numeric).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn tanh_mlp_gradient_matches_finite_difference() {
        mlp_finite_difference(Activation::Tanh);
    }

    #[test]
    fn relu_mlp_gradient_matches_finite_difference() {
        mlp_finite_difference(Activation::Relu);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Mlp::new(&[4, 8, 1], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(1));
        let b = Mlp::new(&[4, 8, 1], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert!(a.layers[0].weight.data().iter().all(|w| w.abs() <= 0.5));
        assert_eq!(a.num_params(), 4 * 8 + 8 + 8 + 1);
        assert_eq!((a.input_dim(), a.output_dim()), (4, 1));
    }
}
