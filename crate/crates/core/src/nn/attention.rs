use rand::Rng;

use super::graph::{Graph, Var};
use super::layers::{collect_grads, Params};
use super::tensor::Tensor;
use crate::error::NnError;

/// Similarity-masked self-attention over a group of agents.
///
/// For a group observation `o` (`n x m`) and similarity `z` (`n x n`):
///
/// `out = softmax_rows((o Wq)(o Wk)^T / sqrt(m) ⊙ z) (o Wv) + o Wv`
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBlock {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
}

impl AttentionBlock {
    pub fn new(m: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (m.max(1) as f64).sqrt();
        Self {
            wq: Tensor::uniform(m, m, bound, rng),
            wk: Tensor::uniform(m, m, bound, rng),
            wv: Tensor::uniform(m, m, bound, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.rows()
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundAttention {
        let mut leaf = |t: &Tensor| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) };
        BoundAttention { wq: leaf(&self.wq), wk: leaf(&self.wk), wv: leaf(&self.wv), dim: self.dim() }
    }

    /// Features of a single group.
    pub fn features(&self, o: &Tensor, z: &Tensor) -> Result<Tensor, NnError> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let ov = g.constant(o.clone());
        let zv = g.constant(z.clone());
        let out = b.forward(&mut g, ov, zv, o.rows())?;
        Ok(g.value(out).clone())
    }
}

impl Params for AttentionBlock {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.wq, &self.wk, &self.wv]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.wq, &mut self.wk, &mut self.wv]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundAttention {
    wq: Var,
    wk: Var,
    wv: Var,
    dim: usize,
}

impl BoundAttention {
    /// `o` stacks groups of `n` rows; `z` stacks their `n x n` similarities.
    pub fn forward(&self, g: &mut Graph, o: Var, z: Var, n: usize) -> Result<Var, NnError> {
        let q = g.matmul(o, self.wq)?;
        let k = g.matmul(o, self.wk)?;
        let v = g.matmul(o, self.wv)?;
        let s = g.block_scores(q, k, n)?;
        let s = g.scale(s, 1.0 / (self.dim as f64).sqrt())?;
        let s = g.mul(s, z)?;
        let a = g.softmax_rows(s)?;
        let mixed = g.block_mix(a, v, n)?;
        g.add(mixed, v)
    }

    pub fn vars(&self) -> Vec<Var> {
        vec![self.wq, self.wk, self.wv]
    }

    pub fn grads(&self, g: &Graph) -> Vec<Tensor> {
        collect_grads(g, &self.vars())
    }
}
