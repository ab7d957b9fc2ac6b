//! Small dense neural-network toolkit: tensors, a differentiable tape,
//! layers, similarity-masked attention and optimizers.

mod attention;
mod graph;
mod layers;
mod optim;
mod tensor;

pub use attention::{AttentionBlock, BoundAttention};
pub use graph::{softplus, Graph, Var};
pub use layers::{collect_grads, Activation, BoundLinear, BoundMlp, Linear, Mlp, Params};
pub use optim::{clip_grad_norm, grad_norm, sgd_step, soft_update, Adam, Optimizer};
pub use tensor::Tensor;
