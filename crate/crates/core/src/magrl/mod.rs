//! Multi-agent soft actor-critic with attention-based global critics.
//!
//! Each UAV owns a squashed-Gaussian policy, twin Q critics, an online and a
//! target V critic and a temperature. Unless the variant disables it, a
//! central set of critics reads every UAV's observation through a
//! similarity-masked attention block; its Q-value is mixed into the local Q
//! targets with weight `1 - epsilon`.

pub mod checkpoint;
mod eval;
pub mod losses;
mod nets;
mod policy;
mod replay;
mod trainer;

pub use eval::{evaluate, EvalReport};
pub use nets::{BoundGlobalCritic, GlobalCritic, GlobalNets, LocalAgent};
pub use policy::{
    act, draw_noise, mean_actions, sample_actions, to_env_action, ActionMode, Policy, PolicyAction, Sampled, ACTION_DIM,
};
pub use replay::{interleave, Batch, ReplayBuffer, Transition};
pub use trainer::{charging_reward, streams, substream, EpisodeMetrics, Model, Trainer, UpdateLosses, MIN_ALPHA};
