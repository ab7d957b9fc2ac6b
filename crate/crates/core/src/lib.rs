//! Multi-UAV wireless energy transfer simulation and a multi-agent graph
//! reinforcement-learning trainer.
//!
//! UAVs at a fixed altitude broadcast RF energy to ground devices whose
//! demand is tracked by a hungry-level-of-energy (HoE) counter. Each UAV runs
//! a soft actor-critic agent; during training a central controller with
//! similarity-masked self-attention critics guides the local critics.

pub mod channel;
pub mod config;
pub mod energy;
pub mod env;
pub mod error;
pub mod harness;
pub mod hoe;
pub mod magrl;
pub mod nn;
pub mod scenario;

pub use config::{load_config, parse_config, TrainConfig, Variant, WorldConfig};
pub use error::{Error, Result};
pub use scenario::Scenario;
