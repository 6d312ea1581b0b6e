//! Quadruped locomotion on an oscillating footbridge: trunk and leg
//! simulation, reward shaping for gait styles, a PPO trainer and gait
//! analysis tools.

pub mod analysis;
pub mod bridge;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod env;
pub mod eval;
pub mod error;
pub mod ppo;
pub mod quadruped;
pub mod rewards;
pub mod simcore;

pub use error::{Error, Result};
