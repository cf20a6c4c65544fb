//! Co-evolution of robot body graphs and graph-network controllers.

pub mod autodiff;
pub mod baselines;
pub mod envs;
pub mod morphology;
pub mod nervenet;
pub mod params;
pub mod policy;
pub mod ppo;
pub mod util;
pub mod mutation;
pub mod surrogate;
pub mod evolution;
pub mod fixtures;
pub mod config;
pub mod cli;
