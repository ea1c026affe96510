//! Packet speed and cost of potential-based geographic routing in a mobile
//! wireless network: discretized Markov-chain analysis and Monte Carlo simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod cli;
pub mod error;
pub mod export;
pub mod geometry;
pub mod model;
pub mod quadrature;
pub mod sim;
pub mod stage;
pub mod sweep;

pub use chain::{analyze, Analysis, AnalysisOptions, Metrics};
pub use error::{DtnError, Result};
pub use model::{default_params, ModelConfig, ModelParams};
pub use sim::{estimate, SimConfig, SimEstimate};
pub use stage::{Resolution, StageModel};
