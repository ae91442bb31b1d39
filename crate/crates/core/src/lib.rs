//! Decentralized risk-aware multi-robot exploration, simulated tick by tick.
//!
//! Robots explore a grid containing point radiation sources. DORA robots
//! share two belief maps (sensed radiation and last-visit time) through a
//! virtual stigmergy and steer down the local gradients of both. Frontier
//! exploration and a random walk are provided as baselines.

pub mod cli;
pub mod config;
pub mod control;
pub mod engine;
pub mod error;
pub mod export;
pub mod geometry;
pub mod risk;
pub mod rng;
pub mod stigmergy;
pub mod world;

pub use config::SimConfig;
pub use error::{Error, Result};
