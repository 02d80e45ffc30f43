//! Simulation and verification toolkit for excited random walks and their
//! diffusion limit, excited Brownian motion.

pub mod audit;
pub mod cli;
pub mod density;
pub mod ebm;
pub mod environment;
pub mod error;
pub mod excitation;
pub mod experiments;
pub mod occupancy;
pub mod parallel;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
