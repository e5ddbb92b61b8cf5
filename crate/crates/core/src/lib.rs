//! Multi-agent deep reinforcement learning for mobile wireless sensor network coverage.
//!
//! Each sensor is an independent Dueling Double-DQN learner with prioritized
//! replay. Sensors move on a 2-D field to maximize the area they jointly
//! cover, guided toward a lattice of target sites; an overhead-camera
//! pipeline can replace ground-truth positions in the agents' observations.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod nn;
pub mod replay;
pub mod reward;
pub mod rollout;
pub mod scale;
pub mod seed;
pub mod trainer;
pub mod vision;

pub use error::{Error, Result};
