//! Concave value-function factorization for cooperative multi-agent
//! reinforcement learning.

pub mod actsel;
pub mod diffcore;
pub mod envs;
mod error;
pub mod harness;
pub mod learner;
pub mod nets;
pub mod theorylab;

pub use error::{Error, Result};
