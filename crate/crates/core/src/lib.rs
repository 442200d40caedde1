//! Parking path planning in constrained spaces: a kinematic parking
//! environment with a chunked-action PPO planner, and a Hybrid A* /
//! Reeds–Shepp baseline with a shared evaluation harness.

pub mod config;
pub mod curriculum;
pub mod env;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod hybrid_astar;
pub mod kinematics;
pub mod policy;
pub mod ppo;
pub mod reeds_shepp;
pub mod scenario;
pub mod svg;

pub use error::{Error, Result};
