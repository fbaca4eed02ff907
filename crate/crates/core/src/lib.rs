//! Task-oriented grasp quality: mesh geometry, a parametric three-finger
//! hand, grasp and task metrics, affordance scoring and dataset generation.

pub mod affordance;
pub mod exec;
pub mod geom;
pub mod hand;
pub mod lpsolve;
pub mod metrics;
pub mod pipeline;
pub mod render;
