//! Cost-minimizing cloud instance planning for real-time camera stream
//! analysis on CPUs and GPUs.
//!
//! The pipeline is: [`catalog`] instance types and [`profiles`] of the
//! analysis programs feed [`model::build_instance`], which produces a
//! multiple-choice vector bin packing instance ([`packing`]). The
//! [`solver`] finds a minimum-cost packing, [`model::solution_to_plan`]
//! turns it into a deployment [`model::Plan`], and the [`simulator`]
//! estimates the utilization and frame-rate performance of any plan.

pub mod catalog;
pub mod cost;
pub mod fixtures;
pub mod model;
pub mod packing;
pub mod profiles;
pub mod simulator;
pub mod solver;
pub mod testing;

pub use catalog::{load_catalog, Catalog, InstanceType, ResourceVector};
pub use cost::Cost;
pub use model::{Plan, Strategy, StreamRequest};
pub use profiles::{Profile, ProfileStore};
