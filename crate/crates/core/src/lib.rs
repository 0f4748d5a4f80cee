//! Energy-optimal quadruped jump planning on a planar single-rigid-body model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod constraints;
pub mod de_optimizer;
pub mod error;
pub mod fitness;
pub mod grf_profile;
pub mod leg_kinematics;
pub mod motion_library;
pub mod planner;
pub mod rollout_controller;
pub mod srb_model;
pub mod trajectory;

pub use error::{Error, Result};
