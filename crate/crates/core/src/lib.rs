//! Tabletop rearrangement planning over imagined top-down observations.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: SE(2) poses and the pixel/workspace mapping.
//! * [`observation`]: RGB + height rasters, rigid warps, crop/paste and L1 distances.
//! * [`simulator`]: a quasi-static block world with scripted experts and demo recording.
//! * [`foresight`]: next-observation predictors and the equivariance harness.
//! * [`proposal`]: action-value scoring and multi-modal place proposals.
//! * [`planner`]: tree search over imagined observations and discounted node values.
//! * [`harness`]: rollouts, benchmarks, logs and reports.

pub mod error;
pub mod geometry;
pub mod observation;
pub mod simulator;
pub mod foresight;
pub mod proposal;
pub mod planner;
pub mod harness;

pub use error::{Error, Result};
