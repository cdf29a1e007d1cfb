//! Simulator and control stack for a scotch-yoke robotic fish: tail
//! kinematics, hydrodynamic loads, cyclic-differential yaw control,
//! pectoral pitch/roll control, and a replay/calibration harness.

// `!(x > 0.0)` is how parameter checks reject NaN along with non-positives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod hydro;
pub mod mechanism;

pub use error::{Error, Result};
