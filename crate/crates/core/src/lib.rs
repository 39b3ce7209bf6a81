//! Navigation of a city road grid with limited information.
//!
//! The crate simulates a car that has no GPS and no road map. It localizes with an
//! extended Kalman filter fed by odometry, a noisy compass and occasional fixes from a
//! sparse set of known landmarks, and it picks a direction at every intersection with a
//! compass-based decision law that penalizes repeated choices. A separate estimator infers
//! whether an intersection lies ahead and which turns it offers from binary environmental
//! cues (signs, lights, road surface, traffic).
//!
//! Modules:
//! - [`citygen`]: seeded gridded road networks, landmarks and start/goal pairs
//! - [`vehicle`]: kinematic bicycle model, path following and sensor emission
//! - [`estimator`]: pose EKF, lost criterion and landmark gating
//! - [`navigator`]: intersection decisions, visit memory and waypoint strategies
//! - [`scenestim`]: intersection scene estimation from cues
//! - [`harness`]: trials, Monte Carlo studies, persistence

pub mod citygen;
pub mod error;
pub mod estimator;
pub mod geom;
pub mod harness;
pub mod navigator;
pub mod scenestim;
pub mod seed;
pub mod vehicle;

pub use error::{Error, Result};
