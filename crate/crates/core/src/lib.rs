//! Kinematic optimization of planar manipulators by Grover amplitude
//! amplification over a discretized configuration space, with a
//! parameterized-circuit surrogate of forward kinematics and classical
//! baseline optimizers for query-count comparison.

pub mod baselines;
pub mod encoding;
pub mod error;
pub mod grover;
pub mod harness;
pub mod kinematics;
pub mod qml;
pub mod qsim;

pub use error::{Error, Result};
