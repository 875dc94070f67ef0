//! Online signature verification through the dynamics of writing robots.
//!
//! A pen trajectory is mapped onto a robot arm's workspace, inverse
//! kinematics turn it into joint angles, and Lagrangian inverse dynamics
//! turn those into joint torques. Angle and torque trajectories (plus their
//! derivatives) feed either an elastic trajectory matcher or a histogram
//! matcher, and a reference-based protocol measures verification error
//! rates.
//!
//! Modules, roughly in pipeline order:
//!
//! * [`ingest`]: device file parsing, SI conversion, pen-up removal,
//!   resampling, manifests.
//! * [`robot2d`]: planar two-link arm (closed-form kinematics and dynamics).
//! * [`robot3d`]: spatial three-link arm (DH kinematics, trace-form
//!   dynamics).
//! * [`features`]: differentiation, normalization, feature stacking,
//!   histograms.
//! * [`matchers`]: elastic and histogram verifiers.
//! * [`eval`]: trial protocol, error-rate curves, equal error rate.
//! * [`pipeline`]: configuration and end-to-end plumbing.
//! * [`synth`]: reproducible synthetic corpora for testing and benchmarks.

pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod matchers;
pub mod pipeline;
pub mod robot2d;
pub mod robot3d;
pub mod synth;

pub use error::{Error, Result};
