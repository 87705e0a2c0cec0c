//! Rediscovering equations of motion from rendered video.
//!
//! The pipeline is split into small modules that can be used on their own:
//!
//! * [`world`] simulates five kinematic scenarios with an exact discrete law.
//! * [`render`] turns trajectories into grayscale frames.
//! * [`observer`] localizes the object in each frame and builds sample tables.
//! * [`symreg`] discovers closed-form equations with genetic programming.
//! * [`baselines`] provides linear, ridge, tree and forest regressors.
//! * [`metrics`] scores localization and prediction.
//! * [`harness`] wires everything into reproducible experiments.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod observer;
pub mod render;
pub mod seed;
pub mod symreg;
pub mod world;

pub use error::{Error, Result};
