//! Multimodal variational autoencoder for sensorimotor prediction and
//! control, with a simulated redundant planar arm as the data source and
//! plant.
//!
//! The crate is organized bottom-up:
//! - [`linalg`] / [`autodiff`] / [`nn`]: dense math, the reverse-mode tape
//!   and the Adam optimizer shared by every learned model
//! - [`arm`]: the 4-DOF planar arm over a virtual keyboard (motor babbling,
//!   kinematics, an analytic inverse-kinematics oracle)
//! - [`dataset`]: 28-dim sensorimotor samples and the four-pattern
//!   mask-augmented training set
//! - [`model`]: the multimodal VAE and its training loop
//! - [`tasks`]: reconstruction metrics, iterated prediction, and the
//!   closed-loop imitation controller
//! - [`baselines`]: vanilla VAE and independent forward/inverse models plus
//!   the comparison harness
//! - [`io`] / [`config`]: file formats, checkpoints, run configuration

pub mod arm;
pub mod autodiff;
pub mod baselines;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod nn;
pub mod tasks;

pub use error::{Error, Result};
pub use linalg::Matrix;
