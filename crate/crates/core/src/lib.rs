//! Bregman plug-and-play restoration for Poisson inverse problems.

pub mod autodiff;
pub mod convolution;
pub mod denoiser;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod noise;
pub mod poisson;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
