//! Multicast beamforming for pinching-antenna systems: dielectric waveguides
//! whose radiating elements can be clipped on at arbitrary positions.
//!
//! The crate covers the line-of-sight channel model, closed-form single
//! antenna placement, element-wise position search, joint transmit/pinching
//! optimization by minorize-maximize, fixed-array baselines, and a seeded
//! Monte Carlo harness.

pub mod analytic;
pub mod baselines;
pub mod elementwise;
pub mod error;
pub mod experiments;
pub mod joint;
pub mod model;
pub mod qcqp;

pub use error::{Error, Result};
