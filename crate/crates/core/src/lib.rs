//! Absolute rovibrational partition functions from path-integral nested
//! sampling.
//!
//! A molecule is described by its atomic masses ([`coords::JacobiFrame`])
//! and a potential energy surface ([`potentials::PotentialModel`]). The
//! discretized path integral ([`ringpolymer::RingPolymerSystem`]) is
//! integrated over a box with nested sampling ([`sampler::ns_run`]) and the
//! evidence is turned into a partition function by [`estimator`].
//! [`oracle`] holds exact references used for validation.

pub mod coords;
pub mod error;
pub mod estimator;
pub mod oracle;
pub mod potentials;
pub mod ringpolymer;
pub mod sampler;
pub mod selftest;
pub mod units;

pub use error::{Error, Result};
