// SPDX-License-Identifier: Apache-2.0

//! Density-matrix simulation and spectral inversion for multidimensional
//! single-spin NMR of 13C clusters around an NV center.
//!
//! The crate is `no_std` with `alloc`. File formats, the command line and
//! thread-parallel execution live in the `nvnmr` companion crate.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod linalg;
pub mod spectral;
pub mod vec3;

pub use config::{
    larmor_frequency, validate, ExperimentConfig, HyperfineCouplings, NuclearSpinSpec,
    PhysicalConstants, ReadoutModel, SpinSystemSpec, ValidationReport,
};
pub use error::{Error, Result};
