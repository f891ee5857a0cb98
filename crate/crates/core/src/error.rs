// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;

/// Errors raised by the simulation and analysis kernel.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("singular position: nucleus coincides with the NV center")]
    SingularPosition,
    #[error("coincident nuclei: pair sites are identical")]
    CoincidentNuclei,
    #[error("enumeration too large: radius {radius} m exceeds cap {cap} m")]
    EnumerationTooLarge { radius: f64, cap: f64 },
    #[error("unphysical couplings: no point-dipole position with r > {min_radius} m reproduces them")]
    UnphysicalCouplings { min_radius: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Hilbert space cap exceeded: {nuclei} nuclei, cap {cap}")]
    DimensionOverflow { nuclei: usize, cap: usize },
    #[error("non-finite duration {0}")]
    NonFiniteDuration(f64),
    #[error("non-commensurate modulation period: T = {period} s, expected {expected} s")]
    NonCommensurate { period: f64, expected: f64 },
    #[error("non-finite value in input data")]
    NonFiniteData,
    #[error("row {row} failed: {message}")]
    RowFailed { row: usize, message: String },
}

pub type Result<T> = core::result::Result<T, Error>;
