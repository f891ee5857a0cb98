// SPDX-License-Identifier: Apache-2.0

//! File formats, configuration, parallel sweeps and the `nvnmr` command line.

pub mod cli;
pub mod config_file;
pub mod container;
pub mod parallel;
pub mod pipeline;
