// SPDX-License-Identifier: Apache-2.0

//! TOML experiment descriptions.
//!
//! ```toml
//! [config]
//! B0 = 0.18348
//! n1 = 256
//!
//! [[system.nuclei]]
//! position = [0.0, 3.567e-10, 1.0701e-9]
//! polarization = 0.5
//!
//! [experiment.jspec2d]
//! n_echoes = 1
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nvnmr_core::experiments::{ExperimentSpec, FidExperiment, Hyperfine2dExperiment, Jspec2dExperiment};
use nvnmr_core::vec3;
use nvnmr_core::{validate, ExperimentConfig, SpinSystemSpec, ValidationReport};
use serde::{Deserialize, Serialize};

/// Keys accepted in a config file, for help output.
pub const CONFIG_KEYS: &str = "\
Config file keys (TOML, SI units, angles in rad, couplings in rad/s):
  [config]
    B0                 bias field magnitude, T
    nv_axis            quantization axis [x, y, z]; normalized on load
    t1_dwell, n1       direct-dimension dwell (s) and sample count
    t2_dwell, n2       indirect-dimension increment (s) and row count
    t_pi_mw1, t_pi_mw2 mw pi-pulse durations, s
    t_pi_rf            rf pi-pulse duration, s
    tau_weak           weak-measurement interaction time, s
    T2n                nuclear coherence time along t1, s
    T2n_indirect       optional decay time along t2, s
    pumping_fidelity   NV repolarization fidelity in [0, 1]
    readout_model      \"expectation\" or { stochastic = { seed = N, shots = M } }
    constants          table: mu0_over_4pi, hbar, gamma_n, gamma_e, a0
  [system]
    include_internuclear, max_nuclei
    [[system.nuclei]]  position = [x, y, z] (m)  or  couplings = { a_par, a_perp, phi }
                       polarization in [-1, 1]
    [[system.explicit_pair_couplings]]  i, j, omega_d (rad/s); coupling-only systems
  [experiment.fid]          rf_phase, finite_pulses
  [experiment.hyperfine2d]  invert_both_transitions, finite_pulses, strict, modulation_period
  [experiment.jspec2d]      n_echoes, rf_phase, finite_pulses";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fid: Option<FidExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperfine2d: Option<Hyperfine2dExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jspec2d: Option<Jspec2dExperiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub config: ExperimentConfig,
    pub system: SpinSystemSpec,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", format_report(.0))]
    Invalid(ValidationReport),
}

fn format_report(report: &ValidationReport) -> String {
    report.violations.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n")
}

impl ConfigFile {
    /// Parses TOML text, normalizes `nv_axis` and validates.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(axis) = vec3::normalized(&file.config.nv_axis) {
            file.config.nv_axis = axis;
        }
        let report = validate(&file.config, &file.system);
        if !report.passed() {
            return Err(ConfigError::Invalid(report));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        if !path.exists() {
            return Err(ConfigError::NotFound(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    /// Experiment settings for the named protocol; defaults when the section is absent.
    pub fn experiment(&self, name: &str) -> Option<ExperimentSpec> {
        match name {
            "fid" => Some(ExperimentSpec::Fid(self.experiment.fid.clone().unwrap_or_default())),
            "hyperfine2d" => Some(ExperimentSpec::Hyperfine2d(self.experiment.hyperfine2d.clone().unwrap_or_default())),
            "jspec2d" => Some(ExperimentSpec::Jspec2d(self.experiment.jspec2d.clone().unwrap_or_default())),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nvnmr_core::ReadoutModel;

    const MINIMAL: &str = r#"
[config]
B0 = 0.18348
nv_axis = [1.0, 1.0, 1.0]
n1 = 32
readout_model = { stochastic = { seed = 3, shots = 100 } }

[[system.nuclei]]
couplings = { a_par = 6.0e4, a_perp = 1.2e5, phi = 0.0 }
polarization = 0.4

[experiment.jspec2d]
n_echoes = 2
"#;

    #[test]
    fn parses_and_normalizes() {
        let f = ConfigFile::from_toml(MINIMAL).unwrap();
        assert!((vec3::norm(&f.config.nv_axis) - 1.0).abs() < 1e-15);
        assert_eq!(f.config.n1, 32);
        assert_eq!(f.config.readout_model, ReadoutModel::Stochastic { seed: 3, shots: 100 });
        assert_eq!(f.system.nuclei.len(), 1);
        match f.experiment("jspec2d").unwrap() {
            ExperimentSpec::Jspec2d(j) => assert_eq!(j.n_echoes, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(f.experiment("hyperfine2d"), Some(ExperimentSpec::Hyperfine2d(_))));
        assert!(f.experiment("nmr").is_none());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("n1 = 32", "n1 = 32\nbogus = 1");
        assert!(matches!(ConfigFile::from_toml(&text), Err(ConfigError::Parse(_))));
        let text = MINIMAL.replace("polarization = 0.4", "polarization = 0.4\nspin = 1");
        assert!(matches!(ConfigFile::from_toml(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn validation_failures_reported() {
        let text = MINIMAL.replace("n1 = 32", "n1 = 0");
        match ConfigFile::from_toml(&text) {
            Err(ConfigError::Invalid(r)) => assert!(!r.passed()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file() {
        let e = ConfigFile::load(Path::new("/nonexistent/missing.toml")).unwrap_err();
        assert!(e.to_string().contains("config not found"));
    }

    #[test]
    fn help_lists_every_config_field() {
        let json = serde_json::to_value(ExperimentConfig::default()).unwrap();
        for key in json.as_object().unwrap().keys() {
            assert!(CONFIG_KEYS.contains(key.as_str()), "{key} missing from help");
        }
    }
}
