// SPDX-License-Identifier: Apache-2.0

//! Physical constants and the declarative description of an experiment:
//! bias field, acquisition grid, pulse timings and the nuclear cluster.
//!
//! Couplings are angular frequencies (rad/s) everywhere inside the crate.
//! Hz only appears at the I/O boundary and in the frequency/hyperfine
//! conversion of the analysis layer.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::vec3::{self, Vec3};

/// Default Hilbert-space cap: 7 nuclei, dimension 3 * 2^7 = 384.
pub const DEFAULT_MAX_NUCLEI: usize = 7;

/// Bias field giving a bare 13C Larmor frequency of 1965 kHz.
pub const DEFAULT_B0: f64 = 0.18348;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// mu0 / 4 pi in T m / A.
    pub mu0_over_4pi: f64,
    /// Reduced Planck constant in J s.
    pub hbar: f64,
    /// 13C gyromagnetic ratio in rad s^-1 T^-1.
    pub gamma_n: f64,
    /// NV electron gyromagnetic ratio in rad s^-1 T^-1.
    pub gamma_e: f64,
    /// Diamond conventional cubic lattice constant in m.
    pub a0: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            mu0_over_4pi: 1e-7,
            hbar: 1.054_571_817e-34,
            gamma_n: 2.0 * PI * 10.71e6,
            gamma_e: 2.0 * PI * 28.03e9,
            a0: 3.567e-10,
        }
    }
}

impl PhysicalConstants {
    /// Point-dipole electron-nuclear prefactor K = (mu0/4pi) gamma_e gamma_n hbar,
    /// in rad/s * m^3.
    pub fn hyperfine_prefactor(&self) -> f64 {
        self.mu0_over_4pi * self.gamma_e * self.gamma_n * self.hbar
    }

    /// Nuclear-nuclear prefactor (mu0/4pi) hbar gamma_n^2, in rad/s * m^3.
    pub fn nuclear_dipolar_prefactor(&self) -> f64 {
        self.mu0_over_4pi * self.hbar * self.gamma_n * self.gamma_n
    }

    fn check(&self, out: &mut Vec<String>) {
        let all = [
            ("mu0_over_4pi", self.mu0_over_4pi),
            ("hbar", self.hbar),
            ("gamma_n", self.gamma_n),
            ("gamma_e", self.gamma_e),
            ("a0", self.a0),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("constant {name} must be finite and positive"));
            }
        }
        if !(3.5e-10..=3.6e-10).contains(&self.a0) {
            out.push(format!("lattice constant a0 = {} m outside [3.5e-10, 3.6e-10]", self.a0));
        }
    }
}

/// How weak-measurement outcomes are turned into recorded samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ReadoutModel {
    /// Ensemble-limit expectation value of the NV population contrast.
    #[default]
    Expectation,
    /// Mean of `shots` seeded single-shot +-1 outcomes per sample.
    Stochastic { seed: u64, shots: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Bias field magnitude, T. Applied along `nv_axis`.
    #[serde(rename = "B0")]
    pub b0: f64,
    /// Quantization axis in lattice coordinates, unit length.
    pub nv_axis: Vec3,
    pub t1_dwell: f64,
    pub n1: usize,
    pub t2_dwell: f64,
    pub n2: usize,
    pub t_pi_mw1: f64,
    pub t_pi_mw2: f64,
    pub t_pi_rf: f64,
    /// Sensing window of one weak-measurement block.
    pub tau_weak: f64,
    /// Phenomenological nuclear coherence time along t1.
    #[serde(rename = "T2n")]
    pub t2n: f64,
    /// Optional decay constant along the indirect dimension. Absent means
    /// no t2 envelope.
    #[serde(rename = "T2n_indirect")]
    pub t2n_indirect: Option<f64>,
    /// Probability that an NV reset lands in m_s = 0.
    pub pumping_fidelity: f64,
    pub readout_model: ReadoutModel,
    pub constants: PhysicalConstants,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = 1.0 / Float::sqrt(3f64);
        Self {
            b0: DEFAULT_B0,
            nv_axis: [s, s, s],
            t1_dwell: 11.36e-6,
            n1: 256,
            t2_dwell: 11.2e-6,
            n2: 64,
            t_pi_mw1: 20e-9,
            t_pi_mw2: 80e-9,
            t_pi_rf: 8e-6,
            tau_weak: 2e-6,
            t2n: 10e-3,
            t2n_indirect: None,
            pumping_fidelity: 1.0,
            readout_model: ReadoutModel::Expectation,
            constants: PhysicalConstants::default(),
        }
    }
}

impl ExperimentConfig {
    /// Bare nuclear Larmor angular frequency omega0 = gamma_n B0.
    pub fn omega0(&self) -> f64 {
        self.constants.gamma_n * self.b0
    }

    /// One nuclear Larmor period 2 pi / omega0.
    pub fn larmor_period(&self) -> f64 {
        2.0 * PI / self.omega0()
    }

    fn check(&self, out: &mut Vec<String>) {
        self.constants.check(out);
        if !(self.b0.is_finite() && self.b0 > 0.0) {
            out.push(format!("bias field B0 = {} T must be positive", self.b0));
        }
        let norm = vec3::norm(&self.nv_axis);
        if !(norm.is_finite() && (norm - 1.0).abs() < 1e-9) {
            out.push(String::from("nv_axis must be a unit vector"));
        }
        let durations = [
            ("t1_dwell", self.t1_dwell),
            ("t2_dwell", self.t2_dwell),
            ("t_pi_mw1", self.t_pi_mw1),
            ("t_pi_mw2", self.t_pi_mw2),
            ("t_pi_rf", self.t_pi_rf),
            ("tau_weak", self.tau_weak),
            ("T2n", self.t2n),
        ];
        for (name, v) in durations {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("duration {name} must be positive"));
            }
        }
        if let Some(t) = self.t2n_indirect {
            if !(t.is_finite() && t > 0.0) {
                out.push(String::from("duration T2n_indirect must be positive"));
            }
        }
        if self.n1 == 0 || self.n2 == 0 {
            out.push(String::from("n1 and n2 must be at least 1"));
        }
        if self.tau_weak > self.t1_dwell {
            out.push(String::from("weak-measurement window tau_weak exceeds t1_dwell"));
        }
        if !(0.0..=1.0).contains(&self.pumping_fidelity) {
            out.push(String::from("pumping_fidelity must lie in [0, 1]"));
        }
        if let ReadoutModel::Stochastic { shots: 0, .. } = self.readout_model {
            out.push(String::from("stochastic readout needs at least one shot"));
        }
    }
}

/// Secular hyperfine parameters of one nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineCouplings {
    /// rad/s
    pub a_par: f64,
    /// rad/s, non-negative; its direction lives in `phi`.
    pub a_perp: f64,
    /// rad
    #[serde(default)]
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuclearSpinSpec {
    /// Position relative to the NV center in lattice-aligned cartesian
    /// coordinates, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<HyperfineCouplings>,
    /// Initial polarization 2<I_z>, in [-1, 1].
    #[serde(default = "default_polarization")]
    pub polarization: f64,
}

fn default_polarization() -> f64 {
    0.5
}

impl NuclearSpinSpec {
    pub fn at_position(position: Vec3, polarization: f64) -> Self {
        Self { position: Some(position), couplings: None, polarization }
    }

    pub fn with_couplings(a_par: f64, a_perp: f64, phi: f64, polarization: f64) -> Self {
        Self {
            position: None,
            couplings: Some(HyperfineCouplings { a_par, a_perp, phi }),
            polarization,
        }
    }
}

/// Explicit internuclear coupling for systems described by couplings only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairCoupling {
    pub i: usize,
    pub j: usize,
    /// Signed omega_D in rad/s.
    pub omega_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystemSpec {
    pub nuclei: Vec<NuclearSpinSpec>,
    #[serde(default = "default_true")]
    pub include_internuclear: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit_pair_couplings: Vec<PairCoupling>,
    #[serde(default = "default_max_nuclei")]
    pub max_nuclei: usize,
}

fn default_true() -> bool {
    true
}

fn default_max_nuclei() -> usize {
    DEFAULT_MAX_NUCLEI
}

impl SpinSystemSpec {
    pub fn new(nuclei: Vec<NuclearSpinSpec>) -> Self {
        Self {
            nuclei,
            include_internuclear: true,
            explicit_pair_couplings: Vec::new(),
            max_nuclei: DEFAULT_MAX_NUCLEI,
        }
    }

    pub fn with_pair_coupling(mut self, i: usize, j: usize, omega_d: f64) -> Self {
        self.explicit_pair_couplings.push(PairCoupling { i, j, omega_d });
        self
    }

    fn check(&self, out: &mut Vec<String>) {
        if self.nuclei.is_empty() {
            out.push(String::from("empty system: at least one nucleus required"));
        }
        if self.nuclei.len() > self.max_nuclei {
            out.push(format!(
                "Hilbert space cap: {} nuclei exceed the cap of {}",
                self.nuclei.len(),
                self.max_nuclei
            ));
        }
        let mut any_position = false;
        for (k, n) in self.nuclei.iter().enumerate() {
            match (&n.position, &n.couplings) {
                (Some(p), None) => {
                    any_position = true;
                    if !p.iter().all(|x| x.is_finite()) || vec3::norm(p) == 0.0 {
                        out.push(format!("nucleus {k}: position must be finite and nonzero"));
                    }
                }
                (None, Some(c)) => {
                    if !(c.a_par.is_finite() && c.a_perp.is_finite() && c.phi.is_finite()) {
                        out.push(format!("nucleus {k}: couplings must be finite"));
                    }
                    if c.a_perp < 0.0 {
                        out.push(format!("nucleus {k}: a_perp must be non-negative"));
                    }
                }
                _ => out.push(format!(
                    "nucleus {k}: exactly one of position or couplings must be given"
                )),
            }
            if !(-1.0..=1.0).contains(&n.polarization) {
                out.push(format!("nucleus {k}: polarization outside [-1, 1]"));
            }
        }
        if !self.explicit_pair_couplings.is_empty() && any_position {
            out.push(String::from(
                "explicit_pair_couplings only allowed when no positions are given",
            ));
        }
        for pc in &self.explicit_pair_couplings {
            if pc.i == pc.j || pc.i >= self.nuclei.len() || pc.j >= self.nuclei.len() {
                out.push(format!("pair coupling ({}, {}) references invalid nuclei", pc.i, pc.j));
            }
            if !pc.omega_d.is_finite() {
                out.push(format!("pair coupling ({}, {}) must be finite", pc.i, pc.j));
            }
        }
    }
}

/// Outcome of [`validate`]. Empty `violations` means the inputs are accepted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every invariant of the configuration and the spin system.
pub fn validate(config: &ExperimentConfig, system: &SpinSystemSpec) -> ValidationReport {
    let mut violations = Vec::new();
    config.check(&mut violations);
    system.check(&mut violations);
    ValidationReport { violations }
}

/// Bare 13C Larmor frequency gamma_n B0 / 2 pi, in Hz.
pub fn larmor_frequency(config: &ExperimentConfig) -> f64 {
    config.constants.gamma_n * config.b0 / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn one_nucleus() -> SpinSystemSpec {
        SpinSystemSpec::new(vec![NuclearSpinSpec::with_couplings(1e4, 2e4, 0.0, 0.5)])
    }

    #[test]
    fn reference_acquisition_grid_passes() {
        let config = ExperimentConfig { b0: 0.1835, t1_dwell: 11.36e-6, n1: 1925, ..Default::default() };
        let report = validate(&config, &one_nucleus());
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn empty_system_fails() {
        let report = validate(&ExperimentConfig::default(), &SpinSystemSpec::new(vec![]));
        assert!(!report.passed());
        assert!(report.violations.iter().any(|v| v.contains("empty system")));
    }

    #[test]
    fn ten_nuclei_exceed_cap() {
        let nuclei = (0..10).map(|_| NuclearSpinSpec::with_couplings(0.0, 0.0, 0.0, 0.5)).collect();
        let report = validate(&ExperimentConfig::default(), &SpinSystemSpec::new(nuclei));
        assert!(report.violations.iter().any(|v| v.contains("Hilbert space cap")));
    }

    #[test]
    fn both_or_neither_location_rejected() {
        let mut n = NuclearSpinSpec::with_couplings(0.0, 1.0, 0.0, 0.5);
        n.position = Some([1e-9, 0.0, 0.0]);
        let report = validate(&ExperimentConfig::default(), &SpinSystemSpec::new(vec![n]));
        assert!(!report.passed());
        let n = NuclearSpinSpec { position: None, couplings: None, polarization: 0.5 };
        let report = validate(&ExperimentConfig::default(), &SpinSystemSpec::new(vec![n]));
        assert!(!report.passed());
    }

    #[test]
    fn explicit_pairs_need_coupling_only_systems() {
        let sys = SpinSystemSpec::new(vec![
            NuclearSpinSpec::at_position([5e-10, 0.0, 0.0], 0.5),
            NuclearSpinSpec::at_position([0.0, 5e-10, 0.0], 0.5),
        ])
        .with_pair_coupling(0, 1, 100.0);
        assert!(!validate(&ExperimentConfig::default(), &sys).passed());
    }

    #[test]
    fn negative_a_perp_rejected() {
        let sys = SpinSystemSpec::new(vec![NuclearSpinSpec::with_couplings(0.0, -1.0, 0.0, 0.5)]);
        assert!(!validate(&ExperimentConfig::default(), &sys).passed());
    }

    #[test]
    fn validate_is_idempotent() {
        let config = ExperimentConfig { n1: 0, ..Default::default() };
        let sys = SpinSystemSpec::new(vec![]);
        assert_eq!(validate(&config, &sys), validate(&config, &sys));
    }

    #[test]
    fn larmor_values() {
        let mut config = ExperimentConfig::default();
        assert!((larmor_frequency(&config) - 1_965_070.8).abs() < 0.5);
        config.b0 = 0.0;
        assert_eq!(larmor_frequency(&config), 0.0);
        config.b0 = 1.0;
        assert!((larmor_frequency(&config) - 10.71e6).abs() < 1e-6);
    }

    #[test]
    fn default_constants() {
        let c = PhysicalConstants::default();
        assert!((c.gamma_n / (2.0 * PI) - 10.71e6).abs() < 1e-6);
        let mut v = Vec::new();
        c.check(&mut v);
        assert!(v.is_empty());
    }

    proptest::proptest! {
        #[test]
        fn larmor_is_linear(b0 in 0.0f64..5.0) {
            let c1 = ExperimentConfig { b0, ..Default::default() };
            let c2 = ExperimentConfig { b0: 2.0 * b0, ..Default::default() };
            let f1 = larmor_frequency(&c1);
            let f2 = larmor_frequency(&c2);
            proptest::prop_assert!((f2 - 2.0 * f1).abs() <= 1e-12 * f2.abs().max(1.0));
        }
    }
}
