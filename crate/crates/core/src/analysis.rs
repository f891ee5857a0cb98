// SPDX-License-Identifier: Apache-2.0

//! Inverse problems: peak frequencies to hyperfine couplings, couplings to
//! polar position, the two-spin multiplet pattern, and assignment of J-spectrum
//! satellites to lattice pair candidates.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::PhysicalConstants;
use crate::engine::DIPOLAR_NORMALIZATION;
use crate::error::{Error, Result};
use crate::lattice::{PairCandidateTable, MIN_HYPERFINE_RADIUS};
use crate::spectral::Peak;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineEstimate {
    /// rad/s
    pub a_par: f64,
    /// rad/s
    pub a_perp: f64,
    /// `max(|a_par|, |a_perp|) / (gamma_n B0)`; the conversion assumes this is small.
    pub validity_ratio: f64,
}

/// `a_par = 4 pi f1 - 2 gamma_n B0`, `a_perp = pi^2 |f2|` (f in Hz, a in rad/s).
pub fn freqs_to_hyperfine(f1: f64, f2: f64, b0: f64, constants: &PhysicalConstants) -> HyperfineEstimate {
    let omega0 = constants.gamma_n * b0;
    let a_par = 4.0 * PI * f1 - 2.0 * omega0;
    let a_perp = PI * PI * f2.abs();
    HyperfineEstimate { a_par, a_perp, validity_ratio: a_par.abs().max(a_perp) / omega0 }
}

/// Forward map of [`freqs_to_hyperfine`]: the `(f1, f2)` a nucleus produces.
pub fn hyperfine_to_freqs(a_par: f64, a_perp: f64, b0: f64, constants: &PhysicalConstants) -> (f64, f64) {
    let omega0 = constants.gamma_n * b0;
    ((2.0 * omega0 + a_par) / (4.0 * PI), a_perp / (PI * PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    /// m
    pub r: f64,
    /// Polar angle from the NV axis on the canonical branch [0, pi/2], rad.
    pub theta: f64,
    /// Azimuth, rad; needs a phase calibration that is not modelled.
    pub phi: Option<f64>,
    /// The point-dipole model cannot distinguish `(r, theta)` from the
    /// inverted position `(r, pi - theta)`.
    pub mirror_ambiguity: bool,
}

/// `atan2(a_perp, a_par)` as a function of theta for the point-dipole model;
/// strictly increasing from 0 to pi on [0, pi/2].
fn coupling_angle(theta: f64) -> f64 {
    let (s, c) = Float::sin_cos(theta);
    Float::atan2(3.0 * s * c, 3.0 * c * c - 1.0)
}

/// Point-dipole inversion: bisection on theta, then closed-form r from
/// `|a| = K sqrt(1 + 3 cos^2 theta) / r^3`.
pub fn hyperfine_to_polar(a_par: f64, a_perp: f64, constants: &PhysicalConstants) -> Result<LocalizationResult> {
    let a_perp = a_perp.abs();
    if !(a_par.is_finite() && a_perp.is_finite()) || (a_par == 0.0 && a_perp == 0.0) {
        return Err(Error::InvalidArgument(String::from("couplings must be finite and not both zero")));
    }
    let target = Float::atan2(a_perp, a_par);
    let (mut lo, mut hi) = (0.0, PI / 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if coupling_angle(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);
    let c = Float::cos(theta);
    let magnitude = Float::hypot(a_par, a_perp);
    let r = Float::cbrt(constants.hyperfine_prefactor() * Float::sqrt(1.0 + 3.0 * c * c) / magnitude);
    if r.is_nan() || r < MIN_HYPERFINE_RADIUS {
        return Err(Error::UnphysicalCouplings { min_radius: MIN_HYPERFINE_RADIUS });
    }
    Ok(LocalizationResult { r, theta, phi: None, mirror_ambiguity: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingRegime {
    Weak,
    Intermediate,
    Strong,
}

/// Four single-quantum transitions of a coupled pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipletPattern {
    /// Offsets from f0, Hz, in the order
    /// `[mean + c + R, mean + c - R, mean - c - R, mean - c + R]`.
    pub frequencies_hz: [f64; 4],
    /// Relative intensities, summing to 2.
    pub intensities: [f64; 4],
    pub regime: CouplingRegime,
}

impl MultipletPattern {
    /// Transitions merged when closer than `tolerance_hz`, intensities added,
    /// ascending in frequency. Zero-intensity transitions are dropped.
    pub fn lines(&self, tolerance_hz: f64) -> Vec<(f64, f64)> {
        let mut t: Vec<(f64, f64)> = self
            .frequencies_hz
            .iter()
            .copied()
            .zip(self.intensities.iter().copied())
            .filter(|&(_, i)| i > 1e-12)
            .collect();
        t.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (f, i) in t {
            match out.last_mut() {
                Some(last) if (f - last.0).abs() <= tolerance_hz => {
                    let w = last.1 + i;
                    last.0 = (last.0 * last.1 + f * i) / w;
                    last.1 = w;
                }
                _ => out.push((f, i)),
            }
        }
        out
    }
}

pub fn classify_regime(delta_a_par: f64, omega_d: f64) -> CouplingRegime {
    let (d, w) = (delta_a_par.abs(), omega_d.abs());
    if w == 0.0 || w < d / 5.0 {
        CouplingRegime::Weak
    } else if w > 5.0 * d {
        CouplingRegime::Strong
    } else {
        CouplingRegime::Intermediate
    }
}

/// Closed-form spectrum of two spins with offsets `a_i / 2`, `a_j / 2` (the
/// m_s-averaged hyperfine shifts) coupled by `omega_d` with the engine's
/// dipolar normalization. All inputs rad/s.
pub fn pair_multiplet(a_i: f64, a_j: f64, omega_d: f64) -> MultipletPattern {
    let c = DIPOLAR_NORMALIZATION * omega_d;
    let mean = 0.25 * (a_i + a_j);
    let delta = 0.25 * (a_i - a_j);
    let r = Float::hypot(delta, c / 2.0);
    // Mixing angle of the zero-quantum block; sin 2 beta = (c/2) / R.
    let s2b = if r > 0.0 { (c / 2.0) / r } else { 0.0 };
    let to_hz = 1.0 / (2.0 * PI);
    MultipletPattern {
        frequencies_hz: [
            (mean + c + r) * to_hz,
            (mean + c - r) * to_hz,
            (mean - c - r) * to_hz,
            (mean - c + r) * to_hz,
        ],
        intensities: [(1.0 + s2b) / 2.0, (1.0 - s2b) / 2.0, (1.0 + s2b) / 2.0, (1.0 - s2b) / 2.0],
        regime: classify_regime(a_i - a_j, omega_d),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssignOptions {
    /// Maximum `||f2| - |omega_D| / 2pi|`, Hz.
    pub tolerance_hz: f64,
    /// Peaks with `|f2|` at or below this are not treated as satellites, Hz.
    pub center_floor_hz: f64,
}

impl Default for AssignOptions {
    fn default() -> Self {
        Self { tolerance_hz: 50.0, center_floor_hz: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateMatch {
    pub shell_label: String,
    pub displacement: [i32; 3],
    pub multiplicity: usize,
    pub distance: f64,
    pub omega_d_hz: f64,
    /// `||f2| - |omega_D| / 2pi|`, Hz.
    pub residual_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentStatus {
    IsolatedOrUnresolved,
    Assigned,
    Ambiguous,
    Unassigned,
}

impl AssignmentStatus {
    pub fn label(self) -> &'static str {
        match self {
            AssignmentStatus::IsolatedOrUnresolved => "isolated-or-unresolved",
            AssignmentStatus::Assigned => "assigned",
            AssignmentStatus::Ambiguous => "ambiguous",
            AssignmentStatus::Unassigned => "unassigned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub peak_index: usize,
    pub f1: f64,
    pub f2: f64,
    pub status: AssignmentStatus,
    /// Ranked by residual, best first; never pruned to one.
    pub candidates: Vec<CandidateMatch>,
}

/// Matches each satellite peak to lattice pair candidates by `|f2|`.
pub fn assign_pairs(peaks: &[Peak], table: &PairCandidateTable, options: &AssignOptions) -> Result<Vec<Assignment>> {
    if table.entries.is_empty() {
        return Err(Error::InvalidArgument(String::from("pair candidate table is empty")));
    }
    let mut out = Vec::with_capacity(peaks.len());
    for (idx, p) in peaks.iter().enumerate() {
        let f2 = p.f2.abs();
        if f2 <= options.center_floor_hz {
            out.push(Assignment {
                peak_index: idx,
                f1: p.f1,
                f2: p.f2,
                status: AssignmentStatus::IsolatedOrUnresolved,
                candidates: Vec::new(),
            });
            continue;
        }
        let mut candidates: Vec<(usize, CandidateMatch)> = table
            .entries
            .iter()
            .enumerate()
            .filter_map(|(order, e)| {
                let omega_d_hz = e.omega_d_hz();
                let residual = (f2 - omega_d_hz.abs()).abs();
                (residual <= options.tolerance_hz).then(|| {
                    (
                        order,
                        CandidateMatch {
                            shell_label: e.shell_label.clone(),
                            displacement: e.displacement,
                            multiplicity: e.multiplicity,
                            distance: e.distance,
                            omega_d_hz,
                            residual_hz: residual,
                        },
                    )
                })
            })
            .collect();
        candidates.sort_by(|a, b| a.1.residual_hz.total_cmp(&b.1.residual_hz).then(a.0.cmp(&b.0)));
        let status = match candidates.len() {
            0 => AssignmentStatus::Unassigned,
            1 => AssignmentStatus::Assigned,
            _ => AssignmentStatus::Ambiguous,
        };
        out.push(Assignment {
            peak_index: idx,
            f1: p.f1,
            f2: p.f2,
            status,
            candidates: candidates.into_iter().map(|(_, c)| c).collect(),
        });
    }
    Ok(out)
}
