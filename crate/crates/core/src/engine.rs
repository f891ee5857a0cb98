// SPDX-License-Identifier: Apache-2.0

//! Quantum kernel: the joint NV (spin-1) x 13C (spin-1/2)^n Hilbert space,
//! the secular Hamiltonian, unitary propagation, pulses and the
//! weak-measurement channel.
//!
//! Basis ordering is NV first, then nuclei in system order. NV levels are
//! indexed `[+1, 0, -1]`; each nucleus is `[up, down]` with `I_z = +1/2` for up.
//! The NV is simulated in its own rotating frame (no zero-field or electron
//! Zeeman term), the nuclei in the lab frame.
//!
//! Sign conventions: the nuclear Zeeman term is `-omega0 I_z` (positive
//! gyromagnetic ratio) and the hyperfine term is `+S_z (a_par I_z + a_perp
//! I_perp)`, so the nucleus precesses at `omega0` in `m_s = 0` and at
//! `omega0 + a_par` in `m_s = -1` (for `a_perp = 0`).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use num_traits::Float;

use crate::config::{ExperimentConfig, HyperfineCouplings, PairCoupling, SpinSystemSpec};
use crate::error::{Error, Result};
use crate::lattice;
use crate::linalg::{c, conjugate, identity, kron, CMat, HermitianEigen, I, ONE, ZERO};
use crate::vec3::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NVLevel {
    Plus,
    Zero,
    Minus,
}

impl NVLevel {
    pub const ALL: [NVLevel; 3] = [NVLevel::Plus, NVLevel::Zero, NVLevel::Minus];

    pub fn index(self) -> usize {
        match self {
            NVLevel::Plus => 0,
            NVLevel::Zero => 1,
            NVLevel::Minus => 2,
        }
    }

    pub fn m_s(self) -> f64 {
        match self {
            NVLevel::Plus => 1.0,
            NVLevel::Zero => 0.0,
            NVLevel::Minus => -1.0,
        }
    }
}

/// Spin-1/2 operators.
pub fn spin_half() -> [CMat; 3] {
    let h = c(0.5);
    [
        CMat::from_row_slice(2, 2, &[ZERO, h, h, ZERO]),
        CMat::from_row_slice(2, 2, &[ZERO, -I * 0.5, I * 0.5, ZERO]),
        CMat::from_row_slice(2, 2, &[h, ZERO, ZERO, -h]),
    ]
}

/// Dimension bookkeeping for NV x n nuclei.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinSpace {
    pub n_nuclei: usize,
}

impl SpinSpace {
    pub fn new(n_nuclei: usize) -> Self {
        Self { n_nuclei }
    }

    pub fn nuclear_dim(&self) -> usize {
        1 << self.n_nuclei
    }

    pub fn dim(&self) -> usize {
        3 * self.nuclear_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![3];
        d.extend(core::iter::repeat_n(2, self.n_nuclei));
        d
    }

    /// `op` acting on nucleus `k`, identity elsewhere, on the nuclear space.
    pub fn nuclear_op(&self, k: usize, op: &CMat) -> CMat {
        let mut out = identity(1);
        for j in 0..self.n_nuclei {
            out = if j == k { kron(&out, op) } else { kron(&out, &identity(2)) };
        }
        out
    }

    /// Sum of `ops[axis]` over all nuclei.
    pub fn total_nuclear(&self, op: &CMat) -> CMat {
        let d = self.nuclear_dim();
        let mut out = CMat::zeros(d, d);
        for k in 0..self.n_nuclei {
            out += self.nuclear_op(k, op);
        }
        out
    }

    pub fn embed(&self, nv: &CMat, nuclear: &CMat) -> CMat {
        kron(nv, nuclear)
    }

    /// `nuclear` on every NV block.
    pub fn lift_nuclear(&self, nuclear: &CMat) -> CMat {
        kron(&identity(3), nuclear)
    }

    pub fn lift_nv(&self, nv: &CMat) -> CMat {
        kron(nv, &identity(self.nuclear_dim()))
    }
}

fn nv_projector(level: NVLevel) -> CMat {
    let mut p = CMat::zeros(3, 3);
    p[(level.index(), level.index())] = ONE;
    p
}

/// Resolved per-nucleus parameters after positions have been turned into couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedNucleus {
    pub couplings: HyperfineCouplings,
    pub polarization: f64,
    pub position: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSystem {
    pub nuclei: Vec<ResolvedNucleus>,
    pub pairs: Vec<PairCoupling>,
}

/// Turns positions into hyperfine couplings and collects internuclear couplings.
pub fn resolve_system(system: &SpinSystemSpec, config: &ExperimentConfig) -> Result<ResolvedSystem> {
    if system.nuclei.len() > system.max_nuclei {
        return Err(Error::DimensionOverflow { nuclei: system.nuclei.len(), cap: system.max_nuclei });
    }
    let mut nuclei = Vec::with_capacity(system.nuclei.len());
    for (k, n) in system.nuclei.iter().enumerate() {
        let couplings = match (&n.position, &n.couplings) {
            (Some(p), None) => lattice::hyperfine_from_position(p, &config.nv_axis, &config.constants)?,
            (None, Some(cpl)) => *cpl,
            _ => {
                return Err(Error::InvalidArgument(alloc::format!(
                    "nucleus {k}: exactly one of position or couplings must be given"
                )))
            }
        };
        nuclei.push(ResolvedNucleus { couplings, polarization: n.polarization, position: n.position });
    }
    let mut pairs = Vec::new();
    if system.include_internuclear {
        for i in 0..nuclei.len() {
            for j in i + 1..nuclei.len() {
                if let (Some(pi), Some(pj)) = (nuclei[i].position, nuclei[j].position) {
                    let d = vec3::sub(&pi, &pj);
                    let omega_d = lattice::dipolar_coupling(&d, &config.nv_axis, &config.constants)?;
                    pairs.push(PairCoupling { i, j, omega_d });
                }
            }
        }
        pairs.extend(system.explicit_pair_couplings.iter().copied());
    }
    Ok(ResolvedSystem { nuclei, pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    NuclearZeeman,
    HyperfinePar,
    HyperfinePerp,
    InternuclearDipolar,
}

/// One symbolic contribution to the Hamiltonian. `coefficient` is in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianTerm {
    pub kind: TermKind,
    pub coefficient: f64,
    /// Nuclei the term acts on; single-spin terms repeat the index.
    pub nuclei: [usize; 2],
    /// Transverse direction for `HyperfinePerp`.
    pub phi: f64,
}

impl HamiltonianTerm {
    /// Operator on the nuclear space, excluding any NV factor.
    fn nuclear_operator(&self, space: &SpinSpace) -> CMat {
        let [sx, sy, sz] = spin_half();
        let [i, j] = self.nuclei;
        let coeff = c(self.coefficient);
        match self.kind {
            TermKind::NuclearZeeman => space.nuclear_op(i, &sz) * (-coeff),
            TermKind::HyperfinePar => space.nuclear_op(i, &sz) * coeff,
            TermKind::HyperfinePerp => {
                let (s, co) = Float::sin_cos(self.phi);
                (space.nuclear_op(i, &sx) * c(co) + space.nuclear_op(i, &sy) * c(s)) * coeff
            }
            TermKind::InternuclearDipolar => {
                let zz = space.nuclear_op(i, &sz) * space.nuclear_op(j, &sz);
                let xx = space.nuclear_op(i, &sx) * space.nuclear_op(j, &sx);
                let yy = space.nuclear_op(i, &sy) * space.nuclear_op(j, &sy);
                (zz * c(2.0) - xx - yy) * (coeff * DIPOLAR_NORMALIZATION)
            }
        }
    }

    fn couples_to_nv(&self) -> bool {
        matches!(self.kind, TermKind::HyperfinePar | TermKind::HyperfinePerp)
    }
}

/// Prefactor of `(2 IzIz - IxIx - IyIy)` per unit omega_D. With 2/3 the two
/// allowed single-quantum lines of a degenerate pair are split by exactly
/// `2 omega_D`.
pub const DIPOLAR_NORMALIZATION: f64 = 2.0 / 3.0;

/// Secular Hamiltonian. Block diagonal in the NV levels, so each block is
/// diagonalized separately.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub space: SpinSpace,
    pub terms: Vec<HamiltonianTerm>,
    pub omega0: f64,
    blocks: [CMat; 3],
    eigen: [HermitianEigen; 3],
}

impl Hamiltonian {
    pub fn from_terms(space: SpinSpace, terms: Vec<HamiltonianTerm>, omega0: f64) -> Self {
        let d = space.nuclear_dim();
        let mut blocks = [CMat::zeros(d, d), CMat::zeros(d, d), CMat::zeros(d, d)];
        for term in &terms {
            let op = term.nuclear_operator(&space);
            for level in NVLevel::ALL {
                if term.couples_to_nv() {
                    if level.m_s() != 0.0 {
                        blocks[level.index()] += &op * c(level.m_s());
                    }
                } else {
                    blocks[level.index()] += &op;
                }
            }
        }
        let eigen = [
            HermitianEigen::new(&blocks[0]),
            HermitianEigen::new(&blocks[1]),
            HermitianEigen::new(&blocks[2]),
        ];
        Self { space, terms, omega0, blocks, eigen }
    }

    /// Nuclear Hamiltonian conditioned on the NV level.
    pub fn block(&self, level: NVLevel) -> &CMat {
        &self.blocks[level.index()]
    }

    pub fn block_eigenvalues(&self, level: NVLevel) -> &[f64] {
        &self.eigen[level.index()].values
    }

    /// Full joint matrix.
    pub fn matrix(&self) -> CMat {
        let d = self.space.nuclear_dim();
        let mut m = CMat::zeros(3 * d, 3 * d);
        for level in NVLevel::ALL {
            let o = level.index() * d;
            m.view_mut((o, o), (d, d)).copy_from(&self.blocks[level.index()]);
        }
        m
    }

    /// exp(-i H t) assembled block by block.
    pub fn propagator(&self, t: f64) -> Result<CMat> {
        if !t.is_finite() {
            return Err(Error::NonFiniteDuration(t));
        }
        let d = self.space.nuclear_dim();
        let mut u = CMat::zeros(3 * d, 3 * d);
        for level in NVLevel::ALL {
            let o = level.index() * d;
            u.view_mut((o, o), (d, d)).copy_from(&self.eigen[level.index()].propagator(t));
        }
        Ok(u)
    }
}

/// Assembles the secular Hamiltonian:
/// `H = -omega0 sum I_z + S_z sum (a_par I_z + a_perp (cos phi I_x + sin phi I_y))
///      + sum_{i<j} (2/3) omega_D (2 I_z I_z - I_x I_x - I_y I_y)`.
pub fn build_hamiltonian(system: &SpinSystemSpec, config: &ExperimentConfig) -> Result<Hamiltonian> {
    let resolved = resolve_system(system, config)?;
    Ok(hamiltonian_from_resolved(&resolved, config.omega0()))
}

pub fn hamiltonian_from_resolved(resolved: &ResolvedSystem, omega0: f64) -> Hamiltonian {
    let space = SpinSpace::new(resolved.nuclei.len());
    let mut terms = Vec::new();
    for (k, n) in resolved.nuclei.iter().enumerate() {
        terms.push(HamiltonianTerm { kind: TermKind::NuclearZeeman, coefficient: omega0, nuclei: [k, k], phi: 0.0 });
        if n.couplings.a_par != 0.0 {
            terms.push(HamiltonianTerm {
                kind: TermKind::HyperfinePar,
                coefficient: n.couplings.a_par,
                nuclei: [k, k],
                phi: 0.0,
            });
        }
        if n.couplings.a_perp != 0.0 {
            terms.push(HamiltonianTerm {
                kind: TermKind::HyperfinePerp,
                coefficient: n.couplings.a_perp,
                nuclei: [k, k],
                phi: n.couplings.phi,
            });
        }
    }
    for p in &resolved.pairs {
        if p.omega_d != 0.0 {
            terms.push(HamiltonianTerm {
                kind: TermKind::InternuclearDipolar,
                coefficient: p.omega_d,
                nuclei: [p.i.min(p.j), p.i.max(p.j)],
                phi: 0.0,
            });
        }
    }
    Hamiltonian::from_terms(space, terms, omega0)
}

/// Density matrix over the joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub rho: CMat,
    pub space: SpinSpace,
}

impl QuantumState {
    /// NV in `level`, nucleus k in `(1 + p_k 2 I_z) / 2`.
    pub fn product(level: NVLevel, polarizations: &[f64]) -> Self {
        let space = SpinSpace::new(polarizations.len());
        let mut nuclear = identity(1);
        for &p in polarizations {
            let rho_k = CMat::from_row_slice(2, 2, &[c((1.0 + p) / 2.0), ZERO, ZERO, c((1.0 - p) / 2.0)]);
            nuclear = kron(&nuclear, &rho_k);
        }
        Self { rho: kron(&nv_projector(level), &nuclear), space }
    }

    pub fn from_parts(nv: &CMat, nuclear: &CMat) -> Self {
        let n = nuclear.nrows().trailing_zeros() as usize;
        Self { rho: kron(nv, nuclear), space: SpinSpace::new(n) }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.space.dims()
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        crate::linalg::hermiticity_error(&self.rho)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.rho + self.rho.adjoint()) * c(0.5);
        SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity at the given tolerances.
    pub fn is_physical(&self, tol: f64, eig_tol: f64) -> bool {
        self.hermiticity_error() < tol
            && (self.trace() - ONE).norm() < tol
            && self.min_eigenvalue() >= -eig_tol
    }

    pub fn apply_unitary(&mut self, u: &CMat) {
        self.rho = conjugate(u, &self.rho);
    }

    pub fn expectation(&self, op: &CMat) -> Complex64 {
        (&self.rho * op).trace()
    }

    /// Partial trace over the NV.
    pub fn nuclear_state(&self) -> CMat {
        let d = self.space.nuclear_dim();
        let mut out = CMat::zeros(d, d);
        for a in 0..3 {
            out += self.rho.view((a * d, a * d), (d, d));
        }
        out
    }

    pub fn nv_population(&self, level: NVLevel) -> f64 {
        let d = self.space.nuclear_dim();
        let o = level.index() * d;
        self.rho.view((o, o), (d, d)).trace().re
    }

    /// Replaces the NV by its repolarized state: weight `fidelity` in m_s = 0,
    /// the rest split evenly over m_s = +-1.
    pub fn reset_nv(&mut self, fidelity: f64) {
        let nuclear = self.nuclear_state();
        let mut nv = CMat::zeros(3, 3);
        nv[(NVLevel::Zero.index(), NVLevel::Zero.index())] = c(fidelity);
        nv[(NVLevel::Plus.index(), NVLevel::Plus.index())] = c((1.0 - fidelity) / 2.0);
        nv[(NVLevel::Minus.index(), NVLevel::Minus.index())] = c((1.0 - fidelity) / 2.0);
        self.rho = kron(&nv, &nuclear);
    }

    /// Removes coherences between different NV levels.
    pub fn dephase_nv(&mut self) {
        let d = self.space.nuclear_dim();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    self.rho.view_mut((a * d, b * d), (d, d)).fill(ZERO);
                }
            }
        }
    }

    /// `(<I_x>, <I_y>, <I_z>)` of nucleus k.
    pub fn nuclear_spin(&self, k: usize) -> [f64; 3] {
        let nuclear = self.nuclear_state();
        let ops = spin_half();
        let mut out = [0.0; 3];
        for (o, op) in out.iter_mut().zip(ops.iter()) {
            *o = (&nuclear * self.space.nuclear_op(k, op)).trace().re;
        }
        out
    }
}

/// Evolves `state` for `duration` under `hamiltonian`.
pub fn evolve(state: &QuantumState, hamiltonian: &Hamiltonian, duration: f64) -> Result<QuantumState> {
    let u = hamiltonian.propagator(duration)?;
    let mut out = state.clone();
    out.apply_unitary(&u);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseTarget {
    /// NV transition m_s = 0 <-> -1.
    Mw1,
    /// NV transition m_s = 0 <-> +1.
    Mw2,
    /// All nuclei simultaneously.
    Rf,
}

impl core::str::FromStr for PulseTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mw1" => Ok(PulseTarget::Mw1),
            "mw2" => Ok(PulseTarget::Mw2),
            "rf" => Ok(PulseTarget::Rf),
            other => Err(Error::InvalidArgument(alloc::format!("unknown pulse target '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseTiming {
    Instantaneous,
    /// Square pulse of the given duration in s.
    Finite(f64),
}

/// Two-level rotation `exp(-i angle/2 (cos phase sigma_x + sin phase sigma_y))`.
fn two_level_rotation(angle: f64, phase: f64) -> CMat {
    let (s, co) = Float::sin_cos(angle / 2.0);
    let (sp, cp) = Float::sin_cos(phase);
    let off = Complex64::new(0.0, -s) * Complex64::new(cp, -sp);
    let off_lower = Complex64::new(0.0, -s) * Complex64::new(cp, sp);
    CMat::from_row_slice(2, 2, &[c(co), off, off_lower, c(co)])
}

/// Levels `(upper, lower)` of an NV transition in the two-level convention
/// where m_s = 0 is "up".
fn transition_levels(target: PulseTarget) -> (NVLevel, NVLevel) {
    match target {
        PulseTarget::Mw1 => (NVLevel::Zero, NVLevel::Minus),
        PulseTarget::Mw2 => (NVLevel::Zero, NVLevel::Plus),
        PulseTarget::Rf => unreachable!("rf is not an NV transition"),
    }
}

fn embed_transition(target: PulseTarget, two: &CMat) -> CMat {
    let (a, b) = transition_levels(target);
    let mut m = identity(3);
    let idx = [a.index(), b.index()];
    for (r, &ir) in idx.iter().enumerate() {
        for (col, &ic) in idx.iter().enumerate() {
            m[(ir, ic)] = two[(r, col)];
        }
    }
    m
}

/// Hermitian drive generator `(cos phase sigma_x + sin phase sigma_y) / 2` on an
/// NV transition, embedded in the spin-1 space.
fn transition_generator(target: PulseTarget, phase: f64) -> CMat {
    let (sp, cp) = Float::sin_cos(phase);
    let half = CMat::from_row_slice(
        2,
        2,
        &[ZERO, Complex64::new(cp, -sp) * 0.5, Complex64::new(cp, sp) * 0.5, ZERO],
    );
    let (a, b) = transition_levels(target);
    let mut m = CMat::zeros(3, 3);
    m[(a.index(), b.index())] = half[(0, 1)];
    m[(b.index(), a.index())] = half[(1, 0)];
    m
}

/// Unitary of a pulse. Instantaneous pulses are exact rotations; finite NV
/// pulses evolve under `H + drive`; finite rf pulses integrate a linearly
/// polarized lab-frame field `2 Omega cos(omega0 t - phase) sum I_x` on a
/// piecewise-constant grid of 64 steps per Larmor period.
pub fn pulse_unitary(
    hamiltonian: &Hamiltonian,
    target: PulseTarget,
    angle: f64,
    phase: f64,
    timing: PulseTiming,
) -> Result<CMat> {
    if !(angle.is_finite() && phase.is_finite()) {
        return Err(Error::InvalidArgument(String::from("pulse angle and phase must be finite")));
    }
    let space = hamiltonian.space;
    match (target, timing) {
        (PulseTarget::Mw1 | PulseTarget::Mw2, PulseTiming::Instantaneous) => {
            Ok(space.lift_nv(&embed_transition(target, &two_level_rotation(angle, phase))))
        }
        (PulseTarget::Rf, PulseTiming::Instantaneous) => {
            let rot = two_level_rotation(angle, phase);
            let mut nuclear = identity(1);
            for _ in 0..space.n_nuclei {
                nuclear = kron(&nuclear, &rot);
            }
            Ok(space.lift_nuclear(&nuclear))
        }
        (_, PulseTiming::Finite(duration)) => {
            if !(duration.is_finite() && duration > 0.0) {
                return Err(Error::NonFiniteDuration(duration));
            }
            let rabi = angle / duration;
            if target == PulseTarget::Rf {
                finite_rf(hamiltonian, rabi, phase, duration)
            } else {
                let drive = space.lift_nv(&transition_generator(target, phase)) * c(rabi);
                let total = hamiltonian.matrix() + drive;
                Ok(HermitianEigen::new(&total).propagator(duration))
            }
        }
    }
}

fn finite_rf(hamiltonian: &Hamiltonian, rabi: f64, phase: f64, duration: f64) -> Result<CMat> {
    let omega0 = hamiltonian.omega0;
    if omega0 <= 0.0 {
        return Err(Error::InvalidArgument(String::from("finite rf pulses need a positive Larmor frequency")));
    }
    let space = hamiltonian.space;
    let [sx, _, _] = spin_half();
    let ix_total = space.lift_nuclear(&space.total_nuclear(&sx));
    let h0 = hamiltonian.matrix();
    let period = 2.0 * PI / omega0;
    let steps = ((duration / period) * 64.0).ceil().max(1.0) as usize;
    let dt = duration / steps as f64;
    let mut u = identity(space.dim());
    for step in 0..steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let amp = 2.0 * rabi * Float::cos(omega0 * t_mid - phase);
        let h = &h0 + &ix_total * c(amp);
        u = HermitianEigen::new(&h).propagator(dt) * u;
    }
    Ok(u)
}

pub fn apply_pulse(
    state: &QuantumState,
    hamiltonian: &Hamiltonian,
    target: PulseTarget,
    angle: f64,
    phase: f64,
    timing: PulseTiming,
) -> Result<QuantumState> {
    let u = pulse_unitary(hamiltonian, target, angle, phase, timing)?;
    let mut out = state.clone();
    out.apply_unitary(&u);
    Ok(out)
}

/// Free evolution in slots of `slot` seconds with an instantaneous mw1 pi pulse
/// after each slot, `count` slots in total.
fn toggled_evolution(hamiltonian: &Hamiltonian, slot: f64, count: usize) -> Result<CMat> {
    let flip = pulse_unitary(hamiltonian, PulseTarget::Mw1, PI, 0.0, PulseTiming::Instantaneous)?;
    let step = flip * hamiltonian.propagator(slot)?;
    Ok(crate::linalg::matrix_power(&step, count as u64))
}

/// One weak measurement of the nuclear transverse magnetization.
///
/// Sequence: reset the NV to m_s = 0; mw1 pi/2 (phase 0); a sensing window
/// of `2m` half Larmor periods with an mw1 pi pulse after each half period;
/// mw1 pi/2 (phase pi/2); record `P(0) - P(-1)`; dephase NV coherences.
/// The pi train rectifies the precessing `a_perp` field and keeps the NV
/// half of the window in each of m_s = 0 and -1, so the nuclei precess at the
/// m_s-averaged frequency `omega0 + a_par / 2` while being measured.
#[derive(Debug, Clone)]
pub struct WeakMeasurement {
    block: CMat,
    readout: CMat,
    fidelity: f64,
    duration: f64,
}

impl WeakMeasurement {
    pub fn new(hamiltonian: &Hamiltonian, config: &ExperimentConfig) -> Result<Self> {
        let period = 2.0 * PI / hamiltonian.omega0;
        let half_periods = if config.tau_weak > 0.0 {
            2 * ((config.tau_weak / period).round() as usize).max(1)
        } else {
            0
        };
        let open = pulse_unitary(hamiltonian, PulseTarget::Mw1, PI / 2.0, 0.0, PulseTiming::Instantaneous)?;
        let close =
            pulse_unitary(hamiltonian, PulseTarget::Mw1, PI / 2.0, PI / 2.0, PulseTiming::Instantaneous)?;
        let sensing = toggled_evolution(hamiltonian, period / 2.0, half_periods)?;
        let block = close * sensing * open;
        let readout = hamiltonian.space.lift_nv(&(nv_projector(NVLevel::Zero) - nv_projector(NVLevel::Minus)));
        Ok(Self {
            block,
            readout,
            fidelity: config.pumping_fidelity,
            duration: half_periods as f64 * period / 2.0,
        })
    }

    /// Length of the sensing window actually used.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Runs one block in place and returns the expectation-value signal.
    pub fn apply(&self, state: &mut QuantumState) -> f64 {
        state.reset_nv(self.fidelity);
        state.apply_unitary(&self.block);
        let signal = state.expectation(&self.readout).re;
        state.dephase_nv();
        signal.clamp(-1.0, 1.0)
    }

    /// Action of one block on an arbitrary nuclear operator (the NV is reset
    /// and traced out). Used to check complete positivity.
    pub fn nuclear_channel(&self, x: &CMat) -> CMat {
        let mut nv = CMat::zeros(3, 3);
        nv[(NVLevel::Zero.index(), NVLevel::Zero.index())] = c(self.fidelity);
        nv[(NVLevel::Plus.index(), NVLevel::Plus.index())] = c((1.0 - self.fidelity) / 2.0);
        nv[(NVLevel::Minus.index(), NVLevel::Minus.index())] = c((1.0 - self.fidelity) / 2.0);
        let joint = conjugate(&self.block, &kron(&nv, x));
        let d = x.nrows();
        let mut out = CMat::zeros(d, d);
        for a in 0..3 {
            out += joint.view((a * d, a * d), (d, d));
        }
        out
    }
}

/// Convenience wrapper around [`WeakMeasurement`].
pub fn weak_measurement_block(
    state: &QuantumState,
    hamiltonian: &Hamiltonian,
    config: &ExperimentConfig,
) -> Result<(QuantumState, f64)> {
    let wm = WeakMeasurement::new(hamiltonian, config)?;
    let mut out = state.clone();
    let s = wm.apply(&mut out);
    Ok((out, s))
}

/// Idle time between weak measurements. The NV, repolarized into m_s = 0
/// after readout, is flipped between 0 and -1 every quarter Larmor period:
/// the nuclei see the m_s-averaged field without a resonant drive component.
#[derive(Debug, Clone)]
pub struct DecoupledHold {
    unitary: CMat,
}

impl DecoupledHold {
    pub fn new(hamiltonian: &Hamiltonian, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::NonFiniteDuration(duration));
        }
        // An even number of equal slots close to a quarter period, so the NV
        // spends exactly half the hold in each level.
        let quarter = PI / (2.0 * hamiltonian.omega0);
        let pairs = Float::round(duration / (2.0 * quarter)) as usize;
        let unitary = if pairs == 0 {
            hamiltonian.propagator(duration)?
        } else {
            toggled_evolution(hamiltonian, duration / (2 * pairs) as f64, 2 * pairs)?
        };
        Ok(Self { unitary })
    }

    pub fn apply(&self, state: &mut QuantumState) {
        state.apply_unitary(&self.unitary);
    }
}
