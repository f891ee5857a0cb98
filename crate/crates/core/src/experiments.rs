// SPDX-License-Identifier: Apache-2.0

//! Canned protocols: 1D weak-measurement FID, 2D hyperfine spectroscopy
//! with periodic NV inversion, and 2D J-spectroscopy with a nuclear echo.
//! Each row of a 2D grid is independent; rows are dispatched through a
//! [`RowRunner`] so callers can supply a parallel executor.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ReadoutModel, SpinSystemSpec};
use crate::engine::{
    hamiltonian_from_resolved, pulse_unitary, resolve_system, DecoupledHold, Hamiltonian, NVLevel,
    PulseTarget, PulseTiming, QuantumState, WeakMeasurement,
};
use crate::error::{Error, Result};
use crate::linalg::{identity, matrix_power, CMat};

/// Relative tolerance on the modulation period in strict commensurate mode.
pub const COMMENSURATE_TOLERANCE: f64 = 1e-6;

/// `[experiment.fid]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FidExperiment {
    /// Phase of the rf pi/2 pulse, rad.
    pub rf_phase: f64,
    /// Use square rf pulses of length `t_pi_rf / 2` instead of ideal rotations.
    pub finite_pulses: bool,
}

impl Default for FidExperiment {
    fn default() -> Self {
        Self { rf_phase: 0.0, finite_pulses: false }
    }
}

/// `[experiment.hyperfine2d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperfine2dExperiment {
    /// Toggle between m_s = -1 and +1 (true) or between 0 and -1 (false).
    pub invert_both_transitions: bool,
    /// Square mw pulses of length `t_pi_mw1` per transition instead of ideal flips.
    pub finite_pulses: bool,
    /// Reject modulation periods that differ from the Larmor period.
    pub strict: bool,
    /// Modulation period, s. Defaults to one Larmor period.
    pub modulation_period: Option<f64>,
}

impl Default for Hyperfine2dExperiment {
    fn default() -> Self {
        Self { invert_both_transitions: true, finite_pulses: false, strict: true, modulation_period: None }
    }
}

/// `[experiment.jspec2d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Jspec2dExperiment {
    /// Number of refocusing pulses in t2 (1 = Hahn echo).
    pub n_echoes: u32,
    pub rf_phase: f64,
    /// Square rf pulses (`t_pi_rf` for pi) instead of ideal rotations.
    pub finite_pulses: bool,
}

impl Default for Jspec2dExperiment {
    fn default() -> Self {
        Self { n_echoes: 1, rf_phase: 0.0, finite_pulses: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentSpec {
    Fid(FidExperiment),
    Hyperfine2d(Hyperfine2dExperiment),
    Jspec2d(Jspec2dExperiment),
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::Fid(_) => "fid",
            ExperimentSpec::Hyperfine2d(_) => "hyperfine2d",
            ExperimentSpec::Jspec2d(_) => "jspec2d",
        }
    }
}

/// Periodic-inversion drive parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    pub modulation_period: f64,
    /// Duration of each mw pi pulse; ignored for ideal pulses.
    pub t_pi: f64,
    pub invert_both_transitions: bool,
    pub finite_pulses: bool,
    pub strict: bool,
}

impl DriveConfig {
    /// Dual-transition drive at the Larmor period with ideal pulses.
    pub fn commensurate(config: &ExperimentConfig) -> Self {
        Self {
            modulation_period: config.larmor_period(),
            t_pi: config.t_pi_mw1,
            invert_both_transitions: true,
            finite_pulses: false,
            strict: true,
        }
    }

    pub fn from_experiment(exp: &Hyperfine2dExperiment, config: &ExperimentConfig) -> Self {
        Self {
            modulation_period: exp.modulation_period.unwrap_or_else(|| config.larmor_period()),
            t_pi: config.t_pi_mw1,
            invert_both_transitions: exp.invert_both_transitions,
            finite_pulses: exp.finite_pulses,
            strict: exp.strict,
        }
    }

    /// Time spent switching between the two drive levels.
    pub fn toggle_time(&self) -> f64 {
        match (self.finite_pulses, self.invert_both_transitions) {
            (false, _) => 0.0,
            (true, true) => 2.0 * self.t_pi,
            (true, false) => self.t_pi,
        }
    }

    pub fn check(&self, config: &ExperimentConfig) -> Result<()> {
        let t = self.modulation_period;
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::NonFiniteDuration(t));
        }
        let expected = config.larmor_period();
        if self.strict && ((t - expected) / expected).abs() > COMMENSURATE_TOLERANCE {
            return Err(Error::NonCommensurate { period: t, expected });
        }
        if self.finite_pulses && !(self.t_pi > 0.0 && self.t_pi < t / 2.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "t_pi = {} s must lie in (0, T/2 = {} s)",
                self.t_pi,
                t / 2.0
            )));
        }
        if self.toggle_time() > t / 2.0 {
            return Err(Error::InvalidArgument(String::from("mw pulses do not fit in half a modulation period")));
        }
        Ok(())
    }
}

/// Effective drive amplitude under periodic NV inversion:
/// `B1 = (4 a_perp / (pi gamma_n)) (1 - (pi^2 - 4) t_pi^2 / T^2)`, in T.
pub fn rabi_amplitude(a_perp: f64, t_pi: f64, period: f64, gamma_n: f64) -> f64 {
    4.0 * a_perp / (PI * gamma_n) * (1.0 - (PI * PI - 4.0) * t_pi * t_pi / (period * period))
}

/// Acquisition metadata stored alongside a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub experiment: ExperimentSpec,
    pub config: ExperimentConfig,
    pub system: SpinSystemSpec,
    /// Nuclear Larmor frequency f0, Hz.
    pub larmor_hz: f64,
    /// Sensing window actually used per weak measurement, s.
    pub tau_weak_effective: f64,
    /// Modulation periods per t2 increment (hyperfine2d only).
    pub periods_per_increment: Option<u64>,
}

/// Complex time-domain data, row-major `[n2][n1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid2D {
    pub data: Vec<Complex64>,
    pub n1: usize,
    pub n2: usize,
    pub t1_dwell: f64,
    pub t2_dwell: f64,
    pub metadata: GridMetadata,
}

impl TimeGrid2D {
    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.n1..(k + 1) * self.n1]
    }

    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.data[k * self.n1 + j]
    }

    /// Checks dimensions and finiteness.
    pub fn check(&self) -> Result<()> {
        if self.data.len() != self.n1 * self.n2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "grid holds {} values, expected {} x {}",
                self.data.len(),
                self.n2,
                self.n1
            )));
        }
        if self.data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFiniteData);
        }
        Ok(())
    }
}

/// Executes independent jobs indexed `0..n` and returns results in index order.
pub trait RowRunner {
    fn run<T, F>(&self, n: usize, job: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send;
}

/// In-order execution on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl RowRunner for Serial {
    fn run<T, F>(&self, n: usize, job: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        (0..n).map(|k| job(k).map_err(|e| row_error(k, e))).collect()
    }
}

/// Tags an error with the row that produced it.
pub fn row_error(row: usize, e: Error) -> Error {
    match e {
        Error::RowFailed { .. } => e,
        other => Error::RowFailed { row, message: other.to_string() },
    }
}

/// Runs `n` independent jobs through `runner`.
pub fn sweep<R, T, F>(runner: &R, n: usize, job: F) -> Result<Vec<T>>
where
    R: RowRunner,
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    runner.run(n, job)
}

/// Weak-measurement detection train shared by all protocols.
struct Detector {
    wm: WeakMeasurement,
    hold: DecoupledHold,
    config: ExperimentConfig,
}

impl Detector {
    fn new(h: &Hamiltonian, config: &ExperimentConfig) -> Result<Self> {
        let wm = WeakMeasurement::new(h, config)?;
        let idle = config.t1_dwell - wm.duration();
        if idle < 0.0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "weak-measurement window {} s exceeds t1_dwell {} s",
                wm.duration(),
                config.t1_dwell
            )));
        }
        let hold = DecoupledHold::new(h, idle)?;
        Ok(Self { wm, hold, config: config.clone() })
    }

    /// `n1` samples at spacing `t1_dwell`, with decay envelopes and readout noise.
    fn acquire(&self, mut state: QuantumState, t2: f64, row: usize) -> Vec<Complex64> {
        let cfg = &self.config;
        let indirect = match cfg.t2n_indirect {
            Some(t) if t > 0.0 => Float::exp(-t2 / t),
            _ => 1.0,
        };
        let mut rng = match cfg.readout_model {
            ReadoutModel::Stochastic { seed, .. } => {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(row as u64);
                Some(r)
            }
            ReadoutModel::Expectation => None,
        };
        let mut out = Vec::with_capacity(cfg.n1);
        for j in 0..cfg.n1 {
            let raw = self.wm.apply(&mut state);
            state.reset_nv(cfg.pumping_fidelity);
            self.hold.apply(&mut state);
            let t1 = j as f64 * cfg.t1_dwell;
            let s = raw * Float::exp(-t1 / cfg.t2n) * indirect;
            let value = match (&cfg.readout_model, rng.as_mut()) {
                (ReadoutModel::Stochastic { shots, .. }, Some(r)) => sample_contrast(s, *shots, r),
                _ => s,
            };
            out.push(Complex64::new(value, 0.0));
        }
        out
    }
}

/// Mean of `shots` single-shot outcomes in {+1, -1} with `P(+1) = (1 + s) / 2`.
fn sample_contrast(s: f64, shots: u32, rng: &mut ChaCha8Rng) -> f64 {
    if shots == 0 {
        return 0.0;
    }
    let p = ((1.0 + s) / 2.0).clamp(0.0, 1.0);
    let k = match Binomial::new(shots as u64, p) {
        Ok(b) => b.sample(rng),
        Err(_) => 0,
    };
    2.0 * k as f64 / shots as f64 - 1.0
}

fn prepare(system: &SpinSystemSpec, config: &ExperimentConfig) -> Result<(Hamiltonian, Vec<f64>)> {
    let report = crate::config::validate(config, system);
    if !report.passed() {
        return Err(Error::InvalidArgument(report.violations.join("; ")));
    }
    let resolved = resolve_system(system, config)?;
    let pols = resolved.nuclei.iter().map(|n| n.polarization).collect();
    Ok((hamiltonian_from_resolved(&resolved, config.omega0()), pols))
}

fn metadata(
    experiment: ExperimentSpec,
    system: &SpinSystemSpec,
    config: &ExperimentConfig,
    detector: &Detector,
    periods: Option<u64>,
) -> GridMetadata {
    GridMetadata {
        experiment,
        config: config.clone(),
        system: system.clone(),
        larmor_hz: crate::config::larmor_frequency(config),
        tau_weak_effective: detector.wm.duration(),
        periods_per_increment: periods,
    }
}

fn rf(h: &Hamiltonian, angle: f64, phase: f64, finite: bool, t_pi_rf: f64) -> Result<CMat> {
    let timing = if finite { PulseTiming::Finite(t_pi_rf * angle / PI) } else { PulseTiming::Instantaneous };
    pulse_unitary(h, PulseTarget::Rf, angle, phase, timing)
}

/// 1D FID: rf pi/2 followed by `n1` weak measurements.
pub fn run_fid_1d(system: &SpinSystemSpec, config: &ExperimentConfig) -> Result<Vec<f64>> {
    let grid = run_fid_grid(system, config, &FidExperiment::default())?;
    Ok(grid.data.iter().map(|z| z.re).collect())
}

/// 1D FID stored as a single-row grid.
pub fn run_fid_grid(system: &SpinSystemSpec, config: &ExperimentConfig, exp: &FidExperiment) -> Result<TimeGrid2D> {
    let (h, pols) = prepare(system, config)?;
    let detector = Detector::new(&h, config)?;
    let mut state = QuantumState::product(NVLevel::Zero, &pols);
    state.apply_unitary(&rf(&h, PI / 2.0, exp.rf_phase, exp.finite_pulses, config.t_pi_rf)?);
    let data = detector.acquire(state, 0.0, 0);
    Ok(TimeGrid2D {
        data,
        n1: config.n1,
        n2: 1,
        t1_dwell: config.t1_dwell,
        t2_dwell: 0.0,
        metadata: metadata(ExperimentSpec::Fid(exp.clone()), system, config, &detector, None),
    })
}

/// Unitaries of the periodic inversion drive: `(enter, one period, leave)`.
/// The NV enters the drive cycle in m_s = -1 and returns to 0 at the end.
pub fn drive_unitaries(h: &Hamiltonian, drive: &DriveConfig) -> Result<(CMat, CMat, CMat)> {
    let timing = if drive.finite_pulses { PulseTiming::Finite(drive.t_pi) } else { PulseTiming::Instantaneous };
    let mw1 = pulse_unitary(h, PulseTarget::Mw1, PI, 0.0, timing)?;
    let free = h.propagator(drive.modulation_period / 2.0 - drive.toggle_time())?;
    let period = if drive.invert_both_transitions {
        let mw2 = pulse_unitary(h, PulseTarget::Mw2, PI, 0.0, timing)?;
        // -1 -> 0 -> +1, then +1 -> 0 -> -1.
        &mw1 * &mw2 * &free * &mw2 * &mw1 * &free
    } else {
        &mw1 * &free * &mw1 * &free
    };
    Ok((mw1.clone(), period, mw1))
}

/// Periods of the drive per t2 increment and the effective increment.
pub fn periods_per_increment(config: &ExperimentConfig, drive: &DriveConfig) -> Result<(u64, f64)> {
    let m = Float::round(config.t2_dwell / drive.modulation_period);
    if !(m >= 1.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "t2_dwell {} s is shorter than one modulation period {} s",
            config.t2_dwell,
            drive.modulation_period
        )));
    }
    Ok((m as u64, m * drive.modulation_period))
}

/// Effective nuclear Rabi frequency (Hz) of the periodic drive, from the
/// rotation angle of the one-period propagator restricted to m_s = -1.
/// Single-nucleus systems only.
pub fn drive_rabi_frequency(h: &Hamiltonian, drive: &DriveConfig) -> Result<f64> {
    if h.space.n_nuclei != 1 {
        return Err(Error::InvalidArgument(String::from("Rabi frequency extraction needs exactly one nucleus")));
    }
    let (_, period, _) = drive_unitaries(h, drive)?;
    let o = NVLevel::Minus.index() * 2;
    let block = period.view((o, o), (2, 2)).into_owned();
    let det = block.determinant();
    let norm = det.sqrt();
    let half_trace = (block.trace() / norm).re / 2.0;
    let angle = 2.0 * Float::acos(half_trace.abs().min(1.0));
    Ok(angle / (2.0 * PI * drive.modulation_period))
}

/// 2D hyperfine spectroscopy: periodic NV inversion for `t2 = k m T`, then
/// weak-measurement detection along t1.
pub fn run_2d_hyperfine<R: RowRunner>(
    system: &SpinSystemSpec,
    config: &ExperimentConfig,
    exp: &Hyperfine2dExperiment,
    runner: &R,
) -> Result<TimeGrid2D> {
    let drive = DriveConfig::from_experiment(exp, config);
    drive.check(config)?;
    let (h, pols) = prepare(system, config)?;
    let detector = Detector::new(&h, config)?;
    let (m, t2_step) = periods_per_increment(config, &drive)?;
    let (enter, period, leave) = drive_unitaries(&h, &drive)?;
    let increment = matrix_power(&period, m);
    let initial = QuantumState::product(NVLevel::Zero, &pols);
    let rows = runner.run(config.n2, |k| {
        let mut state = initial.clone();
        if k > 0 {
            let u = &leave * matrix_power(&increment, k as u64) * &enter;
            state.apply_unitary(&u);
        }
        Ok(detector.acquire(state, k as f64 * t2_step, k))
    })?;
    Ok(TimeGrid2D {
        data: rows.into_iter().flatten().collect(),
        n1: config.n1,
        n2: config.n2,
        t1_dwell: config.t1_dwell,
        t2_dwell: t2_step,
        metadata: metadata(ExperimentSpec::Hyperfine2d(exp.clone()), system, config, &detector, Some(m)),
    })
}

/// Nuclear echo propagator for total free evolution `t2` split over `n_echoes` refocusing pulses.
fn echo_unitary(h: &Hamiltonian, t2: f64, exp: &Jspec2dExperiment, refocus: &CMat) -> Result<CMat> {
    if t2 == 0.0 {
        return Ok(identity(h.space.dim()));
    }
    let n = exp.n_echoes.max(1);
    let half = h.propagator(t2 / (2.0 * n as f64))?;
    let cycle = &half * refocus * &half;
    Ok(matrix_power(&cycle, n as u64))
}

/// 2D J-spectroscopy: rf pi/2, echo train of total length t2 with the NV in
/// m_s = 0, then weak-measurement detection along t1.
pub fn run_2d_jspec<R: RowRunner>(
    system: &SpinSystemSpec,
    config: &ExperimentConfig,
    exp: &Jspec2dExperiment,
    runner: &R,
) -> Result<TimeGrid2D> {
    if exp.n_echoes == 0 {
        return Err(Error::InvalidArgument(String::from("n_echoes must be at least 1")));
    }
    let (h, pols) = prepare(system, config)?;
    let detector = Detector::new(&h, config)?;
    let excite = rf(&h, PI / 2.0, exp.rf_phase, exp.finite_pulses, config.t_pi_rf)?;
    let refocus = rf(&h, PI, exp.rf_phase + PI / 2.0, exp.finite_pulses, config.t_pi_rf)?;
    let mut initial = QuantumState::product(NVLevel::Zero, &pols);
    initial.apply_unitary(&excite);
    let rows = runner.run(config.n2, |k| {
        let t2 = k as f64 * config.t2_dwell;
        let mut state = initial.clone();
        state.apply_unitary(&echo_unitary(&h, t2, exp, &refocus)?);
        Ok(detector.acquire(state, t2, k))
    })?;
    Ok(TimeGrid2D {
        data: rows.into_iter().flatten().collect(),
        n1: config.n1,
        n2: config.n2,
        t1_dwell: config.t1_dwell,
        t2_dwell: config.t2_dwell,
        metadata: metadata(ExperimentSpec::Jspec2d(exp.clone()), system, config, &detector, None),
    })
}

/// Runs whichever protocol `spec` names.
pub fn run_experiment<R: RowRunner>(
    system: &SpinSystemSpec,
    config: &ExperimentConfig,
    spec: &ExperimentSpec,
    runner: &R,
) -> Result<TimeGrid2D> {
    match spec {
        ExperimentSpec::Fid(e) => run_fid_grid(system, config, e),
        ExperimentSpec::Hyperfine2d(e) => run_2d_hyperfine(system, config, e, runner),
        ExperimentSpec::Jspec2d(e) => run_2d_jspec(system, config, e, runner),
    }
}
