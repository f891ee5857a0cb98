// SPDX-License-Identifier: Apache-2.0

//! Time to frequency domain: demodulation, apodization, zero-filling, 2D DFT,
//! projections and peak picking.
//!
//! The weak-measurement record is real and sampled far below the Larmor
//! frequency, so every line appears together with a mirror image. After
//! demodulation by `f0 - fs/2` the f1 axis spans `[f0 - fs/2, f0 + fs/2)` and
//! lines within [`ProcessingRecord::band_half_width`] of `f0` are free of
//! image overlap.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::TimeGrid2D;

/// In-place radix-2 FFT, `X_k = sum_j x_j e^{-2 pi i j k / n}` (forward) or
/// with `e^{+...}` (inverse, unnormalized). `data.len()` must be a power of two.
pub fn fft_in_place(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| {
            let (s, c) = Float::sin_cos(sign * 2.0 * PI * k as f64 / n as f64);
            Complex64::new(c, s)
        })
        .collect();
    let mut len = 2;
    while len <= n {
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = twiddles[k * stride];
                let a = data[start + k];
                let b = data[start + k + len / 2] * w;
                data[start + k] = a + b;
                data[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Apodization applied before transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    None,
    /// `exp(-t / T2n)` with T2n taken from the acquisition config.
    Exponential,
    /// Half cosine, 1 at the first sample and 0 one sample past the last.
    Cosine,
}

impl Window {
    fn weights(self, n: usize, dwell: f64, t2n: f64) -> Vec<f64> {
        (0..n)
            .map(|j| match self {
                Window::None => 1.0,
                Window::Exponential => Float::exp(-(j as f64) * dwell / t2n),
                Window::Cosine => Float::cos(PI * j as f64 / (2.0 * n as f64)),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformOptions {
    pub window_t1: Window,
    pub window_t2: Window,
    /// Each axis is padded to `next_power_of_two(n) * zero_fill`.
    pub zero_fill: usize,
    /// Mix t1 down by `f0 - fs/2`.
    pub demodulate: bool,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self { window_t1: Window::Exponential, window_t2: Window::Cosine, zero_fill: 4, demodulate: true }
    }
}

impl TransformOptions {
    /// No window, no padding beyond the next power of two, no demodulation.
    pub fn plain() -> Self {
        Self { window_t1: Window::None, window_t2: Window::None, zero_fill: 1, demodulate: false }
    }
}

/// Everything needed to reconstruct the axes of a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingRecord {
    pub window_t1: Window,
    pub window_t2: Window,
    pub zero_fill: usize,
    /// Frequency subtracted from t1 before the DFT, Hz.
    pub demodulation_hz: f64,
    pub t1_dwell: f64,
    pub t2_dwell: f64,
    pub n1: usize,
    pub n2: usize,
    /// Nuclear Larmor frequency of the acquisition, Hz.
    pub larmor_hz: f64,
}

impl ProcessingRecord {
    pub fn f1_bin(&self, m1: usize) -> f64 {
        1.0 / (self.t1_dwell * m1 as f64)
    }

    /// Half-width of the image-free f1 band centred on the Larmor frequency.
    pub fn band_half_width(&self) -> f64 {
        let fs = 1.0 / self.t1_dwell;
        // Image of f0 + d is at -(f0 + d); the two meet at d = -f0 mod fs/2.
        let r = (2.0 * self.larmor_hz).rem_euclid(fs);
        let separation = r.min(fs - r);
        separation / 2.0
    }
}

/// Complex 2D spectrum, row-major `[m2][m1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    pub values: Vec<Complex64>,
    pub m1: usize,
    pub m2: usize,
    pub f1_axis: Vec<f64>,
    pub f2_axis: Vec<f64>,
    pub processing: ProcessingRecord,
}

impl Spectrum2D {
    pub fn get(&self, k2: usize, k1: usize) -> Complex64 {
        self.values[k2 * self.m1 + k1]
    }

    pub fn power(&self, k2: usize, k1: usize) -> f64 {
        self.get(k2, k1).norm_sqr()
    }

    pub fn power_values(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn f1_bin(&self) -> f64 {
        self.processing.f1_bin(self.m1)
    }

    pub fn f2_bin(&self) -> f64 {
        if self.m2 > 1 {
            1.0 / (self.processing.t2_dwell * self.m2 as f64)
        } else {
            0.0
        }
    }

    /// Index of the f2 bin closest to zero.
    pub fn f2_zero_index(&self) -> usize {
        self.m2 / 2
    }

    pub fn check(&self) -> Result<()> {
        let ok = self.values.len() == self.m1 * self.m2
            && self.f1_axis.len() == self.m1
            && self.f2_axis.len() == self.m2
            && self.f1_axis.windows(2).all(|w| w[1] > w[0])
            && self.f2_axis.windows(2).all(|w| w[1] > w[0]);
        if !ok {
            return Err(Error::InvalidArgument(alloc::string::String::from("inconsistent spectrum dimensions or axes")));
        }
        if self.values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFiniteData);
        }
        Ok(())
    }
}

fn padded(n: usize, factor: usize) -> usize {
    if n <= 1 {
        1
    } else {
        n.next_power_of_two() * factor.max(1)
    }
}

/// Windows, zero-fills and transforms a grid. The f2 axis is two-sided with
/// zero at index `m2 / 2`.
pub fn transform_2d(grid: &TimeGrid2D, options: &TransformOptions) -> Result<Spectrum2D> {
    grid.check()?;
    if options.zero_fill == 0 {
        return Err(Error::InvalidArgument(alloc::string::String::from("zero_fill must be at least 1")));
    }
    let cfg = &grid.metadata.config;
    let (n1, n2) = (grid.n1, grid.n2);
    let (m1, m2) = (padded(n1, options.zero_fill), padded(n2, options.zero_fill));
    let fs1 = 1.0 / grid.t1_dwell;
    let f0 = grid.metadata.larmor_hz;
    let demod = if options.demodulate { f0 - fs1 / 2.0 } else { 0.0 };

    let w1 = options.window_t1.weights(n1, grid.t1_dwell, cfg.t2n);
    let w2 = options.window_t2.weights(n2, grid.t2_dwell, cfg.t2n);
    let mixer: Vec<Complex64> = (0..n1)
        .map(|j| {
            // Reduce the phase modulo one cycle before forming the exponential.
            let cycles = (demod * grid.t1_dwell * j as f64).rem_euclid(1.0);
            let (s, c) = Float::sin_cos(-2.0 * PI * cycles);
            Complex64::new(c, s)
        })
        .collect();

    let mut values = vec![Complex64::new(0.0, 0.0); m1 * m2];
    let mut row = vec![Complex64::new(0.0, 0.0); m1];
    for k in 0..n2 {
        row.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for j in 0..n1 {
            row[j] = grid.get(k, j) * mixer[j] * (w1[j] * w2[k]);
        }
        fft_in_place(&mut row, false);
        values[k * m1..(k + 1) * m1].copy_from_slice(&row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); m2];
    for j in 0..m1 {
        for k in 0..m2 {
            column[k] = values[k * m1 + j];
        }
        fft_in_place(&mut column, false);
        // fftshift: frequency index q lands at position q + m2/2 (mod m2).
        for k in 0..m2 {
            values[((k + m2 / 2) % m2) * m1 + j] = column[k];
        }
    }

    let f1_axis = (0..m1).map(|k| demod + k as f64 * fs1 / m1 as f64).collect();
    let f2_axis = if m2 > 1 {
        let fs2 = 1.0 / grid.t2_dwell;
        (0..m2).map(|k| (k as f64 - (m2 / 2) as f64) * fs2 / m2 as f64).collect()
    } else {
        vec![0.0]
    };
    let spectrum = Spectrum2D {
        values,
        m1,
        m2,
        f1_axis,
        f2_axis,
        processing: ProcessingRecord {
            window_t1: options.window_t1,
            window_t2: options.window_t2,
            zero_fill: options.zero_fill,
            demodulation_hz: demod,
            t1_dwell: grid.t1_dwell,
            t2_dwell: grid.t2_dwell,
            n1,
            n2,
            larmor_hz: f0,
        },
    };
    spectrum.check()?;
    Ok(spectrum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    F1,
    F2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum1D {
    pub axis: Vec<f64>,
    pub power: Vec<f64>,
}

/// Sums power over the axis not kept.
pub fn project_1d(spec: &Spectrum2D, keep: Axis) -> Spectrum1D {
    match keep {
        Axis::F1 => {
            let mut power = vec![0.0; spec.m1];
            for k2 in 0..spec.m2 {
                for (k1, p) in power.iter_mut().enumerate() {
                    *p += spec.power(k2, k1);
                }
            }
            Spectrum1D { axis: spec.f1_axis.clone(), power }
        }
        Axis::F2 => {
            let power = (0..spec.m2).map(|k2| (0..spec.m1).map(|k1| spec.power(k2, k1)).sum()).collect();
            Spectrum1D { axis: spec.f2_axis.clone(), power }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub f1: f64,
    pub f2: f64,
    /// Power at the local maximum.
    pub amplitude: f64,
    /// Phase of the complex spectrum at the maximum, rad.
    pub phase: f64,
    /// `[f1, f2]` uncertainties, Hz.
    pub uncertainty: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeakOptions {
    /// Threshold above the median in units of the MAD-based noise estimate.
    pub threshold_sigma: f64,
    /// Fraction of the largest power a peak must exceed.
    pub relative_floor: f64,
    pub max_peaks: usize,
    /// Restrict to `|f1 - f0| <= band` (Hz) when set.
    pub f1_band: Option<f64>,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self { threshold_sigma: 5.0, relative_floor: 0.01, max_peaks: 64, f1_band: None }
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Offset of the vertex of the parabola through `(−1, a), (0, b), (1, c)`.
fn vertex(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}

/// Local maxima of the power spectrum above `threshold_sigma` robust noise
/// units, with default floor and band settings.
pub fn pick_peaks(spec: &Spectrum2D, threshold_sigma: f64, max_peaks: usize) -> Vec<Peak> {
    pick_peaks_with(spec, &PeakOptions { threshold_sigma, max_peaks, ..PeakOptions::default() })
}

pub fn pick_peaks_with(spec: &Spectrum2D, options: &PeakOptions) -> Vec<Peak> {
    let power = spec.power_values();
    let max = power.iter().copied().fold(0.0, f64::max);
    if max.is_nan() || max <= 0.0 {
        return Vec::new();
    }
    let mut scratch = power.clone();
    let med = median(&mut scratch);
    let mut deviations: Vec<f64> = power.iter().map(|p| (p - med).abs()).collect();
    let mad = median(&mut deviations);
    let threshold = (med + options.threshold_sigma * 1.4826 * mad).max(options.relative_floor * max);

    let (m1, m2) = (spec.m1, spec.m2);
    let at = |k2: usize, k1: usize| power[k2 * m1 + k1];
    let f0 = spec.processing.larmor_hz;
    let mut peaks = Vec::new();
    for k2 in 0..m2 {
        for k1 in 0..m1 {
            let p = at(k2, k1);
            if p.is_nan() || p <= threshold {
                continue;
            }
            let mut is_max = true;
            'scan: for d2 in [-1i64, 0, 1] {
                for d1 in [-1i64, 0, 1] {
                    let n2 = (k2 as i64 + d2).rem_euclid(m2 as i64) as usize;
                    let n1 = (k1 as i64 + d1).rem_euclid(m1 as i64) as usize;
                    if (n2, n1) == (k2, k1) {
                        continue;
                    }
                    let q = at(n2, n1);
                    // Plateaus: only the first cell in raster order survives.
                    let earlier = (n2, n1) < (k2, k1);
                    if q > p || (earlier && q == p) {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let mag = |k2: usize, k1: usize| at(k2, k1).sqrt();
            let d1 = if m1 > 2 {
                vertex(mag(k2, (k1 + m1 - 1) % m1), mag(k2, k1), mag(k2, (k1 + 1) % m1))
            } else {
                0.0
            };
            let d2 = if m2 > 2 {
                vertex(mag((k2 + m2 - 1) % m2, k1), mag(k2, k1), mag((k2 + 1) % m2, k1))
            } else {
                0.0
            };
            let f1 = spec.f1_axis[k1] + d1 * spec.f1_bin();
            let f2 = spec.f2_axis[k2] + d2 * spec.f2_bin();
            if let Some(band) = options.f1_band {
                if (f1 - f0).abs() > band {
                    continue;
                }
            }
            let z = spec.get(k2, k1);
            peaks.push(Peak {
                f1,
                f2,
                amplitude: p,
                phase: Float::atan2(z.im, z.re),
                uncertainty: [spec.f1_bin() / 12f64.sqrt(), spec.f2_bin() / 12f64.sqrt()],
            });
        }
    }
    peaks.sort_by(|a, b| {
        b.amplitude
            .total_cmp(&a.amplitude)
            .then(a.f1.total_cmp(&b.f1))
            .then(a.f2.total_cmp(&b.f2))
    });
    peaks.truncate(options.max_peaks);
    peaks
}
