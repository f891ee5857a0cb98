// SPDX-License-Identifier: Apache-2.0

//! Spectrum analysis orchestration and CSV reports.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use nvnmr_core::analysis::{
    assign_pairs, freqs_to_hyperfine, hyperfine_to_polar, AssignOptions, Assignment, HyperfineEstimate,
    LocalizationResult,
};
use nvnmr_core::lattice::{enumerate_pair_frequencies, PairCandidateTable};
use nvnmr_core::spectral::{pick_peaks_with, Peak, PeakOptions};
use nvnmr_core::PhysicalConstants;

use crate::container::SpectrumDataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    pub lattice_shells: usize,
    pub assign: AssignOptions,
    pub peaks: PeakOptions,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { lattice_shells: 3, assign: AssignOptions::default(), peaks: PeakOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperfineRow {
    pub peak_index: usize,
    pub f1: f64,
    pub f2: f64,
    pub estimate: HyperfineEstimate,
    pub localization: std::result::Result<LocalizationResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub peaks: Vec<Peak>,
    pub hyperfine: Vec<HyperfineRow>,
    pub assignments: Vec<Assignment>,
    pub table: PairCandidateTable,
}

/// Hyperfine estimate and polar position for one peak.
pub fn localize_peak(index: usize, f1: f64, f2: f64, b0: f64, constants: &PhysicalConstants) -> HyperfineRow {
    let estimate = freqs_to_hyperfine(f1, f2, b0, constants);
    let localization = hyperfine_to_polar(estimate.a_par, estimate.a_perp, constants).map_err(|e| e.to_string());
    HyperfineRow { peak_index: index, f1, f2, estimate, localization }
}

/// Picks peaks inside the image-free band, converts them and matches satellites.
pub fn analyze(dataset: &SpectrumDataset, options: &AnalyzeOptions) -> Result<AnalysisReport> {
    let spec = &dataset.spectrum;
    let cfg = &dataset.source.config;
    let mut peak_opts = options.peaks;
    if peak_opts.f1_band.is_none() && spec.processing.demodulation_hz != 0.0 {
        peak_opts.f1_band = Some(spec.processing.band_half_width());
    }
    let peaks = pick_peaks_with(spec, &peak_opts);
    let hyperfine =
        peaks.iter().enumerate().map(|(i, p)| localize_peak(i, p.f1, p.f2, cfg.b0, &cfg.constants)).collect();
    let table = enumerate_pair_frequencies(options.lattice_shells, &cfg.nv_axis, &cfg.constants)
        .context("building the pair candidate table")?;
    let assignments = assign_pairs(&peaks, &table, &options.assign)?;
    Ok(AnalysisReport { peaks, hyperfine, assignments, table })
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn displacement(d: [i32; 3]) -> String {
    format!("[{},{},{}]", d[0], d[1], d[2])
}

pub fn write_peaks<W: Write>(out: W, peaks: &[Peak]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "f1_hz", "f2_hz", "amplitude", "phase_rad", "f1_uncertainty_hz", "f2_uncertainty_hz"])?;
    for (i, p) in peaks.iter().enumerate() {
        w.write_record([
            i.to_string(),
            num(p.f1),
            num(p.f2),
            num(p.amplitude),
            num(p.phase),
            num(p.uncertainty[0]),
            num(p.uncertainty[1]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `f1_hz`/`f2_hz` columns of a peaks CSV.
pub fn read_peak_frequencies(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).with_context(|| format!("{}: missing column {name}", path.display()))
    };
    let (i1, i2) = (col("f1_hz")?, col("f2_hz")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f1: f64 = rec.get(i1).unwrap_or_default().parse().context("parsing f1_hz")?;
        let f2: f64 = rec.get(i2).unwrap_or_default().parse().context("parsing f2_hz")?;
        out.push((f1, f2));
    }
    Ok(out)
}

pub fn write_hyperfine<W: Write>(out: W, rows: &[HyperfineRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "f1_hz",
        "f2_hz",
        "a_par_hz",
        "a_perp_hz",
        "validity_ratio",
        "r_m",
        "theta_deg",
        "mirror_ambiguity",
        "note",
    ])?;
    let two_pi = 2.0 * std::f64::consts::PI;
    for row in rows {
        let (r, theta, mirror, note) = match &row.localization {
            Ok(l) => (num(l.r), num(l.theta.to_degrees()), l.mirror_ambiguity.to_string(), String::new()),
            Err(e) => (String::new(), String::new(), String::new(), e.clone()),
        };
        w.write_record([
            row.peak_index.to_string(),
            num(row.f1),
            num(row.f2),
            num(row.estimate.a_par / two_pi),
            num(row.estimate.a_perp / two_pi),
            num(row.estimate.validity_ratio),
            r,
            theta,
            mirror,
            note,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_assignments<W: Write>(out: W, assignments: &[Assignment]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "peak_index",
        "f1_hz",
        "f2_hz",
        "status",
        "rank",
        "shell",
        "displacement",
        "multiplicity",
        "distance_m",
        "omega_d_hz",
        "residual_hz",
    ])?;
    for a in assignments {
        let head = [a.peak_index.to_string(), num(a.f1), num(a.f2), a.status.label().to_string()];
        if a.candidates.is_empty() {
            let mut rec: Vec<String> = head.to_vec();
            rec.extend(std::iter::repeat_n(String::new(), 7));
            w.write_record(&rec)?;
        }
        for (rank, c) in a.candidates.iter().enumerate() {
            let mut rec: Vec<String> = head.to_vec();
            rec.extend([
                (rank + 1).to_string(),
                c.shell_label.clone(),
                displacement(c.displacement),
                c.multiplicity.to_string(),
                num(c.distance),
                num(c.omega_d_hz),
                num(c.residual_hz),
            ]);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_lattice_table<W: Write>(out: W, table: &PairCandidateTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shell", "label", "displacement", "multiplicity", "distance_m", "angle_deg", "omega_d_hz"])?;
    for e in &table.entries {
        w.write_record([
            e.shell.to_string(),
            e.shell_label.clone(),
            displacement(e.displacement),
            e.multiplicity.to_string(),
            num(e.distance),
            num(e.angle_to_field.to_degrees()),
            num(e.omega_d_hz()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
