// SPDX-License-Identifier: Apache-2.0

//! Self-describing dataset container.
//!
//! Binary file: 8-byte magic, `u32` format version, `u32` payload kind,
//! `u64` rows, `u64` columns (all little-endian), then the body as
//! little-endian `f64`, row-major. Time grids and spectra store `(re, im)`
//! pairs; tables store one value per cell. A JSON sidecar at `<path>.json`
//! carries axes, the acquisition snapshot and the processing record.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use nvnmr_core::experiments::{GridMetadata, TimeGrid2D};
use nvnmr_core::spectral::{ProcessingRecord, Spectrum2D};
use serde::{Deserialize, Serialize};

pub const MAGIC: [u8; 8] = *b"NVNMRDS\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Timegrid,
    Spectrum,
    Table,
}

impl PayloadKind {
    fn code(self) -> u32 {
        match self {
            PayloadKind::Timegrid => 1,
            PayloadKind::Spectrum => 2,
            PayloadKind::Table => 3,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(PayloadKind::Timegrid),
            2 => Some(PayloadKind::Spectrum),
            3 => Some(PayloadKind::Table),
            _ => None,
        }
    }
}

/// A spectrum together with the acquisition it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDataset {
    pub spectrum: Spectrum2D,
    pub source: GridMetadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    TimeGrid(TimeGrid2D),
    Spectrum(SpectrumDataset),
    Table(Table),
}

impl Dataset {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Dataset::TimeGrid(_) => PayloadKind::Timegrid,
            Dataset::Spectrum(_) => PayloadKind::Spectrum,
            Dataset::Table(_) => PayloadKind::Table,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    format_version: u32,
    kind: PayloadKind,
    software_version: String,
    rows: u64,
    cols: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t1_dwell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t2_dwell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f1_axis: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f2_axis: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    acquisition: Option<GridMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    processing: Option<ProcessingRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    columns: Option<Vec<String>>,
}

impl Sidecar {
    fn new(kind: PayloadKind, rows: usize, cols: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            rows: rows as u64,
            cols: cols as u64,
            t1_dwell: None,
            t2_dwell: None,
            f1_axis: None,
            f2_axis: None,
            acquisition: None,
            processing: None,
            columns: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}: not a dataset container (bad magic)")]
    BadMagic(PathBuf),
    #[error("{path}: unsupported container format version {found} (this build reads version {expected})")]
    Version { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: corrupt container: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("{path}: sidecar: {reason}")]
    Sidecar { path: PathBuf, reason: String },
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ContainerError + '_ {
    move |source| ContainerError::Io { path: path.to_path_buf(), source }
}

fn encode_complex(values: &[Complex64], out: &mut Vec<u8>) {
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

/// Writes the container and its sidecar.
pub fn write(path: &Path, dataset: &Dataset) -> Result<(), ContainerError> {
    let (rows, cols, sidecar, body) = match dataset {
        Dataset::TimeGrid(g) => {
            let mut s = Sidecar::new(PayloadKind::Timegrid, g.n2, g.n1);
            s.t1_dwell = Some(g.t1_dwell);
            s.t2_dwell = Some(g.t2_dwell);
            s.acquisition = Some(g.metadata.clone());
            let mut body = Vec::with_capacity(g.data.len() * 16);
            encode_complex(&g.data, &mut body);
            (g.n2, g.n1, s, body)
        }
        Dataset::Spectrum(d) => {
            let sp = &d.spectrum;
            let mut s = Sidecar::new(PayloadKind::Spectrum, sp.m2, sp.m1);
            s.f1_axis = Some(sp.f1_axis.clone());
            s.f2_axis = Some(sp.f2_axis.clone());
            s.processing = Some(sp.processing.clone());
            s.acquisition = Some(d.source.clone());
            let mut body = Vec::with_capacity(sp.values.len() * 16);
            encode_complex(&sp.values, &mut body);
            (sp.m2, sp.m1, s, body)
        }
        Dataset::Table(t) => {
            let mut s = Sidecar::new(PayloadKind::Table, t.rows.len(), t.columns.len());
            s.columns = Some(t.columns.clone());
            let mut body = Vec::with_capacity(t.rows.len() * t.columns.len() * 8);
            for row in &t.rows {
                if row.len() != t.columns.len() {
                    return Err(ContainerError::Corrupt {
                        path: path.to_path_buf(),
                        reason: format!("table row has {} cells, expected {}", row.len(), t.columns.len()),
                    });
                }
                for v in row {
                    body.extend_from_slice(&v.to_le_bytes());
                }
            }
            (t.rows.len(), t.columns.len(), s, body)
        }
    };
    let mut bytes = Vec::with_capacity(HEADER_LEN + body.len());
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&dataset.kind().code().to_le_bytes());
    bytes.extend_from_slice(&(rows as u64).to_le_bytes());
    bytes.extend_from_slice(&(cols as u64).to_le_bytes());
    bytes.extend_from_slice(&body);
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&bytes).map_err(io_err(path))?;
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| ContainerError::Sidecar {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let side = sidecar_path(path);
    fs::write(&side, json + "\n").map_err(io_err(&side))?;
    Ok(())
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> [u8; N] {
    let mut out = [0u8; N];
    out.copy_from_slice(&bytes[*at..*at + N]);
    *at += N;
    out
}

fn decode_complex(body: &[u8]) -> Vec<Complex64> {
    body.chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect()
}

/// Reads a container and its sidecar, rejecting other format versions.
pub fn read(path: &Path) -> Result<Dataset, ContainerError> {
    let mut bytes = Vec::new();
    fs::File::open(path).map_err(io_err(path))?.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.len() < HEADER_LEN || bytes[..8] != MAGIC {
        return Err(ContainerError::BadMagic(path.to_path_buf()));
    }
    let mut at = 8;
    let version = u32::from_le_bytes(take::<4>(&bytes, &mut at));
    if version != FORMAT_VERSION {
        return Err(ContainerError::Version { path: path.to_path_buf(), found: version, expected: FORMAT_VERSION });
    }
    let corrupt = |reason: String| ContainerError::Corrupt { path: path.to_path_buf(), reason };
    let code = u32::from_le_bytes(take::<4>(&bytes, &mut at));
    let kind = PayloadKind::from_code(code).ok_or_else(|| corrupt(format!("unknown payload kind {code}")))?;
    let rows = u64::from_le_bytes(take::<8>(&bytes, &mut at)) as usize;
    let cols = u64::from_le_bytes(take::<8>(&bytes, &mut at)) as usize;
    let body = &bytes[HEADER_LEN..];
    let cell = if kind == PayloadKind::Table { 8 } else { 16 };
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(cell)) != Some(body.len()) {
        return Err(corrupt(format!("body of {} bytes does not match {rows} x {cols}", body.len())));
    }

    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(io_err(&side))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| ContainerError::Sidecar { path: side.clone(), reason: e.to_string() })?;
    let sidecar_err = |reason: &str| ContainerError::Sidecar { path: side.clone(), reason: reason.to_string() };
    if sidecar.format_version != FORMAT_VERSION {
        return Err(ContainerError::Version {
            path: side.clone(),
            found: sidecar.format_version,
            expected: FORMAT_VERSION,
        });
    }
    if sidecar.kind != kind || sidecar.rows != rows as u64 || sidecar.cols != cols as u64 {
        return Err(sidecar_err("header and sidecar disagree"));
    }

    match kind {
        PayloadKind::Timegrid => {
            let grid = TimeGrid2D {
                data: decode_complex(body),
                n1: cols,
                n2: rows,
                t1_dwell: sidecar.t1_dwell.ok_or_else(|| sidecar_err("missing t1_dwell"))?,
                t2_dwell: sidecar.t2_dwell.ok_or_else(|| sidecar_err("missing t2_dwell"))?,
                metadata: sidecar.acquisition.ok_or_else(|| sidecar_err("missing acquisition"))?,
            };
            Ok(Dataset::TimeGrid(grid))
        }
        PayloadKind::Spectrum => {
            let spectrum = Spectrum2D {
                values: decode_complex(body),
                m1: cols,
                m2: rows,
                f1_axis: sidecar.f1_axis.ok_or_else(|| sidecar_err("missing f1_axis"))?,
                f2_axis: sidecar.f2_axis.ok_or_else(|| sidecar_err("missing f2_axis"))?,
                processing: sidecar.processing.ok_or_else(|| sidecar_err("missing processing record"))?,
            };
            spectrum.check().map_err(|e| sidecar_err(&e.to_string()))?;
            let source = sidecar.acquisition.ok_or_else(|| sidecar_err("missing acquisition"))?;
            Ok(Dataset::Spectrum(SpectrumDataset { spectrum, source }))
        }
        PayloadKind::Table => {
            let columns = sidecar.columns.ok_or_else(|| sidecar_err("missing columns"))?;
            let values: Vec<f64> =
                body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let rows = if cols == 0 { vec![Vec::new(); rows] } else { values.chunks(cols).map(<[f64]>::to_vec).collect() };
            Ok(Dataset::Table(Table { columns, rows }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nvnmr_core::experiments::{run_fid_grid, FidExperiment};
    use nvnmr_core::spectral::{transform_2d, TransformOptions};
    use nvnmr_core::{ExperimentConfig, NuclearSpinSpec, SpinSystemSpec};

    fn small_grid() -> TimeGrid2D {
        let config = ExperimentConfig { n1: 16, ..ExperimentConfig::default() };
        let system = SpinSystemSpec::new(vec![NuclearSpinSpec::with_couplings(6.0e4, 1.0e5, 0.3, 0.5)]);
        run_fid_grid(&system, &config, &FidExperiment::default()).unwrap()
    }

    fn bits(v: &[Complex64]) -> Vec<(u64, u64)> {
        v.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
    }

    #[test]
    fn timegrid_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.nvds");
        let grid = small_grid();
        write(&path, &Dataset::TimeGrid(grid.clone())).unwrap();
        match read(&path).unwrap() {
            Dataset::TimeGrid(back) => {
                assert_eq!(bits(&back.data), bits(&grid.data));
                assert_eq!(back, grid);
            }
            other => panic!("{:?}", other.kind()),
        }
    }

    #[test]
    fn spectrum_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.nvds");
        let grid = small_grid();
        let spectrum = transform_2d(&grid, &TransformOptions::default()).unwrap();
        let ds = SpectrumDataset { spectrum, source: grid.metadata };
        write(&path, &Dataset::Spectrum(ds.clone())).unwrap();
        match read(&path).unwrap() {
            Dataset::Spectrum(back) => {
                assert_eq!(bits(&back.spectrum.values), bits(&ds.spectrum.values));
                assert_eq!(back, ds);
            }
            other => panic!("{:?}", other.kind()),
        }
    }

    #[test]
    fn table_round_trip_keeps_edge_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.nvds");
        let table = Table {
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec![-0.0, f64::MIN_POSITIVE / 2.0], vec![1e300, 0.1 + 0.2]],
        };
        write(&path, &Dataset::Table(table.clone())).unwrap();
        match read(&path).unwrap() {
            Dataset::Table(back) => {
                let flat = |t: &Table| t.rows.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
                assert_eq!(flat(&back), flat(&table));
                assert_eq!(back.columns, table.columns);
            }
            other => panic!("{:?}", other.kind()),
        }
        let ragged = Table { columns: vec!["a".into()], rows: vec![vec![1.0, 2.0]] };
        assert!(matches!(write(&path, &Dataset::Table(ragged)), Err(ContainerError::Corrupt { .. })));
    }

    #[test]
    fn rejects_other_versions_and_damage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.nvds");
        write(&path, &Dataset::TimeGrid(small_grid())).unwrap();
        let original = fs::read(&path).unwrap();

        let mut bumped = original.clone();
        bumped[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        fs::write(&path, &bumped).unwrap();
        assert!(matches!(read(&path), Err(ContainerError::Version { found: 2, expected: 1, .. })));

        let mut magic = original.clone();
        magic[0] = b'X';
        fs::write(&path, &magic).unwrap();
        assert!(matches!(read(&path), Err(ContainerError::BadMagic(_))));

        fs::write(&path, &original[..original.len() - 8]).unwrap();
        assert!(matches!(read(&path), Err(ContainerError::Corrupt { .. })));

        fs::write(&path, &original).unwrap();
        let side = sidecar_path(&path);
        let text = fs::read_to_string(&side).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        fs::write(&side, text).unwrap();
        assert!(matches!(read(&path), Err(ContainerError::Version { found: 7, .. })));
    }
}
