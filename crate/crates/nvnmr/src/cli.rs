// SPDX-License-Identifier: Apache-2.0

//! Command-line interface.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nvnmr_core::analysis::AssignOptions;
use nvnmr_core::experiments::run_experiment;
use nvnmr_core::lattice::enumerate_pair_frequencies;
use nvnmr_core::spectral::{transform_2d, PeakOptions, TransformOptions, Window};
use nvnmr_core::{ExperimentConfig, PhysicalConstants};

use crate::config_file::{ConfigError, ConfigFile, CONFIG_KEYS};
use crate::container::{self, Dataset, SpectrumDataset};
use crate::parallel::Parallel;
use crate::pipeline::{self, AnalyzeOptions};

#[derive(Debug, Parser)]
#[command(name = "nvnmr", version, about = "Simulate and analyze NV-detected nuclear spin spectra")]
#[command(after_long_help = CONFIG_KEYS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a pulse protocol and write a time-domain dataset.
    #[command(after_long_help = CONFIG_KEYS)]
    Simulate(SimulateArgs),
    /// Fourier transform a time-domain dataset into a spectrum.
    Transform(TransformArgs),
    /// Pick peaks, convert them to couplings and assign pair satellites.
    Analyze(AnalyzeArgs),
    /// List pair displacement classes and their dipolar frequencies.
    LatticeTable(LatticeTableArgs),
    /// Convert peak frequencies to hyperfine couplings and polar positions.
    Localize(LocalizeArgs),
    /// Write a dataset as CSV.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Fid,
    Hyperfine2d,
    Jspec2d,
}

impl ExperimentKind {
    fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fid => "fid",
            ExperimentKind::Hyperfine2d => "hyperfine2d",
            ExperimentKind::Jspec2d => "jspec2d",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub experiment: ExperimentKind,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to NVNMR_WORKERS or the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Windows for t1 and t2, each one of none, exp, cos.
    #[arg(long, default_value = "exp,cos", value_parser = parse_windows)]
    pub window: (Window, Window),
    /// Zero-fill factor applied after padding to a power of two.
    #[arg(long, default_value_t = 4)]
    pub zerofill: usize,
    /// Keep the t1 axis at baseband instead of mixing down by the Larmor frequency.
    #[arg(long)]
    pub no_demod: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub lattice_shells: usize,
    #[arg(long, default_value_t = 50.0)]
    pub tolerance_hz: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    pub threshold_sigma: f64,
    #[arg(long, default_value_t = 0.01)]
    pub relative_floor: f64,
    #[arg(long, default_value_t = 64)]
    pub max_peaks: usize,
    /// Peaks with |f2| below this are treated as unsplit centre lines.
    #[arg(long, default_value_t = 100.0)]
    pub center_floor_hz: f64,
}

#[derive(Debug, Args)]
pub struct LatticeTableArgs {
    #[arg(long)]
    pub shells: usize,
    /// Field direction in crystal coordinates, e.g. 1,1,1.
    #[arg(long, default_value = "1,1,1", value_parser = parse_axis)]
    pub field_axis: [f64; 3],
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// CSV with f1_hz and f2_hz columns.
    #[arg(long)]
    pub peaks: PathBuf,
    /// Bias field, T.
    #[arg(long, default_value_t = ExperimentConfig::default().b0)]
    pub b0: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub csv: PathBuf,
}

fn parse_window(s: &str) -> Result<Window, String> {
    match s.trim() {
        "none" => Ok(Window::None),
        "exp" => Ok(Window::Exponential),
        "cos" => Ok(Window::Cosine),
        other => Err(format!("unknown window '{other}' (expected none, exp or cos)")),
    }
}

fn parse_windows(s: &str) -> Result<(Window, Window), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| String::from("expected two windows, e.g. exp,cos"))?;
    Ok((parse_window(a)?, parse_window(b)?))
}

fn parse_axis(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| String::from("expected three components, e.g. 1,1,1"))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(&a),
        Command::Transform(a) => transform(&a),
        Command::Analyze(a) => analyze(&a),
        Command::LatticeTable(a) => lattice_table(&a),
        Command::Localize(a) => localize(&a),
        Command::Export(a) => export(&a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let file = ConfigFile::load(&a.config).map_err(|e: ConfigError| anyhow!(e))?;
    let spec = file.experiment(a.experiment.name()).expect("every experiment kind has a section");
    let runner = match a.workers {
        Some(n) => Parallel::new(n),
        None => Parallel::from_env(),
    };
    let grid = run_experiment(&file.system, &file.config, &spec, &runner)?;
    let (n2, n1) = (grid.n2, grid.n1);
    container::write(&a.out, &Dataset::TimeGrid(grid))?;
    println!("{}: {} rows x {} samples ({})", a.out.display(), n2, n1, spec.name());
    Ok(())
}

fn read_spectrum(path: &Path) -> Result<SpectrumDataset> {
    match container::read(path)? {
        Dataset::Spectrum(s) => Ok(s),
        other => bail!("{}: expected a spectrum, found {:?}", path.display(), other.kind()),
    }
}

fn transform(a: &TransformArgs) -> Result<()> {
    let grid = match container::read(&a.input)? {
        Dataset::TimeGrid(g) => g,
        other => bail!("{}: expected a time grid, found {:?}", a.input.display(), other.kind()),
    };
    let opts =
        TransformOptions { window_t1: a.window.0, window_t2: a.window.1, zero_fill: a.zerofill, demodulate: !a.no_demod };
    let spectrum = transform_2d(&grid, &opts)?;
    let (m2, m1) = (spectrum.m2, spectrum.m1);
    container::write(&a.out, &Dataset::Spectrum(SpectrumDataset { spectrum, source: grid.metadata }))?;
    println!("{}: {} x {} spectrum", a.out.display(), m2, m1);
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let dataset = read_spectrum(&a.input)?;
    let opts = AnalyzeOptions {
        lattice_shells: a.lattice_shells,
        assign: AssignOptions { tolerance_hz: a.tolerance_hz, center_floor_hz: a.center_floor_hz },
        peaks: PeakOptions {
            threshold_sigma: a.threshold_sigma,
            relative_floor: a.relative_floor,
            max_peaks: a.max_peaks,
            f1_band: None,
        },
    };
    let report = pipeline::analyze(&dataset, &opts)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let p = a.out_dir.join(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    };
    pipeline::write_peaks(create("peaks.csv")?, &report.peaks)?;
    pipeline::write_hyperfine(create("hyperfine.csv")?, &report.hyperfine)?;
    pipeline::write_assignments(create("assignments.csv")?, &report.assignments)?;
    println!("{} peaks; reports in {}", report.peaks.len(), a.out_dir.display());
    Ok(())
}

fn lattice_table(a: &LatticeTableArgs) -> Result<()> {
    let table = enumerate_pair_frequencies(a.shells, &a.field_axis, &PhysicalConstants::default())?;
    pipeline::write_lattice_table(output(a.out.as_deref())?, &table)
}

fn localize(a: &LocalizeArgs) -> Result<()> {
    let constants = PhysicalConstants::default();
    let rows: Vec<_> = pipeline::read_peak_frequencies(&a.peaks)?
        .into_iter()
        .enumerate()
        .map(|(i, (f1, f2))| pipeline::localize_peak(i, f1, f2, a.b0, &constants))
        .collect();
    pipeline::write_hyperfine(output(a.out.as_deref())?, &rows)
}

fn export(a: &ExportArgs) -> Result<()> {
    let dataset = container::read(&a.input)?;
    let file = File::create(&a.csv).with_context(|| format!("creating {}", a.csv.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    match &dataset {
        Dataset::TimeGrid(g) => {
            w.write_record(["t1_s", "t2_s", "re", "im"])?;
            for k in 0..g.n2 {
                for j in 0..g.n1 {
                    let z = g.get(k, j);
                    let t1 = j as f64 * g.t1_dwell;
                    let t2 = k as f64 * g.t2_dwell;
                    w.write_record([t1.to_string(), t2.to_string(), z.re.to_string(), z.im.to_string()])?;
                }
            }
        }
        Dataset::Spectrum(s) => {
            let sp = &s.spectrum;
            w.write_record(["f1_hz", "f2_hz", "re", "im", "power"])?;
            for k2 in 0..sp.m2 {
                for k1 in 0..sp.m1 {
                    let z = sp.get(k2, k1);
                    w.write_record([
                        sp.f1_axis[k1].to_string(),
                        sp.f2_axis[k2].to_string(),
                        z.re.to_string(),
                        z.im.to_string(),
                        sp.power(k2, k1).to_string(),
                    ])?;
                }
            }
        }
        Dataset::Table(t) => {
            w.write_record(&t.columns)?;
            for row in &t.rows {
                w.write_record(row.iter().map(|x| x.to_string()))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
