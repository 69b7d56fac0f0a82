//! `narrowfesh`: Feshbach-resonance spectroscopy in an optical lattice from
//! the command line.

mod commands;
mod output;
mod ranges;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use narrowfesh_core::{Error, Provenance};

use output::Format;

pub const CATALOG_ENV: &str = "NARROWFESH_CATALOG";

#[derive(Debug, Parser)]
#[command(
    name = "narrowfesh",
    version,
    about = "Narrow Feshbach resonance spectroscopy toolkit"
)]
pub struct Cli {
    /// Resonance catalog file; the bundled table is used when absent.
    #[arg(long, global = true, env = CATALOG_ENV)]
    pub catalog: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Write the machine-readable output here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List or export the resonance catalog.
    Catalog(CatalogArgs),
    /// Hubbard parameters for a lattice depth, optionally along a field grid.
    Hubbard(HubbardArgs),
    /// Deterministic Landau-Zener survival versus ramp rate.
    LzCurve(LzCurveArgs),
    /// Monte-Carlo sweep dataset under field noise.
    SweepSim(SweepSimArgs),
    /// Predicted loss-dip fields.
    Dips(DipsArgs),
    /// Synthetic loss spectrum.
    SpectrumSim(SpectrumSimArgs),
    /// Fit the resonance width to a sweep dataset.
    FitWidth(FitWidthArgs),
    /// Fit the resonance pole to observed loss dips.
    FitPole(FitPoleArgs),
    /// Compare measured resonances with the theory column of the catalog.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ResonanceArgs {
    /// Catalog label, e.g. 4g(4).
    #[arg(long)]
    pub resonance: Option<String>,
    #[arg(long, default_value_t = Provenance::Experiment)]
    pub provenance: Provenance,
    /// Override the pole B0 (G).
    #[arg(long, allow_negative_numbers = true)]
    pub pole: Option<f64>,
    /// Override the signed width ΔB (G).
    #[arg(long, allow_negative_numbers = true)]
    pub width: Option<f64>,
    /// Override the background scattering length (a0).
    #[arg(long, allow_negative_numbers = true)]
    pub abg: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct LatticeArgs {
    /// Lattice depth in recoil energies, applied to all axes.
    #[arg(long)]
    pub depth: Option<f64>,
    /// Per-axis depths `x,y,z` in recoil energies.
    #[arg(long, conflicts_with = "depth")]
    pub depths: Option<String>,
    #[arg(long, default_value_t = 1064.5)]
    pub wavelength_nm: f64,
    /// Gravity compensated by a magnetic gradient (no tilt).
    #[arg(long)]
    pub levitated: bool,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    /// Only entries of this provenance.
    #[arg(long)]
    pub provenance: Option<Provenance>,
    /// Emit the catalog file format instead of a table.
    #[arg(long)]
    pub export: bool,
}

#[derive(Debug, Args)]
pub struct HubbardArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub resonance: ResonanceArgs,
    /// Scattering length (a0) for the on-site interaction.
    #[arg(long, allow_negative_numbers = true)]
    pub a_s: Option<f64>,
    /// Field grid `lo:hi:N` (G); needs a resonance.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct LzCurveArgs {
    #[command(flatten)]
    pub resonance: ResonanceArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Ramp rates (G/s): `lo:hi:logN`, `lo:hi:N` or a comma list.
    #[arg(long)]
    pub rates: Option<String>,
    #[arg(long, default_value_t = narrowfesh_core::association::DEFAULT_P0)]
    pub p0: f64,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Field noise `freq:amp[:phase],...` (Hz, G, rad) or `none`.
    #[arg(long, default_value = "50:3.33e-3,150:1.67e-3")]
    pub noise: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Smallest settable field step (G).
    #[arg(long, default_value_t = narrowfesh_core::lattice::DEFAULT_RESOLUTION)]
    pub resolution: f64,
}

#[derive(Debug, Args)]
pub struct SweepSimArgs {
    #[command(flatten)]
    pub resonance: ResonanceArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Ramp rates (G/s); defaults to a log grid around half conversion.
    #[arg(long)]
    pub rates: Option<String>,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long, default_value_t = narrowfesh_core::association::DEFAULT_P0)]
    pub p0: f64,
    /// Gaussian readout noise added to each n_rel (absolute).
    #[arg(long, default_value_t = 0.05)]
    pub readout_noise: f64,
    /// Ramp starts and ends this far from the pole (G).
    #[arg(long, default_value_t = 0.1)]
    pub half_span: f64,
}

#[derive(Debug, Args)]
pub struct DipsArgs {
    #[command(flatten)]
    pub resonance: ResonanceArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Field resolution (G) below which dips merge.
    #[arg(long, default_value_t = narrowfesh_core::lattice::DEFAULT_RESOLUTION)]
    pub resolution: f64,
}

#[derive(Debug, Args)]
pub struct SpectrumSimArgs {
    #[command(flatten)]
    pub resonance: ResonanceArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Set-field grid `lo:hi:N` (G); defaults to 20 mG beyond the outermost dips.
    #[arg(long)]
    pub grid: Option<String>,
    /// Hold time (s).
    #[arg(long, default_value_t = 0.05)]
    pub hold: f64,
    /// Peak loss rate per dip (1/s).
    #[arg(long, default_value_t = 50.0)]
    pub gamma: f64,
    /// Half-width of each loss window (G); derived from tunneling when absent.
    #[arg(long)]
    pub dip_width: Option<f64>,
    #[arg(long, default_value_t = 1e5)]
    pub atoms: f64,
    /// Relative shot-to-shot atom-number noise, drawn from the seed.
    #[arg(long, default_value_t = 0.0)]
    pub atom_noise: f64,
    /// Cloud extent along the gradient (μm); enables gradient broadening.
    #[arg(long)]
    pub cloud_size_um: Option<f64>,
    /// Magnetic gradient (G/cm).
    #[arg(long, default_value_t = narrowfesh_core::spectroscopy::LEVITATION_GRADIENT)]
    pub gradient: f64,
}

#[derive(Debug, Args)]
pub struct FitWidthArgs {
    /// Sweep CSV (`rate_G_per_s,n_rel,sigma`); `-` reads stdin.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub resonance: ResonanceArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Report an unconverged fit instead of failing.
    #[arg(long)]
    pub no_strict: bool,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
}

#[derive(Debug, Args)]
pub struct FitPoleArgs {
    /// Observed dips `B[:sigma[:channel]],...` (G).
    #[arg(long, conflicts_with = "input")]
    pub dips: Option<String>,
    /// Dip CSV (`B_G,sigma_G,channel`).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub resonance: ResonanceArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long, default_value_t = narrowfesh_core::lattice::DEFAULT_RESOLUTION)]
    pub resolution: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, required_unless_present = "all")]
    pub label: Option<String>,
    /// Measured pole (G).
    #[arg(long)]
    pub b0: Option<f64>,
    /// Measured |ΔB| (G).
    #[arg(long, allow_negative_numbers = true)]
    pub width: Option<f64>,
    /// Compare every experimental catalog entry that has a theory value.
    #[arg(long, conflicts_with_all = ["label", "b0", "width"])]
    pub all: bool,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Convergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Convergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Convergence(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NotConverged { .. } => Failure::Convergence(msg),
            Error::InvalidParameter { .. } | Error::UnknownLabel { .. } => Failure::Usage(msg),
            _ => Failure::Data(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
