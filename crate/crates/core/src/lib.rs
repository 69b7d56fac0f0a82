//! Forward models and inference for narrow Feshbach resonances of atoms held
//! in a cubic optical lattice. Widths come from Landau-Zener association
//! sweeps, poles from lattice loss spectra.
//!
//! Unit conventions at the public surface: magnetic fields in gauss, ramp
//! rates in G/s, times in seconds, lattice depths in recoil energies,
//! scattering lengths in Bohr radii. Energies are returned in joules.
//!
//! ```
//! use narrowfesh_core::{predict_dips, LatticeConfig, Provenance, ResonanceCatalog};
//! # fn main() -> narrowfesh_core::Result<()> {
//! let catalog = ResonanceCatalog::bundled();
//! let res = catalog.get("4g(4)", Provenance::Experiment)?;
//! let dips = predict_dips(res, &LatticeConfig::isotropic(20.0)?, 8e-3)?;
//! assert_eq!(dips.features().len(), 2);
//! # Ok(())
//! # }
//! ```

pub mod association;
pub mod catalog;
pub mod constants;
pub mod dataset;
pub mod error;
pub mod inference;
pub mod lattice;
pub mod noise;
mod quadrature;
pub mod resonance;
pub mod spectroscopy;

pub use association::{
    lz_curve, lz_exponent, simulate_noisy_sweep, survival_probability, RampSchedule, SweepOutcome,
};
pub use catalog::{load_catalog, ResonanceCatalog};
pub use constants::Constants;
pub use error::{Error, Result};
pub use inference::{
    compare_to_theory, fit_pole, fit_width, DipObservation, FitResult, Measurement, PoleFit,
    SweepDataset, TheoryComparison,
};
pub use lattice::{
    gravity_tilt, onsite_interaction, oscillator_length, predict_dips, recoil_energy, tunneling_j,
    Axis, DipChannel, DipPrediction, LatticeConfig,
};
pub use noise::{NoiseComponent, NoiseModel};
pub use resonance::{scattering_length, zero_crossing, Provenance, ResonanceSpec};
pub use spectroscopy::{
    resonance_duty_cycle, synthesize_spectrum, GradientBroadening, LossSpectrum, SpectrumConfig,
};
