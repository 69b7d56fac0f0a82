//! Forward model for atom-loss spectra of a singly occupied Mott insulator.
//!
//! Each predicted dip field removes atoms at a peak rate Γ while the noisy
//! field sits within a window around it; the remaining atom number after the
//! hold time is `N₀·exp(−t_H·Σ Γ·duty)`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    gravity_tilt, onsite_interaction, predict_dips, tunneling_j, Axis, DipPrediction,
    LatticeConfig, DEFAULT_RESOLUTION,
};
use crate::noise::NoiseModel;
use crate::quadrature::{gauss_legendre, integrate_piecewise};
use crate::resonance::{field_for_scattering_length, ResonanceSpec};

/// Random-phase realisations averaged when a multi-component waveform has
/// unspecified phases.
pub const PHASE_DRAWS: usize = 8;
const MIN_SAMPLES_PER_PERIOD: usize = 4096;
const MAX_SAMPLES_PER_PERIOD: usize = 1 << 20;
/// Compensation gradient that levitates Cs against gravity (G/cm).
pub const LEVITATION_GRADIENT: f64 = 31.0;

/// Fraction of time the offset of `noise` lies in `[lo, hi]`.
pub struct DutyCycle<'a> {
    noise: &'a NoiseModel,
    kind: Kind,
}

enum Kind {
    Quiet,
    Sinusoid { amplitude: f64 },
    Sampled { period: f64, draws: Vec<Waveform> },
}

struct Waveform {
    phases: Vec<f64>,
    values: Vec<f64>,
}

impl<'a> DutyCycle<'a> {
    pub fn new(noise: &'a NoiseModel) -> Self {
        let active: Vec<_> = noise.active().collect();
        let kind = match active.len() {
            0 => Kind::Quiet,
            1 => Kind::Sinusoid {
                amplitude: active[0].amplitude,
            },
            _ => {
                let period = common_period(noise);
                let f_max = active.iter().map(|c| c.frequency).fold(0.0, f64::max);
                let samples = ((64.0 * f_max * period).ceil() as usize)
                    .clamp(MIN_SAMPLES_PER_PERIOD, MAX_SAMPLES_PER_PERIOD);
                let phase_sets: Vec<Vec<f64>> = if noise.has_random_phases() {
                    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
                    rng.set_stream(u64::MAX);
                    (0..PHASE_DRAWS)
                        .map(|_| noise.draw_phases(&mut rng))
                        .collect()
                } else {
                    vec![noise.draw_phases(&mut ChaCha8Rng::seed_from_u64(0))]
                };
                let dt = period / samples as f64;
                let draws = phase_sets
                    .into_iter()
                    .map(|phases| Waveform {
                        values: (0..=samples)
                            .map(|k| noise.offset(k as f64 * dt, &phases))
                            .collect(),
                        phases,
                    })
                    .collect();
                Kind::Sampled { period, draws }
            }
        };
        DutyCycle { noise, kind }
    }

    pub fn fraction(&self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return 0.0;
        }
        match &self.kind {
            Kind::Quiet => f64::from(lo <= 0.0 && 0.0 <= hi),
            Kind::Sinusoid { amplitude } => {
                // arcsine law: P(A sin θ ≤ y) = 1/2 + asin(y/A)/π
                let cdf = |y: f64| 0.5 + (y / amplitude).clamp(-1.0, 1.0).asin() / PI;
                (cdf(hi) - cdf(lo)).max(0.0)
            }
            Kind::Sampled { period, draws } => {
                let amp = self.noise.total_amplitude();
                if hi < -amp || lo > amp {
                    return 0.0;
                }
                if lo <= -amp && hi >= amp {
                    return 1.0;
                }
                let sum: f64 = draws
                    .iter()
                    .map(|w| self.level_measure(w, *period, lo, hi))
                    .sum();
                (sum / draws.len() as f64).clamp(0.0, 1.0)
            }
        }
    }

    /// Time fraction inside `[lo, hi]` over one period, treating the waveform
    /// as monotone between samples and refining edge crossings by bisection.
    fn level_measure(&self, w: &Waveform, period: f64, lo: f64, hi: f64) -> f64 {
        let n = w.values.len() - 1;
        let dt = period / n as f64;
        let root = |level: f64, mut a: f64, mut b: f64| {
            let fa = self.noise.offset(a, &w.phases) - level;
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if (self.noise.offset(m, &w.phases) - level > 0.0) == (fa > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let mut inside = 0.0;
        for k in 0..n {
            let (g0, g1) = (w.values[k], w.values[k + 1]);
            let (ta, tb) = (k as f64 * dt, (k + 1) as f64 * dt);
            if g0.max(g1) < lo || g0.min(g1) > hi {
                continue;
            }
            let (enter, exit) = if g1 >= g0 {
                (
                    if g0 >= lo { ta } else { root(lo, ta, tb) },
                    if g1 <= hi { tb } else { root(hi, ta, tb) },
                )
            } else {
                (
                    if g0 <= hi { ta } else { root(hi, ta, tb) },
                    if g1 >= lo { tb } else { root(lo, ta, tb) },
                )
            };
            inside += (exit - enter).max(0.0);
        }
        inside / period
    }
}

/// Shortest common period of the active components, or 100 periods of the
/// slowest one when the frequencies are not commensurate.
fn common_period(noise: &NoiseModel) -> f64 {
    let freqs: Vec<f64> = noise.active().map(|c| c.frequency).collect();
    let f_min = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    for k in 1..=64 {
        let f0 = f_min / k as f64;
        if freqs.iter().all(|f| {
            let m = f / f0;
            (m - m.round()).abs() < 1e-9 * m.max(1.0)
        }) {
            return 1.0 / f0;
        }
    }
    100.0 / f_min
}

/// Fraction of time the field `b_set + noise(t)` spends within `window` of
/// `b_loss`.
pub fn resonance_duty_cycle(
    b_set: f64,
    b_loss: f64,
    window: f64,
    noise: &NoiseModel,
) -> Result<f64> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::invalid(
            "window",
            format!("must be > 0 G, got {window}"),
        ));
    }
    noise.validate()?;
    let d = b_loss - b_set;
    Ok(DutyCycle::new(noise).fraction(d - window, d + window))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientBroadening {
    /// G/cm
    pub gradient: f64,
    /// Extent of the cloud along the gradient (cm).
    pub cloud_size: f64,
}

impl GradientBroadening {
    pub fn levitation(cloud_size: f64) -> Self {
        GradientBroadening {
            gradient: LEVITATION_GRADIENT,
            cloud_size,
        }
    }

    /// Full width of the field spread across the cloud (G).
    pub fn spread(&self) -> f64 {
        self.gradient.abs() * self.cloud_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub resonance: ResonanceSpec,
    pub lattice: LatticeConfig,
    /// s
    pub hold_time: f64,
    /// Γ per dip, 1/s
    pub peak_loss_rate: f64,
    /// Half-width of the loss window around each dip (G).
    pub dip_width: f64,
    pub noise: NoiseModel,
    pub initial_atoms: f64,
    pub gradient_broadening: Option<GradientBroadening>,
}

impl SpectrumConfig {
    /// 50 ms hold, Γ = 50 s⁻¹, 10⁵ atoms, mains noise, tunneling-derived
    /// dip width, no gradient.
    pub fn new(resonance: ResonanceSpec, lattice: LatticeConfig) -> Result<Self> {
        let dip_width = default_dip_width(&resonance, &lattice)?;
        Ok(SpectrumConfig {
            resonance,
            lattice,
            hold_time: 0.05,
            peak_loss_rate: 50.0,
            dip_width,
            noise: NoiseModel::mains(0),
            initial_atoms: 1e5,
            gradient_broadening: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.resonance.validate()?;
        self.lattice.validate()?;
        self.noise.validate()?;
        if !(self.hold_time.is_finite() && self.hold_time > 0.0) {
            return Err(Error::invalid(
                "hold_time",
                format!("must be > 0 s, got {}", self.hold_time),
            ));
        }
        if !(self.peak_loss_rate.is_finite() && self.peak_loss_rate >= 0.0) {
            return Err(Error::invalid(
                "peak_loss_rate",
                format!("must be >= 0, got {}", self.peak_loss_rate),
            ));
        }
        if !(self.dip_width.is_finite() && self.dip_width > 0.0) {
            return Err(Error::invalid(
                "dip_width",
                format!("must be > 0 G, got {}", self.dip_width),
            ));
        }
        if !(self.initial_atoms.is_finite() && self.initial_atoms >= 0.0) {
            return Err(Error::invalid(
                "initial_atoms",
                format!("must be >= 0, got {}", self.initial_atoms),
            ));
        }
        if let Some(g) = &self.gradient_broadening {
            if !(g.spread().is_finite() && g.cloud_size >= 0.0) {
                return Err(Error::invalid(
                    "gradient_broadening",
                    "gradient and cloud size must be finite, size >= 0",
                ));
            }
        }
        Ok(())
    }

    pub fn resolution(&self) -> f64 {
        if self.noise.step_resolution > 0.0 {
            self.noise.step_resolution
        } else {
            DEFAULT_RESOLUTION
        }
    }
}

/// Half of the widest field interval over which the interaction stays within
/// 2J of a loss condition (||U| − E| < 2J, or |U| < 2J without tilt).
pub fn default_dip_width(res: &ResonanceSpec, lattice: &LatticeConfig) -> Result<f64> {
    let j = tunneling_j(lattice, Axis::Z)?;
    let tilt = gravity_tilt(lattice);
    let per_bohr = onsite_interaction(lattice, 1.0);
    let span = |u_lo: f64, u_hi: f64| -> Option<f64> {
        let b_lo = field_for_scattering_length(u_lo / per_bohr, res)?;
        let b_hi = field_for_scattering_length(u_hi / per_bohr, res)?;
        // both ends on one branch of the dispersion
        let same_branch = (b_lo - res.pole).signum() == (b_hi - res.pole).signum();
        same_branch.then(|| (b_hi - b_lo).abs())
    };
    let spans: Vec<f64> = if tilt > 0.0 {
        [
            span(tilt - 2.0 * j, tilt + 2.0 * j),
            span(-tilt - 2.0 * j, -tilt + 2.0 * j),
        ]
        .into_iter()
        .flatten()
        .collect()
    } else {
        span(-2.0 * j, 2.0 * j).into_iter().collect()
    };
    spans
        .into_iter()
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |a| a.max(s)))
        })
        .map(|s| 0.5 * s)
        .filter(|w| *w > 0.0)
        .ok_or_else(|| {
            Error::invalid(
                "dip_width",
                "no tunneling window on a single dispersion branch",
            )
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub label: String,
    pub pole: f64,
    pub width: f64,
    pub abg: f64,
    pub depth: [f64; 3],
    pub levitated: bool,
    pub hold_time: f64,
    pub peak_loss_rate: f64,
    pub dip_width: f64,
    pub initial_atoms: f64,
    pub noise: String,
    pub seed: u64,
    pub gradient_broadening: Option<GradientBroadening>,
    pub dips: DipPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpectrum {
    /// (set field in G, remaining atoms)
    pub points: Vec<(f64, f64)>,
    pub metadata: SpectrumSummary,
}

impl LossSpectrum {
    /// Largest fractional loss over the grid.
    pub fn max_loss_fraction(&self) -> f64 {
        let n0 = self.metadata.initial_atoms;
        if n0 == 0.0 {
            return 0.0;
        }
        self.points
            .iter()
            .map(|p| 1.0 - p.1 / n0)
            .fold(0.0, f64::max)
    }

    /// Grid point with the fewest remaining atoms.
    pub fn deepest(&self) -> (f64, f64) {
        self.points
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((f64::NAN, f64::NAN))
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InsufficientData("field grid is empty".into()));
    }
    if grid.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("grid", "fields must be finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid", "fields must be strictly increasing"));
    }
    Ok(())
}

pub fn synthesize_spectrum(cfg: &SpectrumConfig, grid: &[f64]) -> Result<LossSpectrum> {
    cfg.validate()?;
    check_grid(grid)?;
    let dips = predict_dips(&cfg.resonance, &cfg.lattice, cfg.resolution())?;
    let dip_fields: Vec<f64> = dips.dips().into_iter().map(|d| d.1).collect();
    let duty = DutyCycle::new(&cfg.noise);
    let w = cfg.dip_width;
    let n0 = cfg.initial_atoms;

    let remaining = |b: f64| {
        let rate: f64 = dip_fields
            .iter()
            .map(|&bd| cfg.peak_loss_rate * duty.fraction(bd - w - b, bd + w - b))
            .sum();
        n0 * (-cfg.hold_time * rate).exp()
    };

    let spread = cfg.gradient_broadening.map_or(0.0, |g| g.spread());
    let points: Vec<(f64, f64)> = if spread > 0.0 {
        let amp = cfg.noise.total_amplitude();
        let rule = gauss_legendre(16);
        grid.par_iter()
            .map(|&b| {
                let mut breaks: Vec<f64> = dip_fields
                    .iter()
                    .flat_map(|&bd| {
                        [bd - w - amp, bd - w + amp, bd + w - amp, bd + w + amp].map(|x| x - b)
                    })
                    .collect();
                breaks.sort_by(f64::total_cmp);
                breaks.dedup();
                let half = 0.5 * spread;
                let avg = integrate_piecewise(|u| remaining(b + u), -half, half, &breaks, &rule, 4)
                    / spread;
                (b, avg.clamp(0.0, n0))
            })
            .collect()
    } else {
        grid.par_iter().map(|&b| (b, remaining(b))).collect()
    };

    Ok(LossSpectrum {
        points,
        metadata: SpectrumSummary {
            label: cfg.resonance.label.clone(),
            pole: cfg.resonance.pole,
            width: cfg.resonance.width,
            abg: cfg.resonance.abg,
            depth: cfg.lattice.depth,
            levitated: cfg.lattice.levitated,
            hold_time: cfg.hold_time,
            peak_loss_rate: cfg.peak_loss_rate,
            dip_width: cfg.dip_width,
            initial_atoms: cfg.initial_atoms,
            noise: cfg.noise.components_to_string(),
            seed: cfg.noise.seed,
            gradient_broadening: cfg.gradient_broadening,
            dips,
        },
    })
}
