//! Sinusoidal magnetic-field noise (mains harmonics) and its sampling.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::DEFAULT_RESOLUTION;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseComponent {
    /// Hz
    pub frequency: f64,
    /// G
    pub amplitude: f64,
    /// rad; drawn uniformly per shot when `None`
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub components: Vec<NoiseComponent>,
    /// Smallest settable field step (G).
    pub step_resolution: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(components: Vec<NoiseComponent>, step_resolution: f64, seed: u64) -> Result<Self> {
        let model = NoiseModel {
            components,
            step_resolution,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    /// 10 mG peak-to-peak split 2:1 between 50 Hz and 150 Hz, random phases.
    pub fn mains(seed: u64) -> Self {
        NoiseModel {
            components: vec![
                NoiseComponent {
                    frequency: 50.0,
                    amplitude: 3.33e-3,
                    phase: None,
                },
                NoiseComponent {
                    frequency: 150.0,
                    amplitude: 1.67e-3,
                    phase: None,
                },
            ],
            step_resolution: DEFAULT_RESOLUTION,
            seed,
        }
    }

    pub fn quiet() -> Self {
        NoiseModel {
            components: Vec::new(),
            step_resolution: DEFAULT_RESOLUTION,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            if !(c.frequency.is_finite() && c.frequency > 0.0) {
                return Err(Error::invalid(
                    "noise frequency",
                    format!("must be > 0 Hz, got {}", c.frequency),
                ));
            }
            if !(c.amplitude.is_finite() && c.amplitude >= 0.0) {
                return Err(Error::invalid(
                    "noise amplitude",
                    format!("must be >= 0 G, got {}", c.amplitude),
                ));
            }
            if let Some(p) = c.phase {
                if !p.is_finite() {
                    return Err(Error::invalid("noise phase", "must be finite"));
                }
            }
        }
        if !(self.step_resolution.is_finite() && self.step_resolution >= 0.0) {
            return Err(Error::invalid(
                "step_resolution",
                format!("must be >= 0 G, got {}", self.step_resolution),
            ));
        }
        Ok(())
    }

    /// Components with a non-zero amplitude.
    pub fn active(&self) -> impl Iterator<Item = &NoiseComponent> {
        self.components.iter().filter(|c| c.amplitude > 0.0)
    }

    /// Σ amplitudes; the largest possible excursion from the set field.
    pub fn total_amplitude(&self) -> f64 {
        self.active().map(|c| c.amplitude).sum()
    }

    /// Peak-to-peak excursion when all components are in phase.
    pub fn peak_to_peak(&self) -> f64 {
        2.0 * self.total_amplitude()
    }

    /// Upper bound on |dB/dt| of the noise (G/s).
    pub fn max_slew(&self) -> f64 {
        self.active().map(|c| TAU * c.frequency * c.amplitude).sum()
    }

    pub fn shortest_period(&self) -> Option<f64> {
        self.active()
            .map(|c| 1.0 / c.frequency)
            .min_by(f64::total_cmp)
    }

    /// Resolves the phases of the active components, drawing absent ones from
    /// `rng`.
    pub fn draw_phases<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.active()
            .map(|c| c.phase.unwrap_or_else(|| rng.random::<f64>() * TAU))
            .collect()
    }

    pub fn has_random_phases(&self) -> bool {
        self.active().any(|c| c.phase.is_none())
    }

    /// Per-trial generator: the model seed selects the key, the trial index
    /// the stream.
    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }

    /// Field offset (G) at time `t` given resolved phases.
    pub fn offset(&self, t: f64, phases: &[f64]) -> f64 {
        self.active()
            .zip(phases)
            .map(|(c, &p)| c.amplitude * (TAU * c.frequency * t + p).sin())
            .sum()
    }

    /// dB/dt of the noise (G/s) at time `t`.
    pub fn slew(&self, t: f64, phases: &[f64]) -> f64 {
        self.active()
            .zip(phases)
            .map(|(c, &p)| TAU * c.frequency * c.amplitude * (TAU * c.frequency * t + p).cos())
            .sum()
    }

    /// Parses `freq:amp[:phase]` items separated by commas, e.g.
    /// `50:3.33e-3,150:1.67e-3`. An empty string or `none` gives no
    /// components.
    pub fn parse_components(spec: &str) -> Result<Vec<NoiseComponent>> {
        let spec = spec.trim();
        if spec.is_empty() || spec.eq_ignore_ascii_case("none") {
            return Ok(Vec::new());
        }
        spec.split(',')
            .map(|item| {
                let parts: Vec<&str> = item.trim().split(':').collect();
                if !(2..=3).contains(&parts.len()) {
                    return Err(Error::invalid(
                        "noise",
                        format!("expected freq:amp[:phase], got {item:?}"),
                    ));
                }
                let num = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid("noise", format!("cannot parse {s:?}")))
                };
                Ok(NoiseComponent {
                    frequency: num(parts[0])?,
                    amplitude: num(parts[1])?,
                    phase: parts.get(2).map(|p| num(p)).transpose()?,
                })
            })
            .collect()
    }

    pub fn components_to_string(&self) -> String {
        if self.components.is_empty() {
            return "none".into();
        }
        self.components
            .iter()
            .map(|c| match c.phase {
                Some(p) => format!("{}:{}:{}", c.frequency, c.amplitude, p),
                None => format!("{}:{}", c.frequency, c.amplitude),
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::mains(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mains_is_ten_milligauss_pp() {
        let n = NoiseModel::mains(1);
        assert!((n.peak_to_peak() - 0.010).abs() < 1e-12);
        // 2π·50·3.33 mG + 2π·150·1.67 mG
        assert!((n.max_slew() - 2.6202).abs() < 1e-3, "{}", n.max_slew());
    }

    #[test]
    fn fifty_hz_slew_alone() {
        let n = NoiseModel::new(
            vec![NoiseComponent {
                frequency: 50.0,
                amplitude: 5e-3,
                phase: None,
            }],
            0.0,
            0,
        )
        .unwrap();
        assert!((n.max_slew() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn parse_round_trip() {
        let comps = NoiseModel::parse_components("50:3.33e-3, 150:1.67e-3:0.5").unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[1].phase, Some(0.5));
        let m = NoiseModel::new(comps.clone(), 8e-3, 3).unwrap();
        assert_eq!(
            NoiseModel::parse_components(&m.components_to_string()).unwrap(),
            comps
        );
        assert!(NoiseModel::parse_components("none").unwrap().is_empty());
        assert!(NoiseModel::parse_components("50").is_err());
    }

    #[test]
    fn invalid_components() {
        let bad = |f: f64, a: f64| {
            NoiseModel::new(
                vec![NoiseComponent {
                    frequency: f,
                    amplitude: a,
                    phase: None,
                }],
                0.0,
                0,
            )
        };
        assert!(bad(0.0, 1e-3).is_err());
        assert!(bad(50.0, -1e-3).is_err());
        assert!(bad(50.0, 0.0).is_ok());
    }

    #[test]
    fn trial_streams_differ_and_repeat() {
        let n = NoiseModel::mains(42);
        let a = n.draw_phases(&mut n.trial_rng(0));
        let b = n.draw_phases(&mut n.trial_rng(1));
        assert_ne!(a, b);
        assert_eq!(a, n.draw_phases(&mut n.trial_rng(0)));
    }

    #[test]
    fn slew_is_derivative_of_offset() {
        let n = NoiseModel::mains(0);
        let ph = [0.3, 1.9];
        let h = 1e-7;
        for t in [0.0, 0.0013, 0.0171] {
            let fd = (n.offset(t + h, &ph) - n.offset(t - h, &ph)) / (2.0 * h);
            assert!((fd - n.slew(t, &ph)).abs() < 1e-6);
        }
    }
}
