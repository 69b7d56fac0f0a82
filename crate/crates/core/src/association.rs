//! Landau-Zener molecule association across a resonance, deterministic and
//! under shot-to-shot field noise.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{mean_oscillator_length, LatticeConfig};
use crate::noise::NoiseModel;
use crate::resonance::ResonanceSpec;

/// Initial guess for the residual unpaired fraction.
pub const DEFAULT_P0: f64 = 0.1;

/// Linear field ramp from `b_start` to `b_stop` at `rate` G/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub b_start: f64,
    pub b_stop: f64,
    pub rate: f64,
}

impl RampSchedule {
    pub fn new(b_start: f64, b_stop: f64, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate != 0.0) {
            return Err(Error::invalid(
                "rate",
                format!("must be finite and non-zero, got {rate}"),
            ));
        }
        let direction = (b_stop - b_start) * rate;
        if direction.is_nan() || direction <= 0.0 {
            return Err(Error::invalid(
                "rate",
                format!("sign of {rate} G/s inconsistent with ramp {b_start} -> {b_stop} G"),
            ));
        }
        Ok(RampSchedule {
            b_start,
            b_stop,
            rate,
        })
    }

    /// Downward sweep from `pole + half_span` to `pole - half_span` at
    /// `speed` G/s.
    pub fn downward_across(pole: f64, half_span: f64, speed: f64) -> Result<Self> {
        Self::new(pole + half_span, pole - half_span, -speed.abs())
    }

    pub fn duration(&self) -> f64 {
        (self.b_stop - self.b_start) / self.rate
    }

    pub fn field(&self, t: f64) -> f64 {
        self.b_start + self.rate * t
    }

    pub fn crosses(&self, b: f64, margin: f64) -> bool {
        let (lo, hi) = if self.b_start < self.b_stop {
            (self.b_start, self.b_stop)
        } else {
            (self.b_stop, self.b_start)
        };
        lo + margin < b && b < hi - margin
    }
}

/// δ_LZ·|Ḃ| in G/s: √6ħ/(π m a_ho³)·|a_bg ΔB|.
pub fn lz_rate_scale(res: &ResonanceSpec, cfg: &LatticeConfig) -> f64 {
    lz_rate_scale_for(res.abg, res.width, cfg)
}

/// As [`lz_rate_scale`] for a bare background length (a₀) and width (G).
pub fn lz_rate_scale_for(abg: f64, width: f64, cfg: &LatticeConfig) -> f64 {
    let c = &cfg.constants;
    let a_ho = mean_oscillator_length(cfg);
    6f64.sqrt() * c.hbar / (PI * c.mass * a_ho.powi(3)) * (abg * c.bohr_radius * width).abs()
}

/// Landau-Zener adiabaticity parameter for a sweep at `rate` G/s.
pub fn lz_exponent(res: &ResonanceSpec, cfg: &LatticeConfig, rate: f64) -> Result<f64> {
    if rate == 0.0 || !rate.is_finite() {
        return Err(Error::invalid(
            "rate",
            format!("must be finite and non-zero, got {rate}"),
        ));
    }
    Ok(lz_rate_scale(res, cfg) / rate.abs())
}

/// Probability that a pair stays unbound: p₀ + (1 − p₀)·e^{−2πδ}.
pub fn survival_probability(delta: f64, p0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::invalid(
            "p0",
            format!("must lie in [0, 1], got {p0}"),
        ));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::invalid(
            "delta_lz",
            format!("must be >= 0, got {delta}"),
        ));
    }
    Ok(p0 + (1.0 - p0) * (-2.0 * PI * delta).exp())
}

/// Deterministic survival curve for positive ramp rates.
pub fn lz_curve(
    res: &ResonanceSpec,
    cfg: &LatticeConfig,
    rates: &[f64],
    p0: f64,
) -> Result<Vec<(f64, f64)>> {
    if rates.is_empty() {
        return Err(Error::InsufficientData("rate list is empty".into()));
    }
    rates
        .iter()
        .map(|&r| {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("rate", format!("must be > 0 G/s, got {r}")));
            }
            Ok((r, survival_probability(lz_exponent(res, cfg, r)?, p0)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub survival_mean: f64,
    pub survival_std: f64,
    pub trials: usize,
    /// Signed dB/dt at the (first) pole crossing of each trial, in trial order.
    pub effective_rates: Vec<f64>,
    /// Trials in which noise made the field cross the pole more than once.
    pub multi_crossing: usize,
}

impl SweepOutcome {
    pub fn mean_effective_rate(&self) -> f64 {
        self.effective_rates.iter().sum::<f64>() / self.trials as f64
    }
}

struct Crossing {
    rate: f64,
    multiple: bool,
}

/// First time the noisy ramp reaches `pole`. Noise is bounded by its total
/// amplitude, so the search is confined to the interval where the bare ramp
/// is within that distance of the pole.
fn find_crossing(ramp: &RampSchedule, pole: f64, noise: &NoiseModel, phases: &[f64]) -> Crossing {
    let t0 = (pole - ramp.b_start) / ramp.rate;
    let amp = noise.total_amplitude();
    let Some(period) = noise.shortest_period().filter(|_| amp > 0.0) else {
        return Crossing {
            rate: ramp.rate,
            multiple: false,
        };
    };
    let half = amp / ramp.rate.abs();
    let t_lo = (t0 - half).max(0.0);
    let t_hi = (t0 + half).min(ramp.duration());
    let dt = (period / 20.0).min((t_hi - t_lo) / 64.0);
    let steps = ((t_hi - t_lo) / dt).ceil() as usize;

    let dir = ramp.rate.signum();
    // positive once the pole has been passed
    let past = |t: f64| dir * (ramp.field(t) + noise.offset(t, phases) - pole);

    let mut first: Option<(f64, f64)> = None;
    let mut changes = 0usize;
    let mut prev_t = t_lo;
    let mut prev_past = past(t_lo) >= 0.0;
    for k in 1..=steps {
        let t = (t_lo + k as f64 * dt).min(t_hi);
        let now_past = past(t) >= 0.0;
        if now_past != prev_past {
            changes += 1;
            if first.is_none() && now_past {
                first = Some((prev_t, t));
            }
        }
        prev_t = t;
        prev_past = now_past;
    }
    let t_cross = match first {
        Some((mut a, mut b)) => {
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if past(mid) >= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        }
        None => t_lo,
    };
    Crossing {
        rate: ramp.rate + noise.slew(t_cross, phases),
        multiple: changes > 1,
    }
}

/// Monte-Carlo association under field noise: each trial draws noise phases,
/// finds the field's first pass through the pole, and applies the
/// Landau-Zener survival with the instantaneous sweep rate there.
pub fn simulate_noisy_sweep(
    res: &ResonanceSpec,
    cfg: &LatticeConfig,
    ramp: &RampSchedule,
    noise: &NoiseModel,
    p0: f64,
    trials: usize,
) -> Result<SweepOutcome> {
    if trials == 0 {
        return Err(Error::InsufficientData(
            "at least one trial is required".into(),
        ));
    }
    noise.validate()?;
    survival_probability(0.0, p0)?;
    let margin = noise.total_amplitude();
    if !ramp.crosses(res.pole, margin) {
        return Err(Error::RampDoesNotCross {
            start: ramp.b_start,
            stop: ramp.b_stop,
            pole: res.pole,
            margin,
        });
    }
    let scale = lz_rate_scale(res, cfg);

    let per_trial: Vec<(f64, f64, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let phases = noise.draw_phases(&mut noise.trial_rng(i));
            let c = find_crossing(ramp, res.pole, noise, &phases);
            let p = if c.rate == 0.0 {
                p0
            } else {
                p0 + (1.0 - p0) * (-2.0 * PI * scale / c.rate.abs()).exp()
            };
            (c.rate, p, c.multiple)
        })
        .collect();

    let n = trials as f64;
    let mean = per_trial.iter().map(|t| t.1).sum::<f64>() / n;
    let var = if trials > 1 {
        per_trial.iter().map(|t| (t.1 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(SweepOutcome {
        survival_mean: mean,
        survival_std: var.sqrt(),
        trials,
        effective_rates: per_trial.iter().map(|t| t.0).collect(),
        multi_crossing: per_trial.iter().filter(|t| t.2).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseComponent;
    use crate::resonance::Provenance;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cs(v: f64) -> LatticeConfig {
        LatticeConfig::isotropic(v).unwrap()
    }

    fn res_4g4() -> ResonanceSpec {
        ResonanceSpec::new("4g(4)", 19.874, 0.0111, 160.0, Provenance::Experiment).unwrap()
    }

    #[test]
    fn exponent_prefactor_4g4() {
        // √6ħ/(π m a_ho³)·a_bg·ΔB evaluated by hand: 68.1 G/s
        let scale = lz_exponent(&res_4g4(), &cs(20.0), 1.0).unwrap();
        assert!((scale - 68.1).abs() < 0.05, "{scale}");
        assert_relative_eq!(
            lz_exponent(&res_4g4(), &cs(20.0), -17.0).unwrap(),
            scale / 17.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn exponent_depth_scaling() {
        let r = lz_exponent(&res_4g4(), &cs(30.0), 5.0).unwrap()
            / lz_exponent(&res_4g4(), &cs(20.0), 5.0).unwrap();
        assert_relative_eq!(r, 1.5f64.powf(0.75), max_relative = 1e-12);
    }

    #[test]
    fn exponent_limits_and_errors() {
        assert!(lz_exponent(&res_4g4(), &cs(20.0), 1e300).unwrap() < 1e-297);
        assert!(lz_exponent(&res_4g4(), &cs(20.0), 0.0).is_err());
    }

    #[test]
    fn survival_values() {
        assert_eq!(survival_probability(0.0, 0.2).unwrap(), 1.0);
        assert_relative_eq!(
            survival_probability(1e6, 0.2).unwrap(),
            0.2,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            survival_probability(1.0 / (2.0 * PI), 0.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert!(survival_probability(0.1, 1.1).is_err());
        assert!(survival_probability(-0.1, 0.1).is_err());
        assert!(survival_probability(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn half_conversion_rate_4g3() {
        let res =
            ResonanceSpec::new("4g(3)", 14.345, -0.014, -176.0, Provenance::Experiment).unwrap();
        let cfg = cs(20.0);
        let p0 = 0.1;
        // δ = ln2/(2π) ⇒ Ḃ½ = 2π·scale/ln2
        let analytic = 2.0 * PI * lz_rate_scale(&res, &cfg) / 2f64.ln();
        let target = (1.0 + p0) / 2.0;
        let (mut lo, mut hi) = (1e-3f64, 1e6f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            let p = lz_curve(&res, &cfg, &[mid], p0).unwrap()[0].1;
            if p < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(lo, analytic, max_relative = 1e-9);
    }

    #[test]
    fn curve_single_point_and_errors() {
        let res = res_4g4();
        let pts = lz_curve(&res, &cs(20.0), &[12.0], 0.15).unwrap();
        let direct =
            survival_probability(lz_exponent(&res, &cs(20.0), 12.0).unwrap(), 0.15).unwrap();
        assert_eq!(pts, vec![(12.0, direct)]);
        assert!(lz_curve(&res, &cs(20.0), &[], 0.1).is_err());
        assert!(lz_curve(&res, &cs(20.0), &[-1.0], 0.1).is_err());
    }

    #[test]
    fn ultrafast_ramp_is_lossless() {
        let cat = crate::catalog::ResonanceCatalog::bundled();
        for label in ["6g(5)", "4g(3)", "4g(2)"] {
            let res = cat.get(label, Provenance::Experiment).unwrap();
            // 2·10⁴ G/ms
            let p = lz_curve(res, &cs(20.0), &[2e7], 0.1).unwrap()[0].1;
            assert!(1.0 - p < 1e-4, "{label}: {p}");
        }
    }

    #[test]
    fn ramp_validation() {
        assert!(RampSchedule::new(20.0, 19.0, 1.0).is_err());
        assert!(RampSchedule::new(20.0, 19.0, 0.0).is_err());
        let r = RampSchedule::downward_across(19.874, 0.5, 10.0).unwrap();
        assert!(r.rate < 0.0);
        assert!((r.duration() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn quiet_sweep_is_deterministic_curve() {
        let res = res_4g4();
        let ramp = RampSchedule::downward_across(res.pole, 0.5, 30.0).unwrap();
        let out =
            simulate_noisy_sweep(&res, &cs(20.0), &ramp, &NoiseModel::quiet(), 0.1, 500).unwrap();
        let det = lz_curve(&res, &cs(20.0), &[30.0], 0.1).unwrap()[0].1;
        assert!(out.survival_std < 1e-12);
        assert!((out.survival_mean - det).abs() < 1e-12);
        assert!(out.effective_rates.iter().all(|&r| r == -30.0));
        assert_eq!(out.multi_crossing, 0);
    }

    #[test]
    fn sweep_errors() {
        let res = res_4g4();
        let ramp = RampSchedule::new(21.0, 20.0, -1.0).unwrap();
        assert!(matches!(
            simulate_noisy_sweep(&res, &cs(20.0), &ramp, &NoiseModel::mains(0), 0.1, 10),
            Err(Error::RampDoesNotCross { .. })
        ));
        let ramp = RampSchedule::downward_across(res.pole, 0.5, 10.0).unwrap();
        assert!(
            simulate_noisy_sweep(&res, &cs(20.0), &ramp, &NoiseModel::mains(0), 0.1, 0).is_err()
        );
        // pole within the noise band of the ramp end
        let short = RampSchedule::downward_across(res.pole, 0.004, 10.0).unwrap();
        assert!(
            simulate_noisy_sweep(&res, &cs(20.0), &short, &NoiseModel::mains(0), 0.1, 10).is_err()
        );
    }

    #[test]
    fn seeded_sweep_is_bit_reproducible() {
        let res = res_4g4();
        let ramp = RampSchedule::downward_across(res.pole, 0.5, 5.0).unwrap();
        let run = || {
            simulate_noisy_sweep(&res, &cs(20.0), &ramp, &NoiseModel::mains(9), 0.1, 2000).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.survival_mean.to_bits(), b.survival_mean.to_bits());
        assert_eq!(a.survival_std.to_bits(), b.survival_std.to_bits());
        assert_eq!(a.effective_rates, b.effective_rates);
        let other = simulate_noisy_sweep(&res, &cs(20.0), &ramp, &NoiseModel::mains(10), 0.1, 2000)
            .unwrap();
        assert_ne!(a.effective_rates, other.effective_rates);
    }

    #[test]
    fn effective_rate_is_unbiased_for_fast_ramps() {
        // crossing-time weighting biases the mean by σ²/Ḃ; negligible here
        let res = res_4g4();
        let ramp = RampSchedule::downward_across(res.pole, 0.5, 1000.0).unwrap();
        let out =
            simulate_noisy_sweep(&res, &cs(20.0), &ramp, &NoiseModel::mains(3), 0.1, 2000).unwrap();
        let n = out.trials as f64;
        let mean = out.mean_effective_rate();
        let sd = (out
            .effective_rates
            .iter()
            .map(|r| (r - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt();
        assert!(
            (mean + 1000.0).abs() < 3.0 * sd / n.sqrt(),
            "{mean} ± {}",
            sd / n.sqrt()
        );
    }

    #[test]
    fn effective_rate_bias_matches_crossing_weighting() {
        // With uniform phase φ, the noise phase ψ at the crossing has density
        // ∝ |Ḃ_eff(ψ)|/|Ḃ|, so E[|Ḃ_eff|] = (Ḃ² + Σ(2πfA)²/2)/|Ḃ|.
        let res = res_4g4();
        let noise = NoiseModel::new(
            vec![NoiseComponent {
                frequency: 50.0,
                amplitude: 5e-3,
                phase: None,
            }],
            0.0,
            17,
        )
        .unwrap();
        let rate = 4.0;
        let ramp = RampSchedule::downward_across(res.pole, 0.5, rate).unwrap();
        let out = simulate_noisy_sweep(&res, &cs(20.0), &ramp, &noise, 0.1, 20000).unwrap();
        let slew = 2.0 * PI * 50.0 * 5e-3;
        let expected = (rate * rate + slew * slew / 2.0) / rate;
        let mean = -out.mean_effective_rate();
        assert!((mean - expected).abs() < 0.03, "{mean} vs {expected}");
        assert!((mean - rate).abs() > 0.2);
    }

    #[test]
    fn slow_ramp_flags_multiple_crossings() {
        let res = res_4g4();
        // 0.5 G/s is well below the 2.6 G/s noise slew
        let ramp = RampSchedule::downward_across(res.pole, 0.5, 0.5).unwrap();
        let out =
            simulate_noisy_sweep(&res, &cs(20.0), &ramp, &NoiseModel::mains(1), 0.1, 200).unwrap();
        assert!(out.multi_crossing > 0);
        // the first crossing always moves in the ramp direction
        assert!(out.effective_rates.iter().all(|&r| r <= 0.0));
    }

    proptest! {
        #[test]
        fn survival_increases_with_rate(
            width in prop_oneof![-0.02f64..-1e-6, 1e-6f64..0.02],
            abg in prop_oneof![-1500.0f64..-50.0, 50.0f64..1500.0],
            depth in 5.0f64..40.0,
            r1 in 1e-2f64..1e4,
            factor in 1.001f64..100.0,
            p0 in 0.0f64..0.5,
        ) {
            let res = ResonanceSpec::new("6g(3)", 5.122, width, abg, Provenance::Theory).unwrap();
            let cfg = cs(depth);
            let pts = lz_curve(&res, &cfg, &[r1, r1 * factor], p0).unwrap();
            prop_assert!(pts[1].1 >= pts[0].1);
            prop_assert!(pts[0].1 >= p0 && pts[1].1 <= 1.0);
        }
    }
}
