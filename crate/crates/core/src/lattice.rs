//! Cubic optical lattice in the harmonic approximation, plus the fields at
//! which tilt-resonant loss channels open.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::resonance::{
    field_for_scattering_length, scattering_length, zero_crossing, ResonanceSpec,
};

/// Lattice wavelength used for the Cs experiments (m).
pub const DEFAULT_WAVELENGTH: f64 = 1064.5e-9;
/// Field-control step size below which neighbouring dips merge (G).
pub const DEFAULT_RESOLUTION: f64 = 8e-3;
/// Shallowest depth (E_R) for which the deep-lattice tunneling estimate is used.
pub const MIN_TUNNELING_DEPTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// Depth per axis (x, y, z) in units of the recoil energy.
    pub depth: [f64; 3],
    /// Lattice light wavelength (m).
    pub wavelength: f64,
    pub constants: Constants,
    /// A magnetic gradient cancels gravity, so vertical neighbours are
    /// degenerate.
    pub levitated: bool,
}

impl LatticeConfig {
    pub fn new(depth: [f64; 3], wavelength: f64, constants: Constants) -> Result<Self> {
        let cfg = LatticeConfig {
            depth,
            wavelength,
            constants,
            levitated: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cs at 1064.5 nm with the same depth along all three axes.
    pub fn isotropic(depth: f64) -> Result<Self> {
        Self::new([depth; 3], DEFAULT_WAVELENGTH, Constants::cesium133())
    }

    pub fn levitated(self, on: bool) -> Self {
        LatticeConfig {
            levitated: on,
            ..self
        }
    }

    pub fn with_depth(self, depth: f64) -> Result<Self> {
        let cfg = LatticeConfig {
            depth: [depth; 3],
            ..self
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.depth.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::invalid(
                "depth",
                format!("all depths must be > 0, got {:?}", self.depth),
            ));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::invalid(
                "wavelength",
                format!("must be > 0, got {}", self.wavelength),
            ));
        }
        if !self.constants.is_valid() {
            return Err(Error::invalid("constants", "all constants must be > 0"));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }
}

/// Recoil energy h²/(2mλ²) in J.
pub fn recoil_energy(cfg: &LatticeConfig) -> f64 {
    let c = &cfg.constants;
    c.planck_h * c.planck_h / (2.0 * c.mass * cfg.wavelength * cfg.wavelength)
}

/// Recoil energy expressed as a frequency E_R/h in Hz.
pub fn recoil_frequency(cfg: &LatticeConfig) -> f64 {
    recoil_energy(cfg) / cfg.constants.planck_h
}

/// Harmonic trap frequency ω (rad/s) of a single well along `axis`.
pub fn site_frequency(cfg: &LatticeConfig, axis: Axis) -> f64 {
    2.0 * recoil_energy(cfg) / cfg.constants.hbar * cfg.depth[axis.index()].sqrt()
}

/// Oscillator length √(ħ/mω) of a single well along `axis`, in m.
pub fn oscillator_length(cfg: &LatticeConfig, axis: Axis) -> f64 {
    let c = &cfg.constants;
    (c.hbar / (c.mass * site_frequency(cfg, axis))).sqrt()
}

/// Geometric mean of the three oscillator lengths; equals the single-axis
/// value for an isotropic lattice.
pub fn mean_oscillator_length(cfg: &LatticeConfig) -> f64 {
    [Axis::X, Axis::Y, Axis::Z]
        .iter()
        .map(|&ax| oscillator_length(cfg, ax))
        .product::<f64>()
        .cbrt()
}

/// On-site interaction U in J for scattering length `a_s` in a₀, using the
/// Gaussian ground state of each well:
/// U = √(8/π)·k·a_s·E_R·(V_x V_y V_z)^{1/4}.
pub fn onsite_interaction(cfg: &LatticeConfig, a_s: f64) -> f64 {
    let depth_factor = cfg.depth.iter().product::<f64>().powf(0.25);
    (8.0 / PI).sqrt()
        * cfg.wavenumber()
        * a_s
        * cfg.constants.bohr_radius
        * recoil_energy(cfg)
        * depth_factor
}

/// Nearest-neighbour tunneling along `axis` in J, from the deep-lattice
/// asymptote J = (4/√π)·E_R·V^{3/4}·exp(−2√V).
pub fn tunneling_j(cfg: &LatticeConfig, axis: Axis) -> Result<f64> {
    let v = cfg.depth[axis.index()];
    if v < MIN_TUNNELING_DEPTH {
        return Err(Error::invalid(
            "depth",
            format!("tunneling estimate needs V >= {MIN_TUNNELING_DEPTH} E_R, got {v}"),
        ));
    }
    Ok(4.0 / PI.sqrt() * recoil_energy(cfg) * v.powf(0.75) * (-2.0 * v.sqrt()).exp())
}

/// Energy offset between vertically adjacent sites, m·g·λ/2, in J. Zero when
/// the cloud is levitated.
pub fn gravity_tilt(cfg: &LatticeConfig) -> f64 {
    if cfg.levitated {
        return 0.0;
    }
    let c = &cfg.constants;
    c.mass * c.gravity_g * cfg.wavelength / 2.0
}

/// Loss channels of a singly occupied Mott insulator near a resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DipChannel {
    /// U = +E
    Plus,
    /// U = −E
    Minus,
    /// U = 0
    Zero,
}

impl DipChannel {
    pub const ALL: [DipChannel; 3] = [DipChannel::Plus, DipChannel::Minus, DipChannel::Zero];

    pub fn as_str(self) -> &'static str {
        match self {
            DipChannel::Plus => "plus",
            DipChannel::Minus => "minus",
            DipChannel::Zero => "zero",
        }
    }
}

impl std::str::FromStr for DipChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+E" | "+" => Ok(DipChannel::Plus),
            "minus" | "-E" | "-" => Ok(DipChannel::Minus),
            "zero" | "0" => Ok(DipChannel::Zero),
            other => Err(Error::invalid(
                "channel",
                format!("expected plus, minus or zero, got {other:?}"),
            )),
        }
    }
}

/// A group of dips that lie within one resolution step of each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossFeature {
    pub channels: Vec<DipChannel>,
    /// Unweighted mean of the member dip fields (G).
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipPrediction {
    /// U = 0, identical to the zero crossing (G).
    pub b_zero_u: f64,
    /// U = +E; `None` when unreachable.
    pub b_plus: Option<f64>,
    /// U = −E; `None` when unreachable.
    pub b_minus: Option<f64>,
    pub resolution: f64,
    /// Every pair of present dips is at least one resolution step apart.
    pub resolvable: bool,
}

impl DipPrediction {
    pub fn field(&self, channel: DipChannel) -> Option<f64> {
        match channel {
            DipChannel::Plus => self.b_plus,
            DipChannel::Minus => self.b_minus,
            DipChannel::Zero => Some(self.b_zero_u),
        }
    }

    /// Present dips sorted by field.
    pub fn dips(&self) -> Vec<(DipChannel, f64)> {
        let mut v: Vec<_> = DipChannel::ALL
            .iter()
            .filter_map(|&c| self.field(c).map(|b| (c, b)))
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v
    }

    pub fn merged(&self, a: DipChannel, b: DipChannel) -> bool {
        match (self.field(a), self.field(b)) {
            (Some(x), Some(y)) => (x - y).abs() < self.resolution,
            _ => false,
        }
    }

    /// Chains dips whose neighbour gaps are below the resolution into
    /// features, in ascending field order.
    pub fn features(&self) -> Vec<LossFeature> {
        let mut groups: Vec<Vec<(DipChannel, f64)>> = Vec::new();
        for dip in self.dips() {
            match groups.last_mut() {
                Some(g) if dip.1 - g.last().unwrap().1 < self.resolution => g.push(dip),
                _ => groups.push(vec![dip]),
            }
        }
        groups
            .into_iter()
            .map(|g| LossFeature {
                center: g.iter().map(|d| d.1).sum::<f64>() / g.len() as f64,
                channels: g.into_iter().map(|d| d.0).collect(),
            })
            .collect()
    }
}

/// Nearest float to `b` (within a few ulps) whose re-evaluated scattering
/// length is closest to `target`. Matters for ultra-narrow resonances where
/// one ulp of field moves a_s by parts in 10⁹.
fn polish(b: f64, target: f64, res: &ResonanceSpec) -> f64 {
    let miss = |x: f64| scattering_length(x, res).map_or(f64::INFINITY, |a| (a - target).abs());
    let mut best = (miss(b), b);
    let (mut up, mut down) = (b, b);
    for _ in 0..4 {
        up = up.next_up();
        down = down.next_down();
        for x in [up, down] {
            let m = miss(x);
            if m < best.0 {
                best = (m, x);
            }
        }
    }
    best.1
}

/// Fields at which U(a_s(B)) equals +E, −E and 0.
///
/// The dispersion is a Möbius map of B, so each target scattering length is
/// reached at exactly one field, found by inverting it in closed form. The
/// ±E channels are absent when the tilt vanishes or the target equals a_bg.
pub fn predict_dips(
    res: &ResonanceSpec,
    cfg: &LatticeConfig,
    resolution: f64,
) -> Result<DipPrediction> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::invalid(
            "resolution",
            format!("must be > 0 G, got {resolution}"),
        ));
    }
    res.validate()?;
    cfg.validate()?;
    let tilt = gravity_tilt(cfg);
    let u_per_bohr = onsite_interaction(cfg, 1.0);
    let (b_plus, b_minus) = if tilt > 0.0 {
        let a_tilt = tilt / u_per_bohr;
        (
            field_for_scattering_length(a_tilt, res).map(|b| polish(b, a_tilt, res)),
            field_for_scattering_length(-a_tilt, res).map(|b| polish(b, -a_tilt, res)),
        )
    } else {
        (None, None)
    };
    let mut pred = DipPrediction {
        b_zero_u: zero_crossing(res),
        b_plus,
        b_minus,
        resolution,
        resolvable: true,
    };
    let dips = pred.dips();
    pred.resolvable = dips.windows(2).all(|w| w[1].1 - w[0].1 >= resolution);
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resonance::Provenance;
    use approx::assert_relative_eq;

    fn cs(depth: f64) -> LatticeConfig {
        LatticeConfig::isotropic(depth).unwrap()
    }

    fn res_4g4() -> ResonanceSpec {
        ResonanceSpec::new("4g(4)", 19.874, 0.0111, 160.0, Provenance::Experiment).unwrap()
    }

    #[test]
    fn recoil_frequency_cs() {
        // h/(2mλ²) with the pinned constants = 1324.82 Hz
        let f = recoil_frequency(&cs(20.0));
        assert!((f - 1324.8).abs() < 0.1, "{f}");
    }

    #[test]
    fn recoil_scaling() {
        let base = cs(20.0);
        let long = LatticeConfig {
            wavelength: 2.0 * base.wavelength,
            ..base
        };
        assert_relative_eq!(
            recoil_energy(&long),
            recoil_energy(&base) / 4.0,
            max_relative = 1e-14
        );
        let heavy = LatticeConfig {
            constants: Constants::with_mass(2.0 * base.constants.mass),
            ..base
        };
        assert_relative_eq!(
            recoil_energy(&heavy),
            recoil_energy(&base) / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn oscillator_length_20er() {
        // (λ/2π)·20^{-1/4} = 80.12 nm
        let a = oscillator_length(&cs(20.0), Axis::X);
        assert!((a - 80.12e-9).abs() < 0.01e-9, "{a}");
        let closed = DEFAULT_WAVELENGTH / TAU * 20f64.powf(-0.25);
        assert_relative_eq!(a, closed, max_relative = 1e-12);
    }

    #[test]
    fn oscillator_length_scaling() {
        let r = oscillator_length(&cs(30.0), Axis::Z) / oscillator_length(&cs(20.0), Axis::Z);
        assert_relative_eq!(r, (20.0f64 / 30.0).powf(0.25), max_relative = 1e-12);
        let mut prev = f64::INFINITY;
        for v in [1.0, 10.0, 100.0, 1e4, 1e12] {
            let a = oscillator_length(&cs(v), Axis::Y);
            assert!(a < prev);
            prev = a;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn inverse_cube_length_scales_as_three_quarter_power() {
        let l = |v: f64| oscillator_length(&cs(v), Axis::X).powi(-3);
        for (v1, v2) in [(20.0, 30.0), (5.0, 80.0), (12.5, 13.0)] {
            assert_relative_eq!(l(v2) / l(v1), (v2 / v1).powf(0.75), max_relative = 1e-12);
        }
    }

    #[test]
    fn onsite_interaction_basic() {
        assert_eq!(onsite_interaction(&cs(20.0), 0.0), 0.0);
        let r = onsite_interaction(&cs(30.0), 100.0) / onsite_interaction(&cs(20.0), 100.0);
        assert_relative_eq!(r, 1.5f64.powf(0.75), max_relative = 1e-12);
        assert!(onsite_interaction(&cs(20.0), -50.0) < 0.0);
    }

    #[test]
    fn onsite_interaction_matches_gaussian_overlap() {
        // U = (4πħ²a/m)·∫|w|⁴ with ∫|w|⁴ = 1/((2π)^{3/2} a_x a_y a_z)
        let cfg = LatticeConfig::new(
            [15.0, 20.0, 35.0],
            DEFAULT_WAVELENGTH,
            Constants::cesium133(),
        )
        .unwrap();
        let c = cfg.constants;
        let overlap = 1.0
            / (TAU.powf(1.5)
                * oscillator_length(&cfg, Axis::X)
                * oscillator_length(&cfg, Axis::Y)
                * oscillator_length(&cfg, Axis::Z));
        let a = 250.0 * c.bohr_radius;
        let u = 4.0 * PI * c.hbar * c.hbar * a / c.mass * overlap;
        assert_relative_eq!(onsite_interaction(&cfg, 250.0), u, max_relative = 1e-12);
    }

    #[test]
    fn tilt_cs() {
        let e = gravity_tilt(&cs(20.0)) / PLANCK;
        assert!((e - 1738.5).abs() < 0.5, "{e}");
        let long = LatticeConfig {
            wavelength: 2.0 * DEFAULT_WAVELENGTH,
            ..cs(20.0)
        };
        assert_relative_eq!(
            gravity_tilt(&long),
            2.0 * gravity_tilt(&cs(20.0)),
            max_relative = 1e-14
        );
        assert_eq!(gravity_tilt(&cs(20.0).levitated(true)), 0.0);
    }

    const PLANCK: f64 = crate::constants::PLANCK_H;

    #[test]
    fn resonant_scattering_length_by_bisection() {
        let cfg = cs(20.0);
        let e = gravity_tilt(&cfg);
        let (mut lo, mut hi) = (0.0, 2000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if onsite_interaction(&cfg, mid) < e {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // |a_s| ≈ 278.4 a₀ gives |U|/h = E/h ≈ 1.74 kHz
        assert!((lo - 278.4).abs() < 0.5, "{lo}");
    }

    #[test]
    fn tunneling_decreases_with_depth() {
        let j = |v: f64| tunneling_j(&cs(v), Axis::Z).unwrap();
        assert!(j(30.0) < j(20.0));
        let mut prev = f64::INFINITY;
        for v in [5.0, 8.0, 12.0, 20.0, 30.0, 40.0] {
            assert!(j(v) < prev);
            prev = j(v);
        }
        // V = 20: (4/√π)·20^{3/4}·e^{−2√20} = 2.785e-3 E_R
        let ratio = j(20.0) / recoil_energy(&cs(20.0));
        assert!((ratio - 2.785e-3).abs() < 1e-6, "{ratio}");
        assert!(tunneling_j(&cs(4.9), Axis::Z).is_err());
    }

    fn bisect_field(
        res: &ResonanceSpec,
        cfg: &LatticeConfig,
        target: f64,
        mut lo: f64,
        mut hi: f64,
    ) -> f64 {
        // independent route: bisection of U(a_s(B)) − target on a bracket
        // lying entirely on one side of the pole
        let f = |b: f64| onsite_interaction(cfg, scattering_length(b, res).unwrap()) - target;
        let flo = f(lo);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn dips_4g4_at_20er() {
        let res = res_4g4();
        let cfg = cs(20.0);
        let p = predict_dips(&res, &cfg, DEFAULT_RESOLUTION).unwrap();
        let e = gravity_tilt(&cfg);
        let plus = bisect_field(&res, &cfg, e, 19.0, res.pole - 1e-12);
        let minus = bisect_field(&res, &cfg, -e, res.pole + 1e-12, 21.0);
        assert!((p.b_plus.unwrap() - plus).abs() < 1e-9);
        assert!((p.b_minus.unwrap() - minus).abs() < 1e-9);
        assert!((p.b_plus.unwrap() - 19.859).abs() < 5e-4);
        assert!((p.b_minus.unwrap() - 19.878).abs() < 5e-4);
        assert!((p.b_zero_u - 19.8851).abs() < 1e-12);
        assert!(p.merged(DipChannel::Minus, DipChannel::Zero));
        assert!(!p.merged(DipChannel::Plus, DipChannel::Minus));
        assert!(!p.resolvable);
        let feats = p.features();
        assert_eq!(feats.len(), 2);
        assert_eq!(feats[0].channels, vec![DipChannel::Plus]);
        assert_eq!(feats[1].channels, vec![DipChannel::Minus, DipChannel::Zero]);
    }

    #[test]
    fn dips_satisfy_conditions_to_1e9() {
        let cat = crate::catalog::ResonanceCatalog::bundled();
        for res in cat.entries() {
            for v in [10.0, 20.0, 30.0] {
                let cfg = cs(v);
                let p = predict_dips(res, &cfg, DEFAULT_RESOLUTION).unwrap();
                let e = gravity_tilt(&cfg);
                let u = |b: f64| onsite_interaction(&cfg, scattering_length(b, res).unwrap());
                assert_eq!(u(p.b_zero_u), 0.0);
                for (b, sign) in [(p.b_plus.unwrap(), 1.0), (p.b_minus.unwrap(), -1.0)] {
                    let rel = ((u(b) - sign * e) / e).abs();
                    // U changes by this much between adjacent representable
                    // fields; nothing closer than half a step exists
                    let step = (u(b.next_up()) - u(b))
                        .abs()
                        .max((u(b) - u(b.next_down())).abs())
                        / e;
                    assert!(
                        rel < 1e-9f64.max(0.5 * step),
                        "{} V={v}: {rel:e} (step {step:e})",
                        res.label
                    );
                }
            }
        }
    }

    #[test]
    fn deeper_lattice_moves_plus_dip_down() {
        let res = res_4g4();
        let p20 = predict_dips(&res, &cs(20.0), DEFAULT_RESOLUTION).unwrap();
        let p30 = predict_dips(&res, &cs(30.0), DEFAULT_RESOLUTION).unwrap();
        assert!(
            (p30.b_plus.unwrap() - 19.835).abs() < 1e-3,
            "{:?}",
            p30.b_plus
        );
        assert!(p30.b_plus.unwrap() < p20.b_plus.unwrap());
        assert!(p30.b_minus.unwrap() != p20.b_minus.unwrap());
        assert_eq!(p30.b_zero_u, p20.b_zero_u);
    }

    #[test]
    fn ultra_narrow_collapses_to_one_feature() {
        let res =
            ResonanceSpec::new("6g(4)", 7.704, -8e-6, -827.0, Provenance::Experiment).unwrap();
        let p = predict_dips(&res, &cs(20.0), DEFAULT_RESOLUTION).unwrap();
        let feats = p.features();
        assert_eq!(feats.len(), 1);
        assert_eq!(feats[0].channels.len(), 3);
        assert!((feats[0].center - res.pole).abs() < 1e-4);
    }

    #[test]
    fn levitated_has_only_zero_channel() {
        let p = predict_dips(&res_4g4(), &cs(20.0).levitated(true), DEFAULT_RESOLUTION).unwrap();
        assert!(p.b_plus.is_none() && p.b_minus.is_none());
        assert!(p.resolvable);
        assert_eq!(p.dips().len(), 1);
    }

    #[test]
    fn bad_resolution() {
        assert!(predict_dips(&res_4g4(), &cs(20.0), 0.0).is_err());
    }
}
