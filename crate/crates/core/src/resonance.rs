//! A single magnetic Feshbach resonance and its scattering-length dispersion.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Experiment,
    Theory,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Experiment => "experiment",
            Provenance::Theory => "theory",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "experiment" | "exp" => Ok(Provenance::Experiment),
            "theory" | "th" => Ok(Provenance::Theory),
            other => Err(Error::invalid(
                "provenance",
                format!("expected experiment or theory, got {other:?}"),
            )),
        }
    }
}

/// One resonance: pole `pole` (G), signed width `width` (G) such that the
/// zero crossing sits at `pole + width`, and background scattering length
/// `abg` (a₀).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSpec {
    pub label: String,
    pub pole: f64,
    pub width: f64,
    pub abg: f64,
    pub provenance: Provenance,
    /// The background scattering length is a rough placeholder rather than a
    /// tabulated value.
    #[serde(default)]
    pub abg_estimated: bool,
}

impl ResonanceSpec {
    pub fn new(
        label: impl Into<String>,
        pole: f64,
        width: f64,
        abg: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        let spec = ResonanceSpec {
            label: label.into(),
            pole,
            width,
            abg,
            provenance,
            abg_estimated: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !is_molecular_label(&self.label) {
            return Err(Error::invalid(
                "label",
                format!("{:?} is not of the form fl(m_f), e.g. 4g(4)", self.label),
            ));
        }
        if !(self.pole.is_finite() && self.pole > 0.0) {
            return Err(Error::invalid(
                "pole",
                format!("must be > 0 G, got {}", self.pole),
            ));
        }
        if !self.width.is_finite() || self.width == 0.0 {
            return Err(Error::invalid(
                "width",
                format!("must be finite and non-zero, got {}", self.width),
            ));
        }
        if !self.abg.is_finite() || self.abg == 0.0 {
            return Err(Error::invalid(
                "abg",
                format!("must be finite and non-zero, got {}", self.abg),
            ));
        }
        Ok(())
    }

    pub fn with_width(&self, width: f64) -> Self {
        ResonanceSpec {
            width,
            ..self.clone()
        }
    }

    pub fn with_abg(&self, abg: f64) -> Self {
        ResonanceSpec {
            abg,
            abg_estimated: false,
            ..self.clone()
        }
    }

    pub fn with_pole(&self, pole: f64) -> Self {
        ResonanceSpec {
            pole,
            ..self.clone()
        }
    }
}

/// Accepts molecular-state labels such as `4g(4)`, `6g(5)` or `2s(-1)`.
pub fn is_molecular_label(label: &str) -> bool {
    let bytes = label.as_bytes();
    let digits = bytes.iter().take_while(|b| b.is_ascii_digit()).count();
    if digits == 0 {
        return false;
    }
    let rest = &bytes[digits..];
    if rest.len() < 4 || !rest[0].is_ascii_lowercase() || rest[1] != b'(' {
        return false;
    }
    let inner = &rest[2..rest.len() - 1];
    if rest[rest.len() - 1] != b')' {
        return false;
    }
    let inner = inner.strip_prefix(b"-").unwrap_or(inner);
    !inner.is_empty() && inner.iter().all(|b| b.is_ascii_digit())
}

/// Scattering length in a₀ at field `b` (G): `abg·(1 − ΔB/(B − B₀))`.
pub fn scattering_length(b: f64, res: &ResonanceSpec) -> Result<f64> {
    let detuning = b - res.pole;
    if detuning == 0.0 {
        return Err(Error::PoleEvaluation(b));
    }
    // (B − B*)/(B − B₀) with B* rounded exactly as zero_crossing() rounds it,
    // so the root is exact in floating point.
    Ok(res.abg * ((b - zero_crossing(res)) / detuning))
}

/// Field (G) at which the scattering length vanishes, `B₀ + ΔB`.
pub fn zero_crossing(res: &ResonanceSpec) -> f64 {
    res.pole + res.width
}

/// Inverse of the dispersion: the field at which the scattering length equals
/// `target` (a₀). `None` when `target == abg`, which is reached only as
/// |B| → ∞.
pub fn field_for_scattering_length(target: f64, res: &ResonanceSpec) -> Option<f64> {
    let denom = target - res.abg;
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    Some(res.pole - res.abg * res.width / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig3() -> ResonanceSpec {
        ResonanceSpec::new("4g(4)", 19.874, 0.0111, 160.0, Provenance::Experiment).unwrap()
    }

    #[test]
    fn zero_at_pole_plus_width() {
        let r = fig3();
        assert_eq!(scattering_length(r.pole + r.width, &r).unwrap(), 0.0);
    }

    #[test]
    fn far_field_tends_to_abg() {
        let r = fig3();
        let far = r.pole + 1e6 * r.width;
        assert_relative_eq!(
            scattering_length(far, &r).unwrap(),
            r.abg,
            max_relative = 1e-5
        );
    }

    #[test]
    fn two_widths_above_pole_gives_half_abg() {
        // abg·(1 − ΔB/(2ΔB)) = abg/2
        let r = fig3();
        let a = scattering_length(19.874 + 0.0222, &r).unwrap();
        assert_relative_eq!(a, 80.0, max_relative = 1e-9);
    }

    #[test]
    fn pole_is_an_error() {
        let r = fig3();
        assert_eq!(
            scattering_length(r.pole, &r),
            Err(Error::PoleEvaluation(r.pole))
        );
    }

    #[test]
    fn zero_crossing_matches_bisection() {
        let r = fig3();
        // bracket strictly right of the pole, where a_s runs from −∞ to abg
        let (mut lo, mut hi) = (r.pole + 1e-9, r.pole + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if scattering_length(mid, &r).unwrap() < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((zero_crossing(&r) - 19.8851).abs() < 1e-12);
        assert!((0.5 * (lo + hi) - 19.8851).abs() < 1e-12);
    }

    #[test]
    fn negative_width_puts_zero_below_pole() {
        let r =
            ResonanceSpec::new("4g(3)", 14.345, -0.014, -176.0, Provenance::Experiment).unwrap();
        assert!(zero_crossing(&r) < r.pole);
        let tiny = r.with_width(-1e-15);
        assert!((zero_crossing(&tiny) - r.pole).abs() < 1e-14);
    }

    #[test]
    fn invariants_rejected() {
        assert!(ResonanceSpec::new("4g(4)", 19.0, 0.0, 160.0, Provenance::Theory).is_err());
        assert!(ResonanceSpec::new("4g(4)", 19.0, 0.01, 0.0, Provenance::Theory).is_err());
        assert!(ResonanceSpec::new("4g(4)", -1.0, 0.01, 1.0, Provenance::Theory).is_err());
        assert!(ResonanceSpec::new("foo", 19.0, 0.01, 1.0, Provenance::Theory).is_err());
    }

    #[test]
    fn label_grammar() {
        for ok in ["4g(4)", "6g(5)", "10s(-2)", "2d(0)"] {
            assert!(is_molecular_label(ok), "{ok}");
        }
        for bad in ["g(4)", "4G(4)", "4g4", "4g()", "4g(4", "4gg(4)", "4g(a)"] {
            assert!(!is_molecular_label(bad), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn inverse_dispersion_round_trips(
            pole in 1.0f64..30.0,
            width in prop_oneof![-0.02f64..-1e-7, 1e-7f64..0.02],
            abg in prop_oneof![-2000.0f64..-10.0, 10.0f64..2000.0],
            target in -3000.0f64..3000.0,
        ) {
            let r = ResonanceSpec::new("6g(4)", pole, width, abg, Provenance::Theory).unwrap();
            prop_assume!((target - abg).abs() > 1.0);
            let b = field_for_scattering_length(target, &r).unwrap();
            prop_assume!(b != r.pole);
            let a = scattering_length(b, &r).unwrap();
            prop_assert!((a - target).abs() <= 1e-6 * (1.0 + target.abs()));
        }

        #[test]
        fn sign_of_offset_flips_only_across_pole(
            width in prop_oneof![-0.02f64..-1e-6, 1e-6f64..0.02],
            abg in prop_oneof![-500.0f64..-10.0, 10.0f64..500.0],
            x1 in 1e-6f64..1.0,
            x2 in 1e-6f64..1.0,
        ) {
            let r = ResonanceSpec::new("4g(4)", 19.874, width, abg, Provenance::Theory).unwrap();
            let off = |b: f64| (scattering_length(b, &r).unwrap() - abg).signum();
            prop_assert_eq!(off(r.pole + x1), off(r.pole + x2));
            prop_assert_eq!(off(r.pole - x1), off(r.pole - x2));
            prop_assert_eq!(off(r.pole + x1), -off(r.pole - x1));
        }

        #[test]
        fn monotone_on_each_branch(
            width in prop_oneof![-0.02f64..-1e-6, 1e-6f64..0.02],
            abg in prop_oneof![-500.0f64..-10.0, 10.0f64..500.0],
            x1 in 1e-5f64..1.0,
            dx in 1e-5f64..1.0,
        ) {
            let r = ResonanceSpec::new("4g(4)", 19.874, width, abg, Provenance::Theory).unwrap();
            let a = |b: f64| scattering_length(b, &r).unwrap();
            // d a_s/dB = abg·ΔB/(B−B₀)² has a fixed sign
            let s = (abg * width).signum();
            prop_assert!(s * (a(r.pole + x1 + dx) - a(r.pole + x1)) > 0.0);
            prop_assert!(s * (a(r.pole - x1) - a(r.pole - x1 - dx)) > 0.0);
        }
    }
}
