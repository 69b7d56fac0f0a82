//! Physical constants (CODATA 2018) and the atomic species mass.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

/// Planck constant h (J·s), exact in SI.
pub const PLANCK_H: f64 = 6.626_070_15e-34;
/// Mass of ¹³³Cs (kg).
pub const CESIUM_133_MASS: f64 = 2.206_946_50e-25;
/// Bohr radius a₀ (m).
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Standard gravity (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.806_65;

/// Constants consumed by the lattice and association models.
///
/// `hbar` is always derived as `planck_h / 2π` so that the two never drift
/// apart, whichever species mass is plugged in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub planck_h: f64,
    pub hbar: f64,
    pub mass: f64,
    pub bohr_radius: f64,
    pub gravity_g: f64,
}

impl Constants {
    pub fn cesium133() -> Self {
        Self::with_mass(CESIUM_133_MASS)
    }

    /// Same fundamental constants with a different atomic mass in kg.
    pub fn with_mass(mass: f64) -> Self {
        Constants {
            planck_h: PLANCK_H,
            hbar: PLANCK_H / TAU,
            mass,
            bohr_radius: BOHR_RADIUS,
            gravity_g: STANDARD_GRAVITY,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.planck_h,
            self.hbar,
            self.mass,
            self.bohr_radius,
            self.gravity_g,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0)
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::cesium133()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hbar_consistent_with_h() {
        let c = Constants::cesium133();
        let rel = (c.hbar - c.planck_h / TAU).abs() / c.hbar;
        assert!(rel < 1e-12);
        // CODATA 2018 quotes ħ = 1.054571817e-34 J·s (truncated)
        assert!((c.hbar - 1.054_571_817e-34).abs() / c.hbar < 1e-9);
    }

    #[test]
    fn all_positive() {
        assert!(Constants::cesium133().is_valid());
        assert!(!Constants::with_mass(0.0).is_valid());
    }
}
