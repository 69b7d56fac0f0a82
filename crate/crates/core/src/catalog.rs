//! Resonance catalog: a plain-text, line-oriented table of resonances.
//!
//! Grammar, one record per line:
//!
//! ```text
//! # comment
//! <label> <provenance> <B0_G> <dB_G> <abg_a0> [abg_estimated]
//! ```
//!
//! `provenance` is `experiment` or `theory`; `dB_G` is the signed width
//! (zero crossing at `B0_G + dB_G`). Blank lines and text after `#` are
//! ignored.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resonance::{Provenance, ResonanceSpec};

const ESTIMATED_FLAG: &str = "abg_estimated";

/// Measured positions and widths of the Cs |3,3⟩ g-wave resonances between
/// 3 and 20 G together with coupled-channels predictions. Widths carry the
/// sign of the zero-crossing offset. Background scattering lengths other
/// than the 19.9 G value are read off the smooth Cs background dispersion and
/// flagged as estimates.
pub const BUNDLED_CATALOG: &str = "\
# label provenance B0_G dB_G abg_a0 [flags]
4g(4) experiment 19.874 0.0111 160
6g(5) experiment 15.014 -0.0034 -129 abg_estimated
4g(3) experiment 14.345 -0.014 -176 abg_estimated
4g(2) experiment 10.994 -0.0032 -458 abg_estimated
6g(4) experiment 7.704 -0.000008 -827 abg_estimated
6g(3) experiment 5.122 -0.0000014 -1216 abg_estimated
6g(2) experiment 3.753 -0.0000012 -1475 abg_estimated
4g(4) theory 19.682 0.0097 160
6g(5) theory 14.761 -0.0036 -129 abg_estimated
4g(3) theory 14.195 -0.0134 -176 abg_estimated
4g(2) theory 10.893 -0.006 -458 abg_estimated
6g(4) theory 7.555 -0.000016 -827 abg_estimated
6g(3) theory 5.038 -0.000006 -1216 abg_estimated
6g(2) theory 3.703 -0.000002 -1475 abg_estimated
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceCatalog {
    entries: Vec<ResonanceSpec>,
}

impl ResonanceCatalog {
    /// Builds a catalog, sorting by descending pole and rejecting duplicate
    /// labels within one provenance.
    pub fn new(mut entries: Vec<ResonanceSpec>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        let mut seen = HashSet::new();
        for e in &entries {
            e.validate()?;
            if !seen.insert((e.label.clone(), e.provenance)) {
                return Err(Error::invalid(
                    "label",
                    format!("duplicate {} entry {}", e.provenance, e.label),
                ));
            }
        }
        entries.sort_by(|a, b| b.pole.total_cmp(&a.pole));
        Ok(ResonanceCatalog { entries })
    }

    pub fn bundled() -> Self {
        load_catalog(BUNDLED_CATALOG).expect("bundled catalog is well formed")
    }

    pub fn entries(&self) -> &[ResonanceSpec] {
        &self.entries
    }

    pub fn iter(&self, provenance: Provenance) -> impl Iterator<Item = &ResonanceSpec> {
        self.entries
            .iter()
            .filter(move |e| e.provenance == provenance)
    }

    pub fn get(&self, label: &str, provenance: Provenance) -> Result<&ResonanceSpec> {
        self.entries
            .iter()
            .find(|e| e.label == label && e.provenance == provenance)
            .ok_or_else(|| Error::UnknownLabel {
                label: label.to_string(),
                provenance: provenance.to_string(),
            })
    }

    /// Serializes in the same grammar [`load_catalog`] reads. Floats use the
    /// shortest round-trip representation.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# label provenance B0_G dB_G abg_a0 [flags]\n");
        for e in &self.entries {
            let _ = write!(
                out,
                "{} {} {} {} {}",
                e.label, e.provenance, e.pole, e.width, e.abg
            );
            if e.abg_estimated {
                let _ = write!(out, " {ESTIMATED_FLAG}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_catalog(source: &str) -> Result<ResonanceCatalog> {
    let mut entries = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(5..=6).contains(&fields.len()) {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected 5 or 6 fields, found {}", fields.len()),
            });
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                reason: format!("{name}: cannot parse {:?} as a number", fields[i]),
            })
        };
        let provenance: Provenance = fields[1].parse().map_err(|e: Error| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let abg_estimated = match fields.get(5) {
            None => false,
            Some(&ESTIMATED_FLAG) => true,
            Some(other) => {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("unknown flag {other:?}"),
                })
            }
        };
        let spec = ResonanceSpec {
            label: fields[0].to_string(),
            pole: num(2, "B0_G")?,
            width: num(3, "dB_G")?,
            abg: num(4, "abg_a0")?,
            provenance,
            abg_estimated,
        };
        spec.validate().map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        entries.push(spec);
    }
    ResonanceCatalog::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_experiment_4g4() {
        let cat = ResonanceCatalog::bundled();
        let r = cat.get("4g(4)", Provenance::Experiment).unwrap();
        assert_eq!(r.pole, 19.874);
        assert!((r.width.abs() - 0.0111).abs() < 1e-15);
        assert!(!r.abg_estimated);
    }

    #[test]
    fn bundled_theory_6g2() {
        let cat = ResonanceCatalog::bundled();
        let r = cat.get("6g(2)", Provenance::Theory).unwrap();
        assert_eq!(r.pole, 3.703);
        // 0.002 mG
        assert!((r.width.abs() - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn bundled_has_seven_per_side_sorted() {
        let cat = ResonanceCatalog::bundled();
        assert_eq!(cat.iter(Provenance::Experiment).count(), 7);
        assert_eq!(cat.iter(Provenance::Theory).count(), 7);
        assert!(cat.entries().windows(2).all(|w| w[0].pole >= w[1].pole));
    }

    #[test]
    fn zero_crossing_side_follows_abg_sign() {
        for r in ResonanceCatalog::bundled().entries() {
            assert_eq!(r.width.signum(), r.abg.signum(), "{}", r.label);
        }
    }

    #[test]
    fn empty_source_is_an_error() {
        assert_eq!(load_catalog(""), Err(Error::EmptyCatalog));
        assert_eq!(load_catalog("# nothing\n\n"), Err(Error::EmptyCatalog));
    }

    #[test]
    fn parse_error_reports_line() {
        let src = "4g(4) experiment 19.874 0.0111 160\n6g(5) experiment abc -0.0034 -129\n";
        match load_catalog(src) {
            Err(Error::Parse { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("B0_G"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invariant_violation_names_field() {
        let src = "4g(4) experiment 19.874 0 160\n";
        match load_catalog(src) {
            Err(Error::Parse { line: 1, reason }) => assert!(reason.contains("width"), "{reason}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        let src = "4g(4) experiment 19.874 0.0111 160\n4g(4) experiment 19.8 0.0111 160\n";
        assert!(load_catalog(src).is_err());
        let ok = "4g(4) experiment 19.874 0.0111 160\n4g(4) theory 19.682 0.0097 160\n";
        assert!(load_catalog(ok).is_ok());
    }

    #[test]
    fn text_round_trip_is_bit_identical() {
        let cat = ResonanceCatalog::bundled();
        let back = load_catalog(&cat.to_text()).unwrap();
        for (a, b) in cat.entries().iter().zip(back.entries()) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.pole.to_bits(), b.pole.to_bits());
            assert_eq!(a.width.to_bits(), b.width.to_bits());
            assert_eq!(a.abg.to_bits(), b.abg.to_bits());
            assert_eq!(a.abg_estimated, b.abg_estimated);
        }
    }
}
