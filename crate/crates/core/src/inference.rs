//! Recovering resonance widths from molecule-association sweeps and poles
//! from observed loss-dip fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::association::lz_rate_scale_for;
use crate::catalog::ResonanceCatalog;
use crate::error::{Error, Result};
use crate::lattice::{predict_dips, DipChannel, LatticeConfig, DEFAULT_RESOLUTION};
use crate::resonance::{Provenance, ResonanceSpec};

/// Theory pole positions are uncertain at about this level (G).
pub const THEORY_POLE_UNCERTAINTY: f64 = 0.2;
/// Widths of resonances below this field (G) carry a systematic band.
pub const SYSTEMATIC_BAND_BELOW: f64 = 10.0;
/// Systematic width band for the sub-10 G resonances (G).
pub const SYSTEMATIC_BAND: [f64; 2] = [0.0, 20e-6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// G/s
    pub rate: f64,
    pub n_rel: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDataset {
    pub points: Vec<SweepPoint>,
    pub lattice: LatticeConfig,
    /// Fixed background scattering length (a₀).
    pub resonance_abg: f64,
    /// Pole (G), when known; used only to annotate the result.
    pub resonance_pole: Option<f64>,
}

impl SweepDataset {
    pub fn validate(&self) -> Result<()> {
        for p in &self.points {
            if !(p.rate.is_finite() && p.rate > 0.0) {
                return Err(Error::invalid(
                    "rate",
                    format!("must be > 0 G/s, got {}", p.rate),
                ));
            }
            if !(p.sigma.is_finite() && p.sigma > 0.0) {
                return Err(Error::invalid(
                    "sigma",
                    format!("must be > 0, got {}", p.sigma),
                ));
            }
            if !(0.0..=1.2).contains(&p.n_rel) {
                return Err(Error::invalid(
                    "n_rel",
                    format!("must lie in [0, 1.2], got {}", p.n_rel),
                ));
            }
        }
        if !(self.resonance_abg.is_finite() && self.resonance_abg != 0.0) {
            return Err(Error::invalid("abg", "must be finite and non-zero"));
        }
        self.lattice.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// |ΔB| in G
    pub width: f64,
    pub width_sigma: f64,
    pub p0: f64,
    pub p0_sigma: f64,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Systematic width band (G) attached to sub-10 G resonances.
    pub systematic_band: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Largest admissible cosine between the residual vector and any
    /// Jacobian column.
    pub gradient_tolerance: f64,
    pub p0_init: f64,
    /// Return an error instead of an unconverged result.
    pub strict: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            p0_init: crate::association::DEFAULT_P0,
            strict: true,
        }
    }
}

/// Residuals (y − p)/σ and their Jacobian with respect to (ln|ΔB|, p₀).
struct SweepModel<'a> {
    points: &'a [SweepPoint],
    /// δ_LZ·Ḃ per gauss of width
    scale: f64,
}

impl SweepModel<'_> {
    fn evaluate(&self, theta: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let width = theta[0].exp();
        let p0 = theta[1];
        self.points
            .iter()
            .map(|pt| {
                let delta = self.scale * width / pt.rate;
                let e = (-2.0 * PI * delta).exp();
                let p = p0 + (1.0 - p0) * e;
                let dp_dlnw = -(1.0 - p0) * e * 2.0 * PI * delta;
                let dp_dp0 = 1.0 - e;
                (
                    (pt.n_rel - p) / pt.sigma,
                    [-dp_dlnw / pt.sigma, -dp_dp0 / pt.sigma],
                )
            })
            .unzip()
    }

    fn chi2(&self, theta: [f64; 2]) -> f64 {
        self.evaluate(theta).0.iter().map(|r| r * r).sum()
    }

    /// Best p₀ for fixed width, by weighted linear least squares.
    fn profile_p0(&self, ln_width: f64) -> f64 {
        let width = ln_width.exp();
        let (mut num, mut den) = (0.0, 0.0);
        for pt in self.points {
            let e = (-2.0 * PI * self.scale * width / pt.rate).exp();
            let w = 1.0 / (pt.sigma * pt.sigma);
            num += w * (1.0 - e) * (pt.n_rel - e);
            den += w * (1.0 - e) * (1.0 - e);
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

fn normal_matrix(jac: &[[f64; 2]], res: &[f64]) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut a = [[0.0; 2]; 2];
    let mut g = [0.0; 2];
    for (row, r) in jac.iter().zip(res) {
        for i in 0..2 {
            g[i] += row[i] * r;
            for j in 0..2 {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    (a, g)
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    ])
}

fn check_sweep_data(data: &SweepDataset) -> Result<()> {
    data.validate()?;
    let pts = &data.points;
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 points, got {}",
            pts.len()
        )));
    }
    let lo = pts.iter().map(|p| p.rate).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.rate).fold(0.0, f64::max);
    if hi < 5.0 * lo {
        return Err(Error::InsufficientData(format!(
            "rates must span a factor of 5, got {lo} to {hi} G/s"
        )));
    }
    // a flat dataset carries no information on the width
    let w: Vec<f64> = pts.iter().map(|p| 1.0 / (p.sigma * p.sigma)).collect();
    let mean = pts.iter().zip(&w).map(|(p, w)| w * p.n_rel).sum::<f64>() / w.iter().sum::<f64>();
    let chi2_flat: f64 = pts
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.n_rel - mean).powi(2))
        .sum();
    let dof = (pts.len() - 1) as f64;
    if chi2_flat <= dof + 3.0 * (2.0 * dof).sqrt() {
        return Err(Error::DegenerateData(format!(
            "data are consistent with a constant (chi2 {chi2_flat:.3} for {dof} dof): all points saturated"
        )));
    }
    Ok(())
}

pub fn fit_width(data: &SweepDataset) -> Result<FitResult> {
    fit_width_with(data, &FitOptions::default())
}

/// Weighted Levenberg-Marquardt fit of the Landau-Zener survival curve in
/// (ln|ΔB|, p₀), started from a profile-likelihood scan over the width.
pub fn fit_width_with(data: &SweepDataset, opts: &FitOptions) -> Result<FitResult> {
    check_sweep_data(data)?;
    let model = SweepModel {
        points: &data.points,
        scale: lz_rate_scale_for(data.resonance_abg, 1.0, &data.lattice),
    };

    // widths whose half-conversion rate lies 4 decades beyond the data
    let lo_rate = data
        .points
        .iter()
        .map(|p| p.rate)
        .fold(f64::INFINITY, f64::min);
    let hi_rate = data.points.iter().map(|p| p.rate).fold(0.0, f64::max);
    let to_ln_width = |rate: f64| (rate * 2f64.ln() / (2.0 * PI * model.scale)).ln();
    let (s_lo, s_hi) = (to_ln_width(lo_rate * 1e-4), to_ln_width(hi_rate * 1e4));
    let steps = 400;
    let mut theta = [s_lo, opts.p0_init];
    let mut best = f64::INFINITY;
    for k in 0..=steps {
        let s = s_lo + (s_hi - s_lo) * k as f64 / steps as f64;
        let cand = [s, model.profile_p0(s)];
        let c = model.chi2(cand);
        if c < best {
            best = c;
            theta = cand;
        }
    }

    let (mut res, mut jac) = model.evaluate(theta);
    let mut chi2: f64 = res.iter().map(|r| r * r).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_measure = f64::INFINITY;
    while iterations < opts.max_iterations {
        let (a, g) = normal_matrix(&jac, &res);
        // cosine between the residual vector and each Jacobian column
        grad_measure = (0..2)
            .map(|i| g[i].abs() / (a[i][i].sqrt() * chi2.sqrt()))
            .fold(0.0, f64::max);
        if chi2 <= f64::EPSILON * f64::EPSILON * data.points.len() as f64
            || grad_measure <= opts.gradient_tolerance
        {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while lambda < 1e16 {
            let damped = [
                [a[0][0] * (1.0 + lambda), a[0][1]],
                [a[1][0], a[1][1] * (1.0 + lambda)],
            ];
            let Some(step) = solve2(damped, [-g[0], -g[1]]) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [theta[0] + step[0], theta[1] + step[1]];
            let (r_new, j_new) = model.evaluate(trial);
            let chi2_new: f64 = r_new.iter().map(|r| r * r).sum();
            if chi2_new.is_finite() && chi2_new <= chi2 {
                let tiny = (0..2).all(|i| step[i].abs() <= 1e-14 * (theta[i].abs() + 1e-14));
                theta = trial;
                res = r_new;
                jac = j_new;
                chi2 = chi2_new;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if tiny {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            converged = true;
            break;
        }
    }
    if !converged && opts.strict {
        return Err(Error::NotConverged {
            iterations,
            gradient_norm: grad_measure,
        });
    }

    let (a, _) = normal_matrix(&jac, &res);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let (var_s, var_p0) = if det > 0.0 {
        (a[1][1] / det, a[0][0] / det)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let width = theta[0].exp();
    let systematic_band = data
        .resonance_pole
        .filter(|&b| b < SYSTEMATIC_BAND_BELOW)
        .map(|_| SYSTEMATIC_BAND);
    Ok(FitResult {
        width,
        width_sigma: width * var_s.sqrt(),
        p0: theta[1],
        p0_sigma: var_p0.sqrt(),
        reduced_chi2: chi2 / (data.points.len() - 2) as f64,
        converged,
        iterations,
        systematic_band,
    })
}

/// One observed loss dip. Without a channel the dip is assigned
/// automatically to a predicted loss feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipObservation {
    /// G
    pub field: f64,
    /// G; defaults to the field-control step when absent
    pub sigma: Option<f64>,
    pub channel: Option<DipChannel>,
}

impl DipObservation {
    pub fn new(field: f64) -> Self {
        DipObservation {
            field,
            sigma: None,
            channel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipResidual {
    pub field: f64,
    /// Channels making up the feature this dip was matched to.
    pub channels: Vec<DipChannel>,
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleFit {
    pub pole: f64,
    pub pole_sigma: f64,
    pub chi2: f64,
    pub residuals: Vec<DipResidual>,
}

/// Pole settings used by [`fit_pole`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleFitOptions {
    /// Features closer than this (G) are treated as one.
    pub resolution: f64,
    /// Assignments whose χ² differ by less than this are a tie.
    pub tie_tolerance: f64,
}

impl Default for PoleFitOptions {
    fn default() -> Self {
        PoleFitOptions {
            resolution: DEFAULT_RESOLUTION,
            tie_tolerance: 1e-9,
        }
    }
}

/// (observation index, matched channels, offset of the feature from the pole)
type Assignment = (usize, Vec<DipChannel>, f64);

/// Least-squares pole such that the predicted dips at fixed width and
/// background length match the observations.
///
/// Each predicted dip sits at a pole-independent offset from the pole, so for
/// a given assignment the best pole is the weighted mean of
/// `observed − offset`. Unassigned dips are matched to the resolvable
/// features of the prediction, trying every injective assignment.
pub fn fit_pole(
    dips: &[DipObservation],
    width: f64,
    abg: f64,
    cfg: &LatticeConfig,
) -> Result<PoleFit> {
    fit_pole_with(dips, width, abg, cfg, &PoleFitOptions::default())
}

pub fn fit_pole_with(
    dips: &[DipObservation],
    width: f64,
    abg: f64,
    cfg: &LatticeConfig,
    opts: &PoleFitOptions,
) -> Result<PoleFit> {
    if dips.is_empty() {
        return Err(Error::InsufficientData("no dips observed".into()));
    }
    for d in dips {
        if !d.field.is_finite() || d.field <= 0.0 {
            return Err(Error::invalid(
                "dip field",
                format!("must be > 0 G, got {}", d.field),
            ));
        }
        if let Some(s) = d.sigma {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(
                    "dip sigma",
                    format!("must be > 0 G, got {s}"),
                ));
            }
        }
    }
    let reference = dips.iter().map(|d| d.field).sum::<f64>() / dips.len() as f64;
    let spec = ResonanceSpec {
        label: "0x(0)".into(),
        pole: reference,
        width,
        abg,
        provenance: Provenance::Experiment,
        abg_estimated: false,
    };
    let pred = predict_dips(&spec, cfg, opts.resolution)?;
    let features: Vec<(Vec<DipChannel>, f64)> = pred
        .features()
        .into_iter()
        .map(|f| (f.channels, f.center - reference))
        .collect();

    let mut fixed: Vec<Assignment> = Vec::new();
    let mut free: Vec<usize> = Vec::new();
    for (i, d) in dips.iter().enumerate() {
        match d.channel {
            Some(c) => {
                let b = pred.field(c).ok_or_else(|| {
                    Error::invalid(
                        "channel",
                        format!("{} channel does not exist for this lattice", c.as_str()),
                    )
                })?;
                fixed.push((i, vec![c], b - reference));
            }
            None => free.push(i),
        }
    }
    if free.len() > features.len() {
        return Err(Error::InsufficientData(format!(
            "{} unassigned dips but only {} resolvable features predicted",
            free.len(),
            features.len()
        )));
    }

    let weight = |i: usize| 1.0 / dips[i].sigma.unwrap_or(DEFAULT_RESOLUTION).powi(2);
    let solve = |assign: &[(usize, Vec<DipChannel>, f64)]| -> (f64, f64) {
        let wsum: f64 = assign.iter().map(|a| weight(a.0)).sum();
        let pole = assign
            .iter()
            .map(|a| weight(a.0) * (dips[a.0].field - a.2))
            .sum::<f64>()
            / wsum;
        let chi2 = assign
            .iter()
            .map(|a| weight(a.0) * (dips[a.0].field - a.2 - pole).powi(2))
            .sum();
        (pole, chi2)
    };

    let mut candidates: Vec<(f64, f64, Vec<Assignment>)> = Vec::new();
    for perm in injections(free.len(), features.len()) {
        let mut assign = fixed.clone();
        for (k, &fi) in perm.iter().enumerate() {
            assign.push((free[k], features[fi].0.clone(), features[fi].1));
        }
        let (pole, chi2) = solve(&assign);
        candidates.push((chi2, pole, assign));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    if candidates.len() > 1 {
        let (best, next) = (candidates[0].0, candidates[1].0);
        let distinct = (candidates[0].1 - candidates[1].1).abs() > 1e-12;
        if next - best <= opts.tie_tolerance * (1.0 + best) && distinct {
            return Err(Error::AmbiguousAssignment {
                best,
                runner_up: next,
            });
        }
    }
    let (chi2, pole, mut assign) = candidates.swap_remove(0);
    assign.sort_by_key(|a| a.0);
    let wsum: f64 = assign.iter().map(|a| weight(a.0)).sum();
    Ok(PoleFit {
        pole,
        pole_sigma: wsum.sqrt().recip(),
        chi2,
        residuals: assign
            .into_iter()
            .map(|(i, channels, off)| DipResidual {
                field: dips[i].field,
                channels,
                predicted: pole + off,
                residual: dips[i].field - pole - off,
            })
            .collect(),
    })
}

/// All injective maps from `k` items into `n` slots, as slot indices.
fn injections(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(k: usize, n: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for s in 0..n {
            if !current.contains(&s) {
                current.push(s);
                rec(k, n, current, out);
                current.pop();
            }
        }
    }
    rec(k, n, &mut current, &mut out);
    out
}

/// An experimental determination to compare against the theory column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub label: String,
    /// G
    pub pole: Option<f64>,
    /// |ΔB| in G
    pub width: Option<f64>,
}

impl Measurement {
    pub fn from_fit(label: impl Into<String>, fit: &FitResult) -> Self {
        Measurement {
            label: label.into(),
            pole: None,
            width: Some(fit.width),
        }
    }

    pub fn from_pole(label: impl Into<String>, fit: &PoleFit) -> Self {
        Measurement {
            label: label.into(),
            pole: Some(fit.pole),
            width: None,
        }
    }
}

impl From<&ResonanceSpec> for Measurement {
    fn from(r: &ResonanceSpec) -> Self {
        Measurement {
            label: r.label.clone(),
            pole: Some(r.pole),
            width: Some(r.width.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryComparison {
    pub label: String,
    pub theory_pole: f64,
    pub theory_width: f64,
    /// measured − theory (G)
    pub pole_difference: Option<f64>,
    /// |ΔB|measured − |ΔB|theory (G)
    pub width_difference: Option<f64>,
    /// |ΔB|measured / |ΔB|theory
    pub width_ratio: Option<f64>,
    /// |pole difference| exceeds the theory uncertainty
    pub tension: bool,
}

pub fn compare_to_theory(m: &Measurement, catalog: &ResonanceCatalog) -> Result<TheoryComparison> {
    let th = catalog.get(&m.label, Provenance::Theory)?;
    let pole_difference = m.pole.map(|b| b - th.pole);
    let tw = th.width.abs();
    Ok(TheoryComparison {
        label: m.label.clone(),
        theory_pole: th.pole,
        theory_width: tw,
        pole_difference,
        width_difference: m.width.map(|w| w - tw),
        width_ratio: m.width.map(|w| w / tw),
        tension: pole_difference.is_some_and(|d| d.abs() > THEORY_POLE_UNCERTAINTY),
    })
}
