use std::f64::consts::{LN_2, TAU};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use narrowfesh_core::association::{
    lz_curve, lz_exponent, lz_rate_scale, simulate_noisy_sweep, RampSchedule,
};
use narrowfesh_core::dataset::{read_dips, read_sweep, DIPS_HEADER};
use narrowfesh_core::inference::{
    compare_to_theory, fit_pole_with, fit_width_with, DipObservation, FitOptions, Measurement,
    PoleFitOptions, SweepDataset, TheoryComparison,
};
use narrowfesh_core::lattice::{
    gravity_tilt, mean_oscillator_length, onsite_interaction, predict_dips, recoil_frequency,
    tunneling_j, Axis, DipChannel, LatticeConfig,
};
use narrowfesh_core::spectroscopy::{synthesize_spectrum, GradientBroadening, SpectrumConfig};
use narrowfesh_core::{
    load_catalog, scattering_length, Constants, Error, NoiseModel, Provenance, ResonanceCatalog,
    ResonanceSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::output::{gauss, gauss_pm, Cell, Report};
use crate::ranges::parse_values;
use crate::{
    CatalogArgs, Cli, Command, CompareArgs, DipsArgs, Failure, FitPoleArgs, FitWidthArgs,
    HubbardArgs, LatticeArgs, LzCurveArgs, NoiseArgs, ResonanceArgs, SpectrumSimArgs, SweepSimArgs,
};

const DEFAULT_DEPTH: f64 = 20.0;
const READOUT_STREAM: u64 = u64::MAX - 1;

type Outcome<T> = Result<T, Failure>;

pub fn run(cli: &Cli) -> Outcome<()> {
    let catalog = || load_catalog_for(cli);
    let report = match &cli.command {
        Command::Catalog(a) => {
            let catalog = catalog()?;
            if a.export {
                return emit(cli, catalog.to_text().into_bytes());
            }
            catalog_report(a, &catalog)
        }
        Command::Hubbard(a) => hubbard(a, &catalog()?)?,
        Command::LzCurve(a) => lz(a, &catalog()?)?,
        Command::SweepSim(a) => sweep_sim(a, &catalog()?)?,
        Command::Dips(a) => dips(a, &catalog()?)?,
        Command::SpectrumSim(a) => spectrum_sim(a, &catalog()?)?,
        Command::FitWidth(a) => fit_width_cmd(a, &catalog()?)?,
        Command::FitPole(a) => fit_pole_cmd(a, &catalog()?)?,
        Command::Compare(a) => compare(a, &catalog()?)?,
    };
    let bytes = report.render(cli.format).map_err(Failure::Data)?;
    emit(cli, bytes)?;
    report.print_summary();
    Ok(())
}

fn emit(cli: &Cli, bytes: Vec<u8>) -> Outcome<()> {
    match &cli.output {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| Failure::Data(format!("cannot write to stdout: {e}"))),
    }
}

fn read_input(path: &Path) -> Outcome<Vec<u8>> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Failure::Data(format!("cannot read stdin: {e}")))?;
        return Ok(buf);
    }
    fs::read(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

fn load_catalog_for(cli: &Cli) -> Outcome<ResonanceCatalog> {
    match &cli.catalog {
        None => Ok(ResonanceCatalog::bundled()),
        Some(path) => {
            let text = String::from_utf8(read_input(path)?)
                .map_err(|_| Failure::Data(format!("{} is not UTF-8", path.display())))?;
            load_catalog(&text)
                .map_err(|e| Failure::Data(format!("catalog {}: {e}", path.display())))
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn values(flag: &str, spec: &str) -> Outcome<Vec<f64>> {
    parse_values(spec).map_err(|e| usage(format!("--{flag}: {e}")))
}

fn parse_depths(text: &str) -> Option<[f64; 3]> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse().ok())
        .collect::<Option<_>>()?;
    match v[..] {
        [d] => Some([d; 3]),
        [x, y, z] => Some([x, y, z]),
        _ => None,
    }
}

fn lattice(args: &LatticeArgs, fallback: Option<&str>) -> Outcome<LatticeConfig> {
    let depth = match (&args.depth, &args.depths, fallback) {
        (Some(d), _, _) => [*d; 3],
        (None, Some(text), _) => {
            parse_depths(text).ok_or_else(|| usage("--depths expects x,y,z"))?
        }
        (None, None, Some(text)) => parse_depths(text)
            .ok_or_else(|| Failure::Data(format!("cannot parse recorded depth {text:?}")))?,
        (None, None, None) => [DEFAULT_DEPTH; 3],
    };
    Ok(
        LatticeConfig::new(depth, args.wavelength_nm / 1e9, Constants::cesium133())?
            .levitated(args.levitated),
    )
}

fn depth_text(cfg: &LatticeConfig) -> String {
    let [x, y, z] = cfg.depth;
    if x == y && y == z {
        x.to_string()
    } else {
        format!("{x},{y},{z}")
    }
}

fn resonance(args: &ResonanceArgs, catalog: &ResonanceCatalog) -> Outcome<ResonanceSpec> {
    let label = args
        .resonance
        .as_deref()
        .ok_or_else(|| usage("--resonance is required"))?;
    let mut res = match (
        catalog.get(label, args.provenance),
        args.pole,
        args.width,
        args.abg,
    ) {
        (Ok(r), _, _, _) => r.clone(),
        (Err(_), Some(pole), Some(width), Some(abg)) => {
            ResonanceSpec::new(label, pole, width, abg, args.provenance)?
        }
        (Err(e), _, _, _) => return Err(e.into()),
    };
    if let Some(p) = args.pole {
        res = res.with_pole(p);
    }
    if let Some(w) = args.width {
        res = res.with_width(w);
    }
    if let Some(a) = args.abg {
        res = res.with_abg(a);
    }
    res.validate()?;
    Ok(res)
}

fn echo_resonance(r: &mut Report, res: &ResonanceSpec) {
    r.meta("label", &res.label)
        .meta("provenance", res.provenance)
        .meta("pole", res.pole)
        .meta("width", res.width)
        .meta("abg", res.abg);
    if res.abg_estimated {
        r.meta("abg_estimated", true);
    }
}

fn echo_lattice(r: &mut Report, cfg: &LatticeConfig) {
    r.meta("depth", depth_text(cfg))
        .meta("wavelength_nm", (cfg.wavelength * 1e15).round() / 1e6)
        .meta("levitated", cfg.levitated);
}

fn noise_model(args: &NoiseArgs) -> Outcome<NoiseModel> {
    let components = NoiseModel::parse_components(&args.noise)?;
    Ok(NoiseModel::new(components, args.resolution, args.seed)?)
}

fn echo_noise(r: &mut Report, noise: &NoiseModel) {
    r.meta("seed", noise.seed)
        .meta("noise", noise.components_to_string())
        .meta("resolution", noise.step_resolution);
}

fn header(command: &str) -> Vec<(String, String)> {
    vec![
        ("command".into(), command.into()),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
    ]
}

fn catalog_report(args: &CatalogArgs, catalog: &ResonanceCatalog) -> Report {
    let mut r = Report::new(&[
        "label",
        "provenance",
        "B0_G",
        "dB_G",
        "abg_a0",
        "abg_estimated",
    ]);
    r.metadata = header("catalog");
    for e in catalog.entries() {
        if args.provenance.is_some_and(|p| p != e.provenance) {
            continue;
        }
        r.row(vec![
            e.label.as_str().into(),
            e.provenance.as_str().into(),
            e.pole.into(),
            e.width.into(),
            e.abg.into(),
            e.abg_estimated.into(),
        ]);
    }
    r.note(format!("{} entries", r.rows.len()));
    r
}

fn hubbard(args: &HubbardArgs, catalog: &ResonanceCatalog) -> Outcome<Report> {
    let cfg = lattice(&args.lattice, None)?;
    let h = cfg.constants.planck_h;
    let u_per_bohr = onsite_interaction(&cfg, 1.0) / h;
    let tilt = gravity_tilt(&cfg) / h;
    let j = tunneling_j(&cfg, Axis::Z).ok().map(|j| j / h);

    if let Some(grid) = &args.grid {
        let res = resonance(&args.resonance, catalog)?;
        let fields = values("grid", grid)?;
        let mut r = Report::new(&["B_G", "a_s_a0", "U_Hz", "tilt_Hz", "J_Hz"]);
        r.metadata = header("hubbard");
        echo_resonance(&mut r, &res);
        echo_lattice(&mut r, &cfg);
        for b in fields {
            let row = match scattering_length(b, &res) {
                Ok(a) => vec![b.into(), a.into(), (a * u_per_bohr).into()],
                Err(_) => vec![b.into(), Cell::Empty, Cell::Empty],
            };
            r.row([row, vec![tilt.into(), j.into()]].concat());
        }
        return Ok(r);
    }

    let a_s = match (args.a_s, &args.resonance.resonance) {
        (Some(a), _) => Some(a),
        (None, Some(_)) => Some(resonance(&args.resonance, catalog)?.abg),
        (None, None) => None,
    };
    let mut r = Report::new(&[
        "recoil_Hz",
        "tilt_Hz",
        "J_x_Hz",
        "J_y_Hz",
        "J_z_Hz",
        "a_ho_nm",
        "U_per_a0_Hz",
        "a_s_a0",
        "U_Hz",
    ]);
    r.metadata = header("hubbard");
    echo_lattice(&mut r, &cfg);
    let jx = tunneling_j(&cfg, Axis::X).ok().map(|j| j / h);
    let jy = tunneling_j(&cfg, Axis::Y).ok().map(|j| j / h);
    r.row(vec![
        recoil_frequency(&cfg).into(),
        tilt.into(),
        jx.into(),
        jy.into(),
        j.into(),
        (mean_oscillator_length(&cfg) * 1e9).into(),
        u_per_bohr.into(),
        a_s.into(),
        a_s.map(|a| a * u_per_bohr).into(),
    ]);
    r.note(format!(
        "E_R/h = {:.1} Hz, tilt/h = {:.1} Hz, U/h = {:.3} Hz per a0",
        recoil_frequency(&cfg),
        tilt,
        u_per_bohr
    ));
    if j.is_none() {
        r.note("tunneling omitted: depth below the deep-lattice range");
    }
    Ok(r)
}

fn half_conversion_rate(res: &ResonanceSpec, cfg: &LatticeConfig) -> f64 {
    TAU * lz_rate_scale(res, cfg) / LN_2
}

fn auto_rates(res: &ResonanceSpec, cfg: &LatticeConfig, n: usize) -> Vec<f64> {
    let half = half_conversion_rate(res, cfg);
    let (lo, hi) = (half / 100.0, half * 100.0);
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn lz(args: &LzCurveArgs, catalog: &ResonanceCatalog) -> Outcome<Report> {
    let res = resonance(&args.resonance, catalog)?;
    let cfg = lattice(&args.lattice, None)?;
    let rates = match &args.rates {
        Some(spec) => values("rates", spec)?,
        None => auto_rates(&res, &cfg, 41),
    };
    let curve = lz_curve(&res, &cfg, &rates, args.p0)?;
    let mut r = Report::new(&["rate_G_per_s", "survival", "lz_exponent"]);
    r.metadata = header("lz-curve");
    echo_resonance(&mut r, &res);
    echo_lattice(&mut r, &cfg);
    r.meta("rates", args.rates.as_deref().unwrap_or("auto"))
        .meta("p0", args.p0);
    for (rate, p) in curve {
        r.row(vec![
            rate.into(),
            p.into(),
            lz_exponent(&res, &cfg, rate)?.into(),
        ]);
    }
    r.note(format!(
        "{}: half conversion at {:.4} G/s",
        res.label,
        half_conversion_rate(&res, &cfg)
    ));
    Ok(r)
}

fn sweep_sim(args: &SweepSimArgs, catalog: &ResonanceCatalog) -> Outcome<Report> {
    let res = resonance(&args.resonance, catalog)?;
    let cfg = lattice(&args.lattice, None)?;
    let noise = noise_model(&args.noise)?;
    let rates = match &args.rates {
        Some(spec) => values("rates", spec)?,
        None => auto_rates(&res, &cfg, 25),
    };
    if !(args.readout_noise.is_finite() && args.readout_noise >= 0.0) {
        return Err(usage("--readout-noise must be >= 0"));
    }
    let readout =
        Normal::new(0.0, args.readout_noise).map_err(|e| usage(format!("--readout-noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(READOUT_STREAM);

    let mut r = Report::new(&["rate_G_per_s", "n_rel", "sigma"]);
    r.metadata = header("sweep-sim");
    echo_resonance(&mut r, &res);
    echo_lattice(&mut r, &cfg);
    echo_noise(&mut r, &noise);
    r.meta("rates", args.rates.as_deref().unwrap_or("auto"))
        .meta("p0", args.p0)
        .meta("trials", args.trials)
        .meta("readout_noise", args.readout_noise)
        .meta("half_span", args.half_span);

    let mut multi = 0;
    for rate in rates {
        let ramp = RampSchedule::downward_across(res.pole, args.half_span, rate)?;
        let out = simulate_noisy_sweep(&res, &cfg, &ramp, &noise, args.p0, args.trials)?;
        multi += out.multi_crossing;
        let se = out.survival_std / (out.trials as f64).sqrt();
        let sigma = args.readout_noise.hypot(se);
        let n_rel = out.survival_mean + readout.sample(&mut rng);
        let sigma = if sigma > 0.0 { sigma } else { 1e-6 };
        r.row(vec![rate.abs().into(), n_rel.into(), sigma.into()]);
    }
    r.note(format!(
        "{}: {} rates x {} trials, seed {}, noise {}",
        res.label,
        r.rows.len(),
        args.trials,
        noise.seed,
        noise.components_to_string()
    ));
    if multi > 0 {
        r.note(format!("{multi} trials crossed the pole more than once"));
    }
    Ok(r)
}

fn dips(args: &DipsArgs, catalog: &ResonanceCatalog) -> Outcome<Report> {
    let res = resonance(&args.resonance, catalog)?;
    let cfg = lattice(&args.lattice, None)?;
    let pred = predict_dips(&res, &cfg, args.resolution)?;
    let mut r = Report::new(&DIPS_HEADER);
    r.metadata = header("dips");
    echo_resonance(&mut r, &res);
    echo_lattice(&mut r, &cfg);
    r.meta("resolution", args.resolution);
    use DipChannel::*;
    for (a, b) in [(Plus, Minus), (Minus, Zero), (Plus, Zero)] {
        r.meta(
            &format!("merged_{}_{}", a.as_str(), b.as_str()),
            pred.merged(a, b),
        );
    }
    r.meta("resolvable", pred.resolvable);
    for (i, f) in pred.features().iter().enumerate() {
        let names: Vec<&str> = f.channels.iter().map(|c| c.as_str()).collect();
        r.meta(
            &format!("feature_{i}"),
            format!("{} {}", f.center, names.join("+")),
        );
        r.note(format!(
            "{:>10.6} G  ({:+.2} mG from the pole)  {}",
            f.center,
            (f.center - res.pole) * 1e3,
            names.join("+")
        ));
    }
    for (channel, b) in pred.dips() {
        r.row(vec![
            b.into(),
            args.resolution.into(),
            channel.as_str().into(),
        ]);
    }
    Ok(r)
}

fn spectrum_sim(args: &SpectrumSimArgs, catalog: &ResonanceCatalog) -> Outcome<Report> {
    let res = resonance(&args.resonance, catalog)?;
    let cfg = lattice(&args.lattice, None)?;
    let mut sc = SpectrumConfig::new(res.clone(), cfg)?;
    sc.noise = noise_model(&args.noise)?;
    sc.hold_time = args.hold;
    sc.peak_loss_rate = args.gamma;
    sc.initial_atoms = args.atoms;
    if let Some(w) = args.dip_width {
        sc.dip_width = w;
    }
    if let Some(um) = args.cloud_size_um {
        sc.gradient_broadening = Some(GradientBroadening {
            gradient: args.gradient,
            cloud_size: um * 1e-4,
        });
    }
    sc.validate()?;
    let grid = match &args.grid {
        Some(spec) => values("grid", spec)?,
        None => {
            let pred = predict_dips(&res, &sc.lattice, sc.resolution())?;
            let fields: Vec<f64> = pred.dips().iter().map(|d| d.1).collect();
            let lo = fields.iter().copied().fold(res.pole, f64::min) - 0.02;
            let hi = fields.iter().copied().fold(res.pole, f64::max) + 0.02;
            (0..401)
                .map(|i| lo + (hi - lo) * i as f64 / 400.0)
                .collect()
        }
    };
    if !(args.atom_noise.is_finite() && args.atom_noise >= 0.0) {
        return Err(usage("--atom-noise must be >= 0"));
    }
    let spectrum = synthesize_spectrum(&sc, &grid)?;
    let shot = Normal::new(0.0, args.atom_noise).map_err(|e| usage(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.noise.seed);
    rng.set_stream(READOUT_STREAM);

    let mut r = Report::new(&["B_G", "n_atoms"]);
    r.metadata = header("spectrum-sim");
    echo_resonance(&mut r, &res);
    echo_lattice(&mut r, &sc.lattice);
    echo_noise(&mut r, &sc.noise);
    let m = &spectrum.metadata;
    r.meta("grid", args.grid.as_deref().unwrap_or("auto"))
        .meta("hold_time", m.hold_time)
        .meta("peak_loss_rate", m.peak_loss_rate)
        .meta("dip_width", m.dip_width)
        .meta("initial_atoms", m.initial_atoms)
        .meta("atom_noise", args.atom_noise);
    if let Some(g) = m.gradient_broadening {
        r.meta("gradient", g.gradient)
            .meta("cloud_size_um", g.cloud_size * 1e4);
    }
    for &(b, n) in &spectrum.points {
        let n = if args.atom_noise > 0.0 {
            (n * (1.0 + shot.sample(&mut rng))).max(0.0)
        } else {
            n
        };
        r.row(vec![b.into(), n.into()]);
    }
    let (b_min, _) = spectrum.deepest();
    r.note(format!(
        "{}: max loss {:.2}% at {:.6} G (hold {} s, gamma {} /s)",
        res.label,
        100.0 * spectrum.max_loss_fraction(),
        b_min,
        m.hold_time,
        m.peak_loss_rate
    ));
    Ok(r)
}

fn band_text(band: [f64; 2]) -> String {
    format!("{}–{} μG", band[0] * 1e6, band[1] * 1e6)
}

fn fit_width_cmd(args: &FitWidthArgs, catalog: &ResonanceCatalog) -> Outcome<Report> {
    let bytes = read_input(&args.input)?;
    let (meta, points) = read_sweep(bytes.as_slice())?;
    let recorded = |key: &str| meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let recorded_num = |key: &str| -> Outcome<Option<f64>> {
        recorded(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Failure::Data(format!("cannot parse recorded {key} {v:?}")))
            })
            .transpose()
    };
    let entry = match &args.resonance.resonance {
        Some(label) => Some(catalog.get(label, args.resonance.provenance)?.clone()),
        None => None,
    };
    let abg = match (args.resonance.abg, &entry) {
        (Some(a), _) => a,
        (None, Some(e)) => e.abg,
        (None, None) => recorded_num("abg")?
            .ok_or_else(|| usage("--abg is required (or --resonance, or abg in the file)"))?,
    };
    let pole = match (args.resonance.pole, &entry) {
        (Some(p), _) => Some(p),
        (None, Some(e)) => Some(e.pole),
        (None, None) => recorded_num("pole")?,
    };
    let label = entry
        .as_ref()
        .map(|e| e.label.clone())
        .or_else(|| recorded("label").map(str::to_string));
    let cfg = lattice(&args.lattice, recorded("depth"))?;
    let data = SweepDataset {
        points,
        lattice: cfg,
        resonance_abg: abg,
        resonance_pole: pole,
    };
    let opts = FitOptions {
        max_iterations: args.max_iterations,
        strict: !args.no_strict,
        ..FitOptions::default()
    };
    let fit = fit_width_with(&data, &opts)?;

    let mut r = Report::new(&[
        "width_G",
        "width_sigma_G",
        "p0",
        "p0_sigma",
        "reduced_chi2",
        "converged",
        "iterations",
    ]);
    r.metadata = header("fit-width");
    r.meta("input", args.input.display());
    if let Some(l) = &label {
        r.meta("label", l);
    }
    r.meta("abg", abg);
    if let Some(p) = pole {
        r.meta("pole", p);
    }
    echo_lattice(&mut r, &cfg);
    if let Some(band) = fit.systematic_band {
        r.meta("systematic_band", band_text(band));
    }
    r.row(vec![
        fit.width.into(),
        fit.width_sigma.into(),
        fit.p0.into(),
        fit.p0_sigma.into(),
        fit.reduced_chi2.into(),
        fit.converged.into(),
        fit.iterations.into(),
    ]);
    let mut line = format!(
        "{}ΔB = {}, p0 = {:.3} ± {:.3}, reduced chi2 = {:.2}",
        label.map(|l| format!("{l}: ")).unwrap_or_default(),
        gauss_pm(fit.width, fit.width_sigma),
        fit.p0,
        fit.p0_sigma,
        fit.reduced_chi2
    );
    if let Some(band) = fit.systematic_band {
        line.push_str(&format!(" (systematic band {})", band_text(band)));
    }
    r.note(line);
    if !fit.converged {
        r.note(format!(
            "warning: not converged after {} iterations",
            fit.iterations
        ));
    }
    Ok(r)
}

fn parse_dip_list(spec: &str) -> Outcome<Vec<DipObservation>> {
    spec.split(',')
        .map(|item| {
            let parts: Vec<&str> = item.trim().split(':').collect();
            if parts.is_empty() || parts.len() > 3 {
                return Err(usage(format!(
                    "--dips: expected B[:sigma[:channel]], got {item:?}"
                )));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("--dips: cannot parse {s:?}")))
            };
            let sigma = match parts.get(1).map(|s| s.trim()) {
                None | Some("") => None,
                Some(s) => Some(num(s)?),
            };
            let channel = match parts.get(2).map(|s| s.trim()) {
                None | Some("") => None,
                Some(c) => Some(c.parse::<DipChannel>().map_err(|e| usage(e.to_string()))?),
            };
            Ok(DipObservation {
                field: num(parts[0])?,
                sigma,
                channel,
            })
        })
        .collect()
}

fn fit_pole_cmd(args: &FitPoleArgs, catalog: &ResonanceCatalog) -> Outcome<Report> {
    let observed = match (&args.dips, &args.input) {
        (Some(spec), _) => parse_dip_list(spec)?,
        (None, Some(path)) => read_dips(read_input(path)?.as_slice())?,
        (None, None) => return Err(usage("give dips with --dips or --in")),
    };
    let entry = match &args.resonance.resonance {
        Some(label) => Some(catalog.get(label, args.resonance.provenance)?.clone()),
        None => None,
    };
    let width = args
        .resonance
        .width
        .or(entry.as_ref().map(|e| e.width))
        .ok_or_else(|| usage("--width is required (or --resonance)"))?;
    let abg = args
        .resonance
        .abg
        .or(entry.as_ref().map(|e| e.abg))
        .ok_or_else(|| usage("--abg is required (or --resonance)"))?;
    let cfg = lattice(&args.lattice, None)?;
    let opts = PoleFitOptions {
        resolution: args.resolution,
        ..PoleFitOptions::default()
    };
    let fit = fit_pole_with(&observed, width, abg, &cfg, &opts)?;

    let mut r = Report::new(&["dip_G", "channels", "predicted_G", "residual_G"]);
    r.metadata = header("fit-pole");
    if let Some(e) = &entry {
        r.meta("label", &e.label);
    }
    r.meta("width", width).meta("abg", abg);
    echo_lattice(&mut r, &cfg);
    r.meta("resolution", args.resolution)
        .meta("pole_G", fit.pole)
        .meta("pole_sigma_G", fit.pole_sigma)
        .meta("chi2", fit.chi2);
    for d in &fit.residuals {
        let names: Vec<&str> = d.channels.iter().map(|c| c.as_str()).collect();
        r.row(vec![
            d.field.into(),
            names.join("+").into(),
            d.predicted.into(),
            d.residual.into(),
        ]);
    }
    r.note(format!(
        "B0 = {:.4} ± {:.4} G from {} dips (chi2 {:.2})",
        fit.pole,
        fit.pole_sigma,
        observed.len(),
        fit.chi2
    ));
    Ok(r)
}

fn compare(args: &CompareArgs, catalog: &ResonanceCatalog) -> Outcome<Report> {
    let measurements: Vec<Measurement> = if args.all {
        catalog
            .iter(Provenance::Experiment)
            .filter(|e| catalog.get(&e.label, Provenance::Theory).is_ok())
            .map(Measurement::from)
            .collect()
    } else {
        let label = args
            .label
            .clone()
            .ok_or_else(|| usage("--label is required"))?;
        if args.b0.is_none() && args.width.is_none() {
            return Err(usage("give --b0 and/or --width"));
        }
        vec![Measurement {
            label,
            pole: args.b0,
            width: args.width.map(f64::abs),
        }]
    };
    let rows: Vec<(Measurement, TheoryComparison)> = measurements
        .into_iter()
        .map(|m| compare_to_theory(&m, catalog).map(|c| (m, c)))
        .collect::<Result<_, Error>>()?;

    let mut r = Report::new(&[
        "label",
        "B0_measured_G",
        "B0_theory_G",
        "delta_B0_G",
        "width_measured_G",
        "width_theory_G",
        "width_ratio",
        "tension",
    ]);
    r.metadata = header("compare");
    r.meta(
        "theory_pole_uncertainty_G",
        narrowfesh_core::inference::THEORY_POLE_UNCERTAINTY,
    );
    let mut tensions = Vec::new();
    for (m, c) in &rows {
        if c.tension {
            tensions.push(c.label.clone());
        }
        r.row(vec![
            c.label.as_str().into(),
            m.pole.into(),
            c.theory_pole.into(),
            c.pole_difference.into(),
            m.width.into(),
            c.theory_width.into(),
            c.width_ratio.into(),
            c.tension.into(),
        ]);
        r.note(format!(
            "{:>6}  ΔB0 = {}  width ratio = {}",
            c.label,
            c.pole_difference.map(gauss).unwrap_or_else(|| "-".into()),
            c.width_ratio
                .map(|x| format!("{x:.3}"))
                .unwrap_or_else(|| "-".into()),
        ));
    }
    if tensions.is_empty() {
        r.note("no pole differences beyond the theory uncertainty");
    } else {
        r.note(format!(
            "beyond the theory uncertainty: {}",
            tensions.join(", ")
        ));
    }
    Ok(r)
}
