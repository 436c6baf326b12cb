//! The protocol commands. Each writes its data files and a
//! `<command>.manifest.json` into the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::calibration::{
    binomial_pmf, calibration_samples, fit_mu, kolmogorov_bound, ks_statistic, p_bar, sigma_s, sigma_s_sweep,
    BinomialCdf, ClickCdf, ModelPoint,
};
use crate::error::{Error, Result};
use crate::fock::{coherent_state, default_dim, DensityMatrix, C64};
use crate::measurement::{
    build_kraus, detection_probabilities, enumerate_integrated_probability, first_click_probability, GammaMode,
    InteractionParams, KrausPair,
};
use crate::tomography::{
    convolve, deconvolve, histogram_density, CdfOnGrid, DensityOnGrid, Grid, QuadratureSampleSet, KERNEL_MARGIN,
};
use crate::trajectory::{probability_tracks, run_ensemble, RunConfig};

use super::config::ExperimentConfig;
use super::manifest::{fmt_real, sha256_file, write_csv, CalibrationSource, CommandKind, Recorder, RunManifest};
use super::state::StateSpec;

/// Largest closed-form vs matrix deviation accepted by `first-click`.
pub const FIRST_CLICK_TOLERANCE: f64 = 2e-4;
/// Per-bin Monte Carlo tolerance of `oracle-check`, in standard errors.
pub const ORACLE_STANDARD_ERRORS: f64 = 3.0;

fn kraus(cfg: &ExperimentConfig, phi: f64, dim: usize) -> Result<KrausPair> {
    Ok(build_kraus(InteractionParams::new(
        cfg.interaction.lambda_tau,
        phi,
        dim,
    )?))
}

fn r(x: f64) -> String {
    fmt_real(x)
}

/// `p1` against `|beta|` for each `Phi - phi` offset: closed form with the Γ
/// series next to the matrix value.
pub fn first_click(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut rec = Recorder::new(out)?;
    let condition = cfg.condition_product();
    let beta_max = cfg.calibration.beta_max;
    let dim = cfg.state.dim.unwrap_or_else(|| default_dim(beta_max));
    let phi = cfg.phases()[0];
    let kp = kraus(cfg, phi, dim)?;
    let points = cfg.figures.beta_points;
    let mut rows = Vec::new();
    let mut max_dev: f64 = 0.0;
    for offset in &cfg.figures.phase_offsets {
        for i in 0..points {
            let b = beta_max * i as f64 / (points - 1) as f64;
            let beta = C64::from_polar(b, phi + offset.radians());
            let closed = first_click_probability(beta, kp.params(), GammaMode::Series);
            let rho = DensityMatrix::from_pure(&coherent_state(beta, dim)?);
            let matrix = detection_probabilities(&rho, &kp).1;
            max_dev = max_dev.max((closed - matrix).abs());
            rows.push(vec![r(b), r(offset.radians()), r(closed), r(matrix)]);
        }
    }
    write_csv(
        &mut rec,
        "first_click.csv",
        &["beta_abs", "Phi_minus_phi", "p1_closed_form", "p1_matrix"],
        rows,
    )?;
    rec.flag("closed_form_matches_matrix", max_dev < FIRST_CLICK_TOLERANCE);
    rec.lap("first-click");
    let resolved = json!({ "dim": dim, "phi": phi, "max_deviation": max_dev, "condition_product": condition });
    rec.finish(CommandKind::FirstClick, cfg, resolved, vec![], None)
}

/// Locates and reads the calibration used by `tomogram` and `trajectories`.
///
/// `path` may be a calibrate manifest or the directory holding one. Without
/// a path, a `mu` in the configuration is used.
pub fn resolve_calibration(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<Option<CalibrationSource>> {
    if let Some(p) = path {
        let file = if p.is_dir() {
            p.join(CommandKind::Calibrate.manifest_file())
        } else {
            p.to_path_buf()
        };
        if !file.is_file() {
            return Err(Error::MissingCalibration(file));
        }
        let manifest = RunManifest::load(&file)?;
        if manifest.command != CommandKind::Calibrate {
            return Err(Error::Config(format!("{} is not a calibrate manifest", file.display())));
        }
        let result: crate::calibration::CalibrationResult =
            serde_json::from_value(manifest.resolved["calibration"].clone())?;
        if result.atoms != cfg.sampling.atoms {
            return Err(Error::Config(format!(
                "calibration was made with n = {} atoms, this run uses n = {}",
                result.atoms, cfg.sampling.atoms
            )));
        }
        return Ok(Some(CalibrationSource::Manifest {
            sha256: sha256_file(&file)?,
            path: file,
            result,
        }));
    }
    match cfg.calibration.mu {
        Some(mu) => Ok(Some(CalibrationSource::Override {
            mu,
            model: cfg.calibration_input().evaluate(mu)?,
        })),
        None => Ok(None),
    }
}

/// Stochastic `p1` tracks for each configured phase, plus the `p_bar`
/// reference line when a calibration is available and the state is coherent.
pub fn trajectories(cfg: &ExperimentConfig, out: &Path, calibration: Option<&Path>) -> Result<RunManifest> {
    let source = resolve_calibration(cfg, calibration)?;
    trajectories_with(cfg, out, source)
}

fn trajectories_with(cfg: &ExperimentConfig, out: &Path, source: Option<CalibrationSource>) -> Result<RunManifest> {
    cfg.validate()?;
    let mut rec = Recorder::new(out)?;
    let dim = cfg.state_dim();
    let initial = cfg.state.spec.prepare(dim)?;
    let n = cfg.sampling.atoms;
    let seeds: Vec<u64> = (0..cfg.figures.tracks as u64)
        .map(|i| cfg.sampling.seed.wrapping_add(i))
        .collect();
    let mut rows = Vec::new();
    let mut refs = Vec::new();
    let mut means = Vec::new();
    for phi in cfg.phases() {
        let kp = kraus(cfg, phi, dim)?;
        let tracks = probability_tracks(&initial, &kp, n, &seeds)?;
        let mut total = 0.0;
        for (t, track) in tracks.iter().enumerate() {
            for (k, p1) in track.iter().enumerate() {
                total += p1;
                rows.push(vec![r(phi), t.to_string(), (k + 1).to_string(), r(*p1)]);
            }
        }
        means.push(json!({ "phi": phi, "mean_p1": total / (n * tracks.len()).max(1) as f64 }));
        if let (Some(src), StateSpec::Coherent { beta_abs, phase }) = (&source, &cfg.state.spec) {
            let model = src.model();
            let pb = p_bar(
                *beta_abs,
                *phase,
                phi,
                cfg.interaction.lambda_tau,
                model.mu,
                cfg.calibration.gamma_mode,
            )?;
            refs.push(vec![r(phi), r(phase - phi), r(model.mu), r(pb)]);
        }
    }
    write_csv(&mut rec, "trajectories.csv", &["phi", "trajectory_id", "k", "p1"], rows)?;
    if !refs.is_empty() {
        write_csv(
            &mut rec,
            "trajectories_reference.csv",
            &["phi", "Phi_minus_phi", "mu", "p_bar"],
            refs,
        )?;
    }
    rec.lap("trajectories");
    let resolved = json!({ "dim": dim, "track_means": means });
    rec.finish(CommandKind::Trajectories, cfg, resolved, seeds, source)
}

/// Simulates the calibration state and fits `mu`.
pub fn calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut rec = Recorder::new(out)?;
    let condition = cfg.condition_product();
    let input = cfg.calibration_input();
    let dim = default_dim(input.beta_max);
    let seed = cfg.sampling.seed;
    let clicks = calibration_samples(&input, Some(dim), seed)?;
    rec.lap("simulation");
    let fit = fit_mu(&clicks, &input)?;
    rec.lap("fit");

    write_csv(
        &mut rec,
        "calibration_clicks.csv",
        &["run", "m"],
        clicks
            .iter()
            .enumerate()
            .map(|(i, m)| vec![i.to_string(), m.to_string()]),
    )?;
    let sample = ClickCdf::new(&clicks, input.atoms)?;
    let theory = BinomialCdf::new(input.atoms, fit.p_bar);
    write_csv(
        &mut rec,
        "calibration_cdf.csv",
        &["x", "sample_cdf", "theory_cdf", "ks_bound"],
        (0..=input.atoms).map(|m| {
            let x = m as f64;
            vec![m.to_string(), r(sample.eval(x)), r(theory.eval(x)), r(fit.ks_bound)]
        }),
    )?;
    let mut scan = Vec::new();
    for mu in input.mu_grid.points() {
        if let Ok(point) = input.evaluate(mu) {
            scan.push(vec![
                r(mu),
                r(ks_statistic(&clicks, input.atoms, point.p_bar)?),
                r(fit.ks_bound),
            ]);
        }
    }
    write_csv(
        &mut rec,
        "calibration_scan.csv",
        &["mu", "ks_statistic", "ks_bound"],
        scan,
    )?;
    rec.write_json("calibration.json", &fit)?;
    rec.flag("kolmogorov_accepted", fit.accepted);
    rec.lap("output");
    let resolved = json!({ "calibration": fit, "dim": dim, "condition_product": condition });
    rec.finish(CommandKind::Calibrate, cfg, resolved, vec![seed], None)
}

/// Per-phase summary written to `tomogram.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phi: f64,
    pub seed: u64,
    pub chi_mean: f64,
    pub chi_variance: f64,
    pub expected_mean: f64,
    pub sigma: f64,
    pub sigma_s: f64,
    pub ks_lattice: f64,
    pub ks_naive: f64,
    pub ks_bound: f64,
    pub accepted: bool,
    pub smoothing_bandwidth: f64,
    pub deconvolution_l2_error: f64,
}

/// Grid for the theoretical density of `spec` at `phi`, wide enough for
/// convolution with variance `sigma_s`.
pub fn theory_grid(spec: &StateSpec, phi: f64, sigma_s: f64, h: f64) -> Result<Grid> {
    let (lo, hi) = spec.quadrature_extent(phi);
    let margin = KERNEL_MARGIN * sigma_s.sqrt() + 1.0;
    Grid::covering(lo - margin, hi + margin, h)
}

/// Theoretical CDF of `P * Spr` for `spec` at `phi`.
pub fn theory_cdf(
    spec: &StateSpec,
    phi: f64,
    sigma_s: f64,
    h: f64,
) -> Result<(DensityOnGrid, DensityOnGrid, CdfOnGrid)> {
    let grid = theory_grid(spec, phi, sigma_s, h)?;
    let truth = DensityOnGrid::from_fn(grid, |x| spec.quadrature_pdf(x, phi));
    let conv = convolve(&truth, sigma_s)?;
    let cdf = CdfOnGrid::from_density(&conv);
    Ok((truth, conv, cdf))
}

/// Full reconstruction for the configured state at every phase. Needs a
/// calibration (manifest path or `mu` in the configuration).
pub fn tomogram(cfg: &ExperimentConfig, out: &Path, calibration: Option<&Path>) -> Result<RunManifest> {
    let source = resolve_calibration(cfg, calibration)?.ok_or_else(|| {
        Error::MissingCalibration(calibration.map_or_else(
            || PathBuf::from(CommandKind::Calibrate.manifest_file()),
            Path::to_path_buf,
        ))
    })?;
    tomogram_with(cfg, out, source)
}

fn tomogram_with(cfg: &ExperimentConfig, out: &Path, source: CalibrationSource) -> Result<RunManifest> {
    cfg.validate()?;
    let mut rec = Recorder::new(out)?;
    let model = source.model();
    let s_s = sigma_s(model.sigma)?;
    let dim = cfg.state_dim();
    let spec = &cfg.state.spec;
    let initial = spec.prepare(dim)?;
    let n = cfg.sampling.atoms;
    let dec = &cfg.deconvolution;
    let bound = kolmogorov_bound(cfg.calibration.alpha, cfg.sampling.runs);
    let mut seeds = Vec::new();
    let mut summaries = Vec::new();
    for (i, phi) in cfg.phases().into_iter().enumerate() {
        let seed = cfg.sampling.seed.wrapping_add(i as u64);
        seeds.push(seed);
        let kp = kraus(cfg, phi, dim)?;
        let clicks = run_ensemble(&initial, &kp, &RunConfig::new(n, cfg.sampling.runs, seed)?)?.clicks;
        rec.lap(&format!("simulation phase {i}"));

        let set = QuadratureSampleSet::from_clicks(&clicks, n, model.nu, phi, spec.to_string())?;
        let (truth, conv, cdf) = theory_cdf(spec, phi, s_s, dec.h)?;
        let ks_lattice = set.ks_lattice(|x| cdf.eval(x));
        let ks_naive = set.ks_naive(|x| cdf.eval(x));

        let bandwidth = dec.h.max(set.lattice_step());
        let blur = (s_s + bandwidth * bandwidth).sqrt();
        let lo_chi = set.chi_values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi_chi = set.chi_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hist_grid = Grid::covering(dec.lo.min(lo_chi - 4.0 * blur), dec.hi.max(hi_chi + 4.0 * blur), dec.h)?;
        let hist = histogram_density(&set.chi_values, hist_grid, bandwidth)?;
        // the smoothing pass is Gaussian too, so it is removed together with Spr
        let estimate = deconvolve(&hist, s_s + bandwidth * bandwidth, dec.epsilon)?;
        let reference = DensityOnGrid::from_fn(hist_grid, |x| spec.quadrature_pdf(x, phi));
        let l2 = estimate.l2_relative_error(&reference)?;
        rec.lap(&format!("reconstruction phase {i}"));

        write_csv(
            &mut rec,
            &format!("tomogram_{i}_chi.csv"),
            &["run", "m", "chi"],
            clicks
                .iter()
                .zip(&set.chi_values)
                .enumerate()
                .map(|(k, (m, chi))| vec![k.to_string(), m.to_string(), r(*chi)]),
        )?;
        let e = set.empirical_cdf();
        let d = set.lattice_step();
        write_csv(
            &mut rec,
            &format!("tomogram_{i}_cdf.csv"),
            &["m", "chi", "sample_cdf", "theory_cdf", "ks_bound"],
            (0..=n).map(|m| {
                let x = (2.0 * m as f64 - n as f64) / (n as f64 * model.nu);
                vec![
                    m.to_string(),
                    r(x),
                    r(e.eval(x + 1e-9 * d)),
                    r(cdf.eval(x + 0.5 * d)),
                    r(bound),
                ]
            }),
        )?;
        write_csv(
            &mut rec,
            &format!("tomogram_{i}_theory.csv"),
            &["chi", "pdf", "convolved_pdf", "convolved_cdf"],
            (0..truth.grid.len).map(|k| {
                vec![
                    r(truth.grid.x(k)),
                    r(truth.values[k]),
                    r(conv.values[k]),
                    r(cdf.values[k]),
                ]
            }),
        )?;
        write_csv(
            &mut rec,
            &format!("tomogram_{i}_density.csv"),
            &["chi", "histogram", "deconvolved", "pdf"],
            (0..hist_grid.len).map(|k| {
                vec![
                    r(hist_grid.x(k)),
                    r(hist.values[k]),
                    r(estimate.values[k]),
                    r(reference.values[k]),
                ]
            }),
        )?;
        let accepted = ks_lattice < bound;
        rec.flag(format!("kolmogorov_band[phi={phi}]"), accepted);
        summaries.push(PhaseSummary {
            phi,
            seed,
            chi_mean: set.mean(),
            chi_variance: set.variance(),
            expected_mean: spec.quadrature_mean(phi),
            sigma: model.sigma,
            sigma_s: s_s,
            ks_lattice,
            ks_naive,
            ks_bound: bound,
            accepted,
            smoothing_bandwidth: bandwidth,
            deconvolution_l2_error: l2,
        });
    }
    rec.write_json("tomogram.json", &summaries)?;
    let resolved = json!({ "dim": dim, "model": model, "phases": summaries });
    rec.finish(CommandKind::Tomogram, cfg, resolved, seeds, Some(source))
}

/// `sigma_s` against `n`, median `mu` over `sweep.seeds` seeds per `n`.
pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut rec = Recorder::new(out)?;
    let input = cfg.calibration_input();
    let dim = default_dim(input.beta_max);
    let seeds: Vec<u64> = (0..cfg.sweep.seeds as u64)
        .map(|j| cfg.sampling.seed.wrapping_add(j))
        .collect();
    let rows = sigma_s_sweep(&input, &cfg.sweep.atoms, &seeds, Some(dim))?;
    rec.lap("sweep");
    write_csv(
        &mut rec,
        "sweep.csv",
        &["n", "mu", "nu", "sigma", "sigma_s", "accepted_fraction", "flagged"],
        rows.iter().map(|row| {
            vec![
                row.atoms.to_string(),
                r(row.mu),
                r(row.nu),
                r(row.sigma),
                r(row.sigma_s),
                r(row.accepted_fraction),
                row.flagged.to_string(),
            ]
        }),
    )?;
    let resolved = json!({ "dim": dim, "rows": rows });
    rec.finish(CommandKind::Sweep, cfg, resolved, seeds, None)
}

/// Report written by `oracle-check`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub atoms: usize,
    pub runs: usize,
    pub enumeration: Vec<f64>,
    pub monte_carlo: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub binomial: Vec<f64>,
    pub enumeration_sum: f64,
    pub max_standard_errors: f64,
    pub binomial_sup_distance: f64,
    pub first_click_probability: f64,
}

/// Compares exact enumeration, Monte Carlo and the binomial approximation
/// for the configured state.
pub fn oracle_check(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut rec = Recorder::new(out)?;
    let dim = cfg.state_dim();
    let initial = cfg.state.spec.prepare(dim)?;
    let phi = cfg.phases()[0];
    let kp = kraus(cfg, phi, dim)?;
    let n = cfg.figures.enumeration_atoms;
    let runs = cfg.figures.oracle_runs;
    let seed = cfg.sampling.seed;
    let rho0 = initial.density_matrix();
    let report = oracle_report(&initial, &rho0, &kp, n, runs, seed)?;
    rec.lap("oracle");
    write_csv(
        &mut rec,
        "oracle.csv",
        &["m", "enumeration", "monte_carlo", "standard_error", "binomial"],
        (0..=n).map(|m| {
            vec![
                m.to_string(),
                r(report.enumeration[m]),
                r(report.monte_carlo[m]),
                r(report.standard_errors[m]),
                r(report.binomial[m]),
            ]
        }),
    )?;
    rec.write_json("oracle.json", &report)?;
    rec.flag("enumeration_normalized", (report.enumeration_sum - 1.0).abs() < 1e-9);
    rec.flag(
        "monte_carlo_within_3se",
        report.max_standard_errors <= ORACLE_STANDARD_ERRORS,
    );
    let resolved = json!({ "dim": dim, "phi": phi });
    rec.finish(CommandKind::OracleCheck, cfg, resolved, vec![seed], None)
}

/// Enumeration, Monte Carlo and binomial click distributions side by side.
pub fn oracle_report(
    initial: &crate::trajectory::InitialState,
    rho0: &DensityMatrix,
    kp: &KrausPair,
    n: usize,
    runs: usize,
    seed: u64,
) -> Result<OracleReport> {
    let enumeration = enumerate_integrated_probability(rho0, kp, n)?;
    let monte_carlo = run_ensemble(initial, kp, &RunConfig::new(n, runs, seed)?)?.click_frequencies(n);
    let standard_errors: Vec<f64> = enumeration
        .iter()
        .map(|p| (p * (1.0 - p) / runs as f64).sqrt())
        .collect();
    let max_standard_errors = enumeration
        .iter()
        .zip(&monte_carlo)
        .zip(&standard_errors)
        .map(|((p, f), se)| {
            let d = (p - f).abs();
            if *se > 0.0 {
                d / se
            } else if d > 1e-12 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let p1 = detection_probabilities(rho0, kp).1;
    let binomial = binomial_pmf(n, p1);
    let binomial_sup_distance = binomial
        .iter()
        .zip(&enumeration)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(OracleReport {
        atoms: n,
        runs,
        enumeration_sum: enumeration.iter().sum(),
        enumeration,
        monte_carlo,
        standard_errors,
        binomial,
        max_standard_errors,
        binomial_sup_distance,
        first_click_probability: p1,
    })
}

/// Dispatches a command by kind.
pub fn run_command(
    kind: CommandKind,
    cfg: &ExperimentConfig,
    out: &Path,
    calibration: Option<&Path>,
) -> Result<RunManifest> {
    match kind {
        CommandKind::FirstClick => first_click(cfg, out),
        CommandKind::Trajectories => trajectories(cfg, out, calibration),
        CommandKind::Calibrate => calibrate(cfg, out),
        CommandKind::Tomogram => tomogram(cfg, out, calibration),
        CommandKind::Sweep => sweep(cfg, out),
        CommandKind::OracleCheck => oracle_check(cfg, out),
    }
}

/// Outcome of re-executing a manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerunReport {
    pub command: CommandKind,
    /// `(file, recorded checksum, new checksum)`.
    pub files: Vec<(String, String, Option<String>)>,
}

impl RerunReport {
    pub fn identical(&self) -> bool {
        self.files.iter().all(|(_, a, b)| b.as_deref() == Some(a.as_str()))
    }
}

/// Re-executes the run described by a manifest into `out` and compares the
/// checksums of every output. Calibrations are taken from the manifest, not
/// from disk.
pub fn rerun(manifest_path: &Path, out: &Path) -> Result<RerunReport> {
    let old = RunManifest::load(manifest_path)?;
    let cfg = &old.config;
    let new = match old.command {
        CommandKind::Tomogram => {
            let source = old
                .calibration
                .clone()
                .ok_or_else(|| Error::MissingCalibration(manifest_path.to_path_buf()))?;
            tomogram_with(cfg, out, source)?
        }
        CommandKind::Trajectories => trajectories_with(cfg, out, old.calibration.clone())?,
        kind => run_command(kind, cfg, out, None)?,
    };
    let files = old
        .outputs
        .iter()
        .map(|o| {
            (
                o.file.clone(),
                o.sha256.clone(),
                new.output(&o.file).map(|n| n.sha256.clone()),
            )
        })
        .collect();
    Ok(RerunReport {
        command: old.command,
        files,
    })
}

/// Model quantities for a fixed `mu` at the configured settings.
pub fn model_for(cfg: &ExperimentConfig, mu: f64) -> Result<ModelPoint> {
    cfg.calibration_input().evaluate(mu)
}
