use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cqed_tomo::protocol::{rerun, run_command, Angle, CommandKind, ExperimentConfig, StateSpec};
use cqed_tomo::{Error, Result};

#[derive(Parser)]
#[command(
    version,
    about = "Quadrature tomography of a cavity mode from probe-atom click statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "CQED_TOMO_OUT", default_value = "out")]
    out: PathBuf,
    /// Comma-separated quadrature phases, e.g. "-3pi/4,0,pi/2".
    #[arg(long, global = true, allow_hyphen_values = true)]
    phases: Option<String>,
    /// State spec: vacuum | fock:<k> | coherent:<abs>@<angle> | mixed:<w>*<spec>+...
    #[arg(long, global = true)]
    state: Option<String>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Calibrate manifest (or its directory) for tomogram and trajectories.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// First-click probability against |beta| (closed form and matrix).
    FirstClick,
    /// Per-atom click probability tracks.
    Trajectories,
    /// Fit mu on a coherent state at beta_max.
    Calibrate,
    /// Reconstruct the quadrature distribution of the configured state.
    Tomogram,
    /// Instrumental variance against the number of atoms.
    Sweep,
    /// Exact enumeration against Monte Carlo for a few atoms.
    OracleCheck,
    /// Re-execute a run from its manifest and compare checksums.
    Rerun { manifest: PathBuf },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.sampling.seed = seed;
    }
    if let Some(list) = &c.phases {
        cfg.interaction.phases = list.split(',').map(str::parse::<Angle>).collect::<Result<_>>()?;
    }
    if let Some(s) = &c.state {
        cfg.state.spec = s.parse::<StateSpec>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<bool> {
    let c = &cli.common;
    let kind = match &cli.command {
        Command::Rerun { manifest } => return report_rerun(manifest, &c.out),
        Command::FirstClick => CommandKind::FirstClick,
        Command::Trajectories => CommandKind::Trajectories,
        Command::Calibrate => CommandKind::Calibrate,
        Command::Tomogram => CommandKind::Tomogram,
        Command::Sweep => CommandKind::Sweep,
        Command::OracleCheck => CommandKind::OracleCheck,
    };
    let cfg = load_config(c)?;
    let manifest = run_command(kind, &cfg, &c.out, c.calibration.as_deref())?;
    for o in &manifest.outputs {
        println!("wrote {}", c.out.join(&o.file).display());
    }
    println!("wrote {}", c.out.join(kind.manifest_file()).display());
    if kind == CommandKind::Calibrate {
        let fit: cqed_tomo::calibration::CalibrationResult =
            serde_json::from_value(manifest.resolved["calibration"].clone())?;
        println!(
            "mu = {}  nu = {:.6}  sigma = {:.4}  sigma_s = {:.4}  D = {:.5} (bound {:.5})",
            fit.mu, fit.nu, fit.sigma, fit.sigma_s, fit.ks_statistic, fit.ks_bound
        );
        if let Err(e) = fit.require_accepted() {
            eprintln!("error: {e}");
        }
    }
    for f in manifest.flags.iter().filter(|f| !f.passed) {
        eprintln!("flag failed: {}", f.name);
    }
    Ok(manifest.passed())
}

fn report_rerun(manifest: &Path, out: &Path) -> Result<bool> {
    let report = rerun(manifest, out)?;
    for (file, _, new) in &report.files {
        let same = report
            .files
            .iter()
            .any(|(f, a, b)| f == file && b.as_deref() == Some(a.as_str()));
        println!(
            "{} {file}",
            if same {
                "identical"
            } else if new.is_some() {
                "DIFFERS  "
            } else {
                "MISSING  "
            }
        );
    }
    Ok(report.identical())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::MissingCalibration(_)) {
                eprintln!("run `cqed-tomo calibrate` first or set calibration.mu in the configuration");
            }
            ExitCode::from(2)
        }
    }
}
