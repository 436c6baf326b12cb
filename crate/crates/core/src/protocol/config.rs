//! Experiment configuration.
//!
//! TOML with the sections below; every key is optional and defaults to the
//! `lambda_tau = 0.04`, `n = 300`, `|beta| = 3`, `phi = -3pi/4`,
//! `Phi = pi/4` calibration setting. Angles are numbers or strings such as
//! `"-3pi/4"`.
//!
//! ```toml
//! [state]
//! spec = "coherent:3@pi/4"   # vacuum | fock:<k> | coherent:<abs>@<angle> | mixed:<w>*<spec>+...
//! # dim = 40                 # truncation override
//!
//! [interaction]
//! lambda_tau = 0.04
//! phases = ["-3pi/4"]        # quadrature phases phi
//!
//! [sampling]
//! atoms = 300                # n
//! runs = 1000                # N
//! seed = 1
//!
//! [calibration]
//! beta_max = 3.0
//! coherent_phase = "pi/4"
//! alpha = 0.95
//! gamma_mode = "unity"       # unity | series | approx
//! mu_grid = { lo = -1.0, hi = 1.0, step = 0.01 }
//! # mu = 0.36                # skip the fit and use this value
//!
//! [deconvolution]
//! lo = -6.0
//! hi = 6.0
//! h = 0.05
//! epsilon = 1e-4
//!
//! [sweep]
//! atoms = [300, 400, 500, 600, 700, 800, 900, 1000]
//! seeds = 5
//!
//! [figures]
//! beta_points = 31
//! phase_offsets = ["0", "pi/4", "pi/2", "3pi/4", "pi"]   # Phi - phi
//! tracks = 5
//! enumeration_atoms = 5
//! oracle_runs = 100000
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationInput, MuGrid};
use crate::error::{Error, Result};
use crate::measurement::GammaMode;

use super::angle::Angle;
use super::state::StateSpec;

/// `beta_max * lambda_tau` at or above which the linear response is unreliable.
pub const CONDITION_LIMIT: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateSection {
    pub spec: StateSpec,
    pub dim: Option<usize>,
}

impl Default for StateSection {
    fn default() -> Self {
        Self {
            spec: StateSpec::Coherent {
                beta_abs: 3.0,
                phase: std::f64::consts::FRAC_PI_4,
            },
            dim: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteractionSection {
    pub lambda_tau: f64,
    pub phases: Vec<Angle>,
}

impl Default for InteractionSection {
    fn default() -> Self {
        Self {
            lambda_tau: 0.04,
            phases: vec![Angle(-3.0 * std::f64::consts::FRAC_PI_4)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub atoms: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            atoms: 300,
            runs: 1000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub beta_max: f64,
    pub coherent_phase: Angle,
    pub alpha: f64,
    pub gamma_mode: GammaMode,
    pub mu_grid: MuGrid,
    pub mu: Option<f64>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            beta_max: 3.0,
            coherent_phase: Angle(std::f64::consts::FRAC_PI_4),
            alpha: 0.95,
            gamma_mode: GammaMode::Unity,
            mu_grid: MuGrid::default(),
            mu: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeconvolutionSection {
    pub lo: f64,
    pub hi: f64,
    pub h: f64,
    pub epsilon: f64,
}

impl Default for DeconvolutionSection {
    fn default() -> Self {
        Self {
            lo: -6.0,
            hi: 6.0,
            h: 0.05,
            epsilon: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub atoms: Vec<usize>,
    pub seeds: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            atoms: (3..=10).map(|k| k * 100).collect(),
            seeds: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiguresSection {
    pub beta_points: usize,
    pub phase_offsets: Vec<Angle>,
    pub tracks: usize,
    pub enumeration_atoms: usize,
    pub oracle_runs: usize,
}

impl Default for FiguresSection {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            beta_points: 31,
            phase_offsets: [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|f| Angle(f * PI)).collect(),
            tracks: 5,
            enumeration_atoms: 5,
            oracle_runs: 100_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub state: StateSection,
    pub interaction: InteractionSection,
    pub sampling: SamplingSection,
    pub calibration: CalibrationSection,
    pub deconvolution: DeconvolutionSection,
    pub sweep: SweepSection,
    pub figures: FiguresSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.interaction.lambda_tau > 0.0) {
            return fail(format!(
                "lambda_tau must be positive, got {}",
                self.interaction.lambda_tau
            ));
        }
        if self.interaction.phases.is_empty() {
            return fail("at least one phase is required".into());
        }
        if self.sampling.atoms == 0 || self.sampling.runs == 0 {
            return fail("atoms and runs must be positive".into());
        }
        if let Some(d) = self.state.dim {
            if d < 2 {
                return fail(format!("dim must be at least 2, got {d}"));
            }
        }
        if let Some(mu) = self.calibration.mu {
            if !(-1.0..=1.0).contains(&mu) {
                return fail(format!("mu = {mu} outside [-1, 1]"));
            }
        }
        let d = &self.deconvolution;
        if !(d.h > 0.0 && d.hi > d.lo && d.epsilon > 0.0) {
            return fail("deconvolution needs h > 0, hi > lo and epsilon > 0".into());
        }
        if self.sweep.seeds == 0 {
            return fail("sweep.seeds must be positive".into());
        }
        if self.figures.beta_points < 2 {
            return fail("figures.beta_points must be at least 2".into());
        }
        self.calibration_input().validate()
    }

    /// `beta_max * lambda_tau`; logged as a warning when not small.
    pub fn condition_product(&self) -> f64 {
        let c = self.calibration.beta_max * self.interaction.lambda_tau;
        if c >= CONDITION_LIMIT {
            log::warn!("beta_max * lambda_tau = {c:.3} >= {CONDITION_LIMIT}; choose a shorter interaction time");
        }
        c
    }

    pub fn phases(&self) -> Vec<f64> {
        self.interaction.phases.iter().map(|a| a.radians()).collect()
    }

    /// Calibration run parameters; the quadrature phase is the first configured phase.
    pub fn calibration_input(&self) -> CalibrationInput {
        let c = &self.calibration;
        CalibrationInput {
            lambda_tau: self.interaction.lambda_tau,
            beta_max: c.beta_max,
            coherent_phase: c.coherent_phase.radians(),
            phi: self.interaction.phases.first().map_or(0.0, |a| a.radians()),
            atoms: self.sampling.atoms,
            runs: self.sampling.runs,
            alpha: c.alpha,
            gamma_mode: c.gamma_mode,
            mu_grid: c.mu_grid,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state.dim.unwrap_or_else(|| self.state.spec.default_dim())
    }
}
