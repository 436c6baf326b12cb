use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{coherent_state, default_dim, fock_state, DensityMatrix, StateVector, C64};
use crate::tomography::{coherent_quadrature_mean, coherent_quadrature_pdf, fock_quadrature_pdf};
use crate::trajectory::InitialState;

use super::angle::Angle;

/// Cavity state description.
///
/// ```text
/// vacuum
/// fock:<k>
/// coherent:<|beta|>[@<angle>]
/// mixed:<w>*<pure spec>+<w>*<pure spec>+...
/// ```
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    Vacuum,
    Fock(usize),
    Coherent { beta_abs: f64, phase: f64 },
    Mixed(Vec<(f64, StateSpec)>),
}

impl StateSpec {
    /// Dimension large enough for every component.
    pub fn default_dim(&self) -> usize {
        match self {
            StateSpec::Vacuum => 2,
            StateSpec::Fock(k) => (k + 1).max(2),
            StateSpec::Coherent { beta_abs, .. } => default_dim(*beta_abs),
            StateSpec::Mixed(parts) => parts.iter().map(|(_, s)| s.default_dim()).max().unwrap_or(2),
        }
    }

    fn pure(&self, dim: usize) -> Result<StateVector> {
        match self {
            StateSpec::Vacuum => fock_state(0, dim),
            StateSpec::Fock(k) => fock_state(*k, dim),
            StateSpec::Coherent { beta_abs, phase } => coherent_state(C64::from_polar(*beta_abs, *phase), dim),
            StateSpec::Mixed(_) => Err(Error::Config("mixtures cannot be nested".into())),
        }
    }

    pub fn prepare(&self, dim: usize) -> Result<InitialState> {
        match self {
            StateSpec::Mixed(parts) => {
                let comps = parts
                    .iter()
                    .map(|(w, s)| Ok((*w, s.pure(dim)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(InitialState::Mixed(DensityMatrix::mixture(&comps)?))
            }
            pure => Ok(InitialState::Pure(pure.pure(dim)?)),
        }
    }

    /// Quadrature density at phase `phi`.
    pub fn quadrature_pdf(&self, chi: f64, phi: f64) -> f64 {
        match self {
            StateSpec::Vacuum => fock_quadrature_pdf(0, chi),
            StateSpec::Fock(k) => fock_quadrature_pdf(*k, chi),
            StateSpec::Coherent { beta_abs, phase } => coherent_quadrature_pdf(chi, *beta_abs, *phase, phi),
            StateSpec::Mixed(parts) => {
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                parts.iter().map(|(w, s)| w * s.quadrature_pdf(chi, phi)).sum::<f64>() / total
            }
        }
    }

    /// Interval outside which the quadrature density is negligible.
    pub fn quadrature_extent(&self, phi: f64) -> (f64, f64) {
        match self {
            StateSpec::Vacuum => (-6.0, 6.0),
            StateSpec::Fock(k) => {
                let r = (2.0 * *k as f64 + 1.0).sqrt() + 6.0;
                (-r, r)
            }
            StateSpec::Coherent { beta_abs, phase } => {
                let c = coherent_quadrature_mean(*beta_abs, *phase, phi);
                (c - 6.0, c + 6.0)
            }
            StateSpec::Mixed(parts) => parts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, s)| {
                let (lo, hi) = s.quadrature_extent(phi);
                (a.min(lo), b.max(hi))
            }),
        }
    }

    /// Quadrature mean at phase `phi`.
    pub fn quadrature_mean(&self, phi: f64) -> f64 {
        match self {
            StateSpec::Vacuum | StateSpec::Fock(_) => 0.0,
            StateSpec::Coherent { beta_abs, phase } => coherent_quadrature_mean(*beta_abs, *phase, phi),
            StateSpec::Mixed(parts) => {
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                parts.iter().map(|(w, s)| w * s.quadrature_mean(phi)).sum::<f64>() / total
            }
        }
    }
}

fn parse_pure(s: &str) -> Result<StateSpec> {
    let bad = |what: &str| Error::Config(format!("bad state spec {s:?}: {what}"));
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    match kind.trim() {
        "vacuum" if arg.is_empty() => Ok(StateSpec::Vacuum),
        "fock" => arg
            .trim()
            .parse()
            .map(StateSpec::Fock)
            .map_err(|_| bad("photon number")),
        "coherent" => {
            let (a, p) = arg.split_once('@').unwrap_or((arg, "0"));
            let beta_abs: f64 = a.trim().parse().map_err(|_| bad("amplitude"))?;
            if !(beta_abs >= 0.0) {
                return Err(bad("amplitude must be nonnegative"));
            }
            let phase = p.parse::<Angle>()?.radians();
            Ok(StateSpec::Coherent { beta_abs, phase })
        }
        _ => Err(bad("expected vacuum, fock:<k>, coherent:<abs>@<angle> or mixed:...")),
    }
}

impl FromStr for StateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let Some(body) = s.strip_prefix("mixed:") else {
            return parse_pure(s);
        };
        let parts = body
            .split('+')
            .map(|part| {
                let (w, spec) = part
                    .split_once('*')
                    .ok_or_else(|| Error::Config(format!("mixture term {part:?} needs the form <w>*<spec>")))?;
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad mixture weight {w:?}")))?;
                if !(w > 0.0) {
                    return Err(Error::Config(format!("mixture weight {w} must be positive")));
                }
                Ok((w, parse_pure(spec)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StateSpec::Mixed(parts))
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Vacuum => write!(f, "vacuum"),
            StateSpec::Fock(k) => write!(f, "fock:{k}"),
            StateSpec::Coherent { beta_abs, phase } => write!(f, "coherent:{beta_abs}@{phase}"),
            StateSpec::Mixed(parts) => {
                write!(f, "mixed:")?;
                for (i, (w, s)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{w}*{s}")?;
                }
                Ok(())
            }
        }
    }
}

impl Serialize for StateSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StateSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
