//! Probe-atom measurement of the cavity mode.
//!
//! A probe enters in the lower level, interacts resonantly with the mode for
//! a time `tau`, receives a classical pulse of area `f * dt = pi/4` that rotates
//! the atomic basis by the quadrature phase `phi`, and is then detected. The
//! two detector outcomes act on the field through the Kraus operators
//!
//! ```text
//! K00 = (C - e^{-i phi} a S) / sqrt(2)     (lower level)
//! K10 = (C + e^{-i phi} a S) / sqrt(2)     (upper level, a "click")
//! ```
//!
//! with `C = cos(lt sqrt(n))` and `S = sin(lt sqrt(n)) / sqrt(n)`, `lt = lambda * tau`.
//! Both operators are upper bidiagonal in the Fock basis, which is what makes
//! long trajectories cheap.

mod enumerate;
mod gamma;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, CMatrix, DensityMatrix, FieldOperator, C64, DEGENERATE_TRACE};

pub use enumerate::{enumerate_integrated_probability, enumerate_with_cap, path_probability, DEFAULT_ENUMERATION_CAP};
pub use gamma::{first_click_probability, gamma_approx, gamma_factor, gamma_series, GammaMode, GAMMA_SERIES_TOLERANCE};

/// Pulse area `f * dt` of the basis rotation applied after the cavity.
pub const BASIS_ROTATION_ANGLE: f64 = FRAC_PI_4;

/// Detector outcome for one probe atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    /// Atom found in the lower working level (bit 0).
    Lower,
    /// Atom found in the upper working level (bit 1, a click).
    Upper,
}

impl Outcome {
    pub fn bit(self) -> u8 {
        match self {
            Outcome::Lower => 0,
            Outcome::Upper => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Outcome::Lower
        } else {
            Outcome::Upper
        }
    }

    fn sign(self) -> f64 {
        match self {
            Outcome::Lower => -1.0,
            Outcome::Upper => 1.0,
        }
    }
}

/// Coupling and phase settings of one probe-atom passage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionParams {
    /// Dimensionless interaction strength `lambda * tau`.
    pub lambda_tau: f64,
    /// Quadrature phase set by the basis-rotation pulse.
    pub phi: f64,
    /// Phase of the coherent amplitude; only used by coherent-input formulas.
    pub coherent_phase: f64,
    /// Fock-space truncation.
    pub dim: usize,
}

impl InteractionParams {
    pub fn new(lambda_tau: f64, phi: f64, dim: usize) -> Result<Self> {
        if !(lambda_tau > 0.0) || !lambda_tau.is_finite() {
            return Err(Error::invalid(format!("lambda_tau must be positive, got {lambda_tau}")));
        }
        if dim < 2 {
            return Err(Error::Dimension(dim));
        }
        if !phi.is_finite() {
            return Err(Error::invalid("phi must be finite"));
        }
        Ok(Self {
            lambda_tau,
            phi,
            coherent_phase: 0.0,
            dim,
        })
    }

    pub fn with_coherent_phase(mut self, coherent_phase: f64) -> Self {
        self.coherent_phase = coherent_phase;
        self
    }

    /// `Phi - phi`.
    pub fn phase_offset(&self) -> f64 {
        self.coherent_phase - self.phi
    }

    /// `sin(lt sqrt(n)) / sqrt(n)`, continued by its limit `lt` at `n = 0`.
    pub fn sinc_weight(&self, n: usize) -> f64 {
        if n == 0 {
            self.lambda_tau
        } else {
            let r = (n as f64).sqrt();
            (self.lambda_tau * r).sin() / r
        }
    }
}

/// Upper-bidiagonal data shared by both Kraus operators:
/// `K = (diag(c) + sign * superdiag(u)) / sqrt(2)`. The `1/sqrt(2)` is kept
/// out of the stored entries and applied as a factor `1/2` on quadratic
/// quantities, so the vacuum click probability comes out as exactly `0.5`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Ladder {
    diag: Vec<f64>,
    upper: Vec<C64>,
}

impl Ladder {
    fn new(params: &InteractionParams) -> Self {
        let lt = params.lambda_tau;
        let rot = C64::from_polar(1.0, -params.phi);
        let diag = (0..params.dim).map(|n| (lt * (n as f64).sqrt()).cos()).collect();
        // (a S)_{j, j+1} = sqrt(j+1) S(j+1) = sin(lt sqrt(j+1))
        let upper = (0..params.dim - 1)
            .map(|j| rot * (lt * ((j + 1) as f64).sqrt()).sin())
            .collect();
        Self { diag, upper }
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `sqrt(2) K psi`.
    pub(crate) fn apply_unscaled(&self, outcome: Outcome, psi: &[C64], out: &mut [C64]) {
        let sign = outcome.sign();
        let d = self.dim();
        for j in 0..d - 1 {
            out[j] = psi[j] * self.diag[j] + self.upper[j] * psi[j + 1] * sign;
        }
        out[d - 1] = psi[d - 1] * self.diag[d - 1];
    }

    fn sandwich(&self, outcome: Outcome, rho: &CMatrix) -> CMatrix {
        let sign = outcome.sign();
        let d = self.dim();
        let zero = C64::new(0.0, 0.0);
        CMatrix::from_fn(d, d, |i, j| {
            let ui = if i + 1 < d { self.upper[i] * sign } else { zero };
            let uj = if j + 1 < d { self.upper[j].conj() * sign } else { zero };
            let mut z = rho[(i, j)] * (self.diag[i] * self.diag[j]);
            if j + 1 < d {
                z += rho[(i, j + 1)] * uj * self.diag[i];
            }
            if i + 1 < d {
                z += ui * rho[(i + 1, j)] * self.diag[j];
                if j + 1 < d {
                    z += ui * rho[(i + 1, j + 1)] * uj;
                }
            }
            z * 0.5
        })
    }

    fn branch_trace(&self, outcome: Outcome, rho: &CMatrix) -> f64 {
        let sign = outcome.sign();
        let d = self.dim();
        let mut p = 0.0;
        for i in 0..d {
            let di = self.diag[i];
            p += di * di * rho[(i, i)].re;
            if i + 1 < d {
                let u = self.upper[i];
                p += 2.0 * sign * di * (u * rho[(i + 1, i)]).re;
                p += u.norm_sqr() * rho[(i + 1, i + 1)].re;
            }
        }
        0.5 * p
    }
}

/// The two conditional measurement operators `K00`, `K10`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausPair {
    k00: FieldOperator,
    k10: FieldOperator,
    params: InteractionParams,
    ladder: Option<Ladder>,
}

impl KrausPair {
    pub fn params(&self) -> &InteractionParams {
        &self.params
    }

    pub(crate) fn ladder(&self) -> Option<&Ladder> {
        self.ladder.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn k00(&self) -> &FieldOperator {
        &self.k00
    }

    pub fn k10(&self) -> &FieldOperator {
        &self.k10
    }

    pub fn operator(&self, outcome: Outcome) -> &FieldOperator {
        match outcome {
            Outcome::Lower => &self.k00,
            Outcome::Upper => &self.k10,
        }
    }

    /// POVM element `K^dagger K` of an outcome.
    pub fn povm_element(&self, outcome: Outcome) -> CMatrix {
        let k = self.operator(outcome).matrix();
        k.adjoint() * k
    }

    /// `max |K00^dagger K00 + K10^dagger K10 - I|`.
    pub fn completeness_defect(&self) -> f64 {
        let sum = self.povm_element(Outcome::Lower) + self.povm_element(Outcome::Upper);
        fock::max_abs_diff(&sum, &CMatrix::identity(self.dim(), self.dim()))
    }

    /// Unnormalized conditional state `K rho K^dagger`.
    pub fn sandwich(&self, outcome: Outcome, rho: &CMatrix) -> CMatrix {
        match &self.ladder {
            Some(l) => l.sandwich(outcome, rho),
            None => {
                let k = self.operator(outcome).matrix();
                k * rho * k.adjoint()
            }
        }
    }

    /// `Tr(K rho K^dagger)` without forming the conditional state.
    pub fn branch_probability(&self, outcome: Outcome, rho: &CMatrix) -> f64 {
        match &self.ladder {
            Some(l) => l.branch_trace(outcome, rho),
            None => self.sandwich(outcome, rho).trace().re,
        }
    }

    /// Writes `K psi` into `out` (both of length `dim`).
    pub fn apply(&self, outcome: Outcome, psi: &[C64], out: &mut [C64]) {
        match &self.ladder {
            Some(l) => {
                l.apply_unscaled(outcome, psi, out);
                for o in out.iter_mut() {
                    *o *= FRAC_1_SQRT_2;
                }
            }
            None => {
                let k = self.operator(outcome).matrix();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..psi.len()).map(|j| k[(i, j)] * psi[j]).sum();
                }
            }
        }
    }
}

/// Kraus operators in closed form.
pub fn build_kraus(params: InteractionParams) -> KrausPair {
    let dim = params.dim;
    let c = fock::number_function(dim, |n| (params.lambda_tau * (n as f64).sqrt()).cos());
    let s = fock::number_function(dim, |n| params.sinc_weight(n));
    let a_s = (&fock::annihilation(dim) * &s).matrix() * C64::from_polar(1.0, -params.phi);
    let k00 = (c.matrix() - &a_s) * C64::new(FRAC_1_SQRT_2, 0.0);
    let k10 = (c.matrix() + &a_s) * C64::new(FRAC_1_SQRT_2, 0.0);
    KrausPair {
        k00: FieldOperator::from_matrix(k00).expect("square by construction"),
        k10: FieldOperator::from_matrix(k10).expect("square by construction"),
        params,
        ladder: Some(Ladder::new(&params)),
    }
}

/// Kraus operators extracted from the joint atom-field evolution `U_a U_af`.
///
/// `U_af = exp(-i V_af tau)` is assembled from the resonant 2x2 blocks
/// `{|0, n+1>, |1, n>}`, each a rotation by `lt sqrt(n+1)`; `|0, 0>` is
/// invariant and `|1, D-1>` (whose partner lies outside the truncation) is
/// left fixed, which does not affect atoms entering in the lower level.
/// `U_a = exp(-i V_a dt)` is the pi/4 basis rotation carrying the phase `phi`.
/// The joint basis index is `atom * D + n`. The result agrees with
/// [`build_kraus`] up to an outcome-dependent global phase.
pub fn kraus_from_unitaries(params: InteractionParams) -> KrausPair {
    let d = params.dim;
    let lt = params.lambda_tau;
    let zero = C64::new(0.0, 0.0);
    let minus_i = C64::new(0.0, -1.0);

    let mut u_af = CMatrix::zeros(2 * d, 2 * d);
    u_af[(0, 0)] = C64::new(1.0, 0.0);
    u_af[(d + d - 1, d + d - 1)] = C64::new(1.0, 0.0);
    for n in 0..d - 1 {
        let theta = lt * ((n + 1) as f64).sqrt();
        let (lower, upper) = (n + 1, d + n);
        u_af[(lower, lower)] = C64::new(theta.cos(), 0.0);
        u_af[(upper, upper)] = C64::new(theta.cos(), 0.0);
        u_af[(lower, upper)] = minus_i * theta.sin();
        u_af[(upper, lower)] = minus_i * theta.sin();
    }

    let (c, s) = (BASIS_ROTATION_ANGLE.cos(), BASIS_ROTATION_ANGLE.sin());
    let atom = [
        [C64::new(c, 0.0), minus_i * s * C64::from_polar(1.0, -params.phi)],
        [minus_i * s * C64::from_polar(1.0, params.phi), C64::new(c, 0.0)],
    ];
    let mut u_a = CMatrix::from_element(2 * d, 2 * d, zero);
    for (r, row) in atom.iter().enumerate() {
        for (col, &v) in row.iter().enumerate() {
            for n in 0..d {
                u_a[(r * d + n, col * d + n)] = v;
            }
        }
    }

    let joint = u_a * u_af;
    let k00 = joint.view((0, 0), (d, d)).into_owned();
    let k10 = joint.view((d, 0), (d, d)).into_owned();
    KrausPair {
        k00: FieldOperator::from_matrix(k00).expect("square by construction"),
        k10: FieldOperator::from_matrix(k10).expect("square by construction"),
        params,
        ladder: None,
    }
}

/// A-priori probabilities `(p0, p1)` of the next probe's outcomes.
pub fn detection_probabilities(rho: &DensityMatrix, kp: &KrausPair) -> (f64, f64) {
    let p0 = kp.branch_probability(Outcome::Lower, rho.matrix());
    let p1 = kp.branch_probability(Outcome::Upper, rho.matrix());
    (p0, p1)
}

/// Conditional state after `outcome`, with the probability of that outcome.
pub fn reduce(rho: &DensityMatrix, outcome: Outcome, kp: &KrausPair) -> Result<(DensityMatrix, f64)> {
    if rho.dim() != kp.dim() {
        return Err(Error::DimensionMismatch {
            expected: kp.dim(),
            got: rho.dim(),
        });
    }
    let sigma = kp.sandwich(outcome, rho.matrix());
    let probability = sigma.trace().re;
    if !(probability > DEGENERATE_TRACE) {
        return Err(Error::ImpossibleOutcome { outcome, probability });
    }
    Ok((fock::renormalize(sigma)?, probability))
}
