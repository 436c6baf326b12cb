//! Truncated Fock-space states and operators for a single cavity mode.
//!
//! Everything here works in the number basis `|0>, |1>, ..., |D-1>` with a
//! fixed dimension `D >= 2`. States and operators are plain value types;
//! nothing mutates after construction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Poisson tail weight tolerated outside the truncated space.
pub const TRUNCATION_TOLERANCE: f64 = 1e-10;

/// Trace below which a state is considered annihilated.
pub const DEGENERATE_TRACE: f64 = 1e-14;

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::Dimension(dim));
    }
    Ok(())
}

/// Poisson weight `sum_{k >= dim} e^{-x} x^k / k!` with `x = |beta|^2` that a
/// coherent state loses when cut off at `dim`.
pub fn coherent_tail_weight(beta_abs: f64, dim: usize) -> f64 {
    let x = beta_abs * beta_abs;
    if x == 0.0 {
        return if dim == 0 { 1.0 } else { 0.0 };
    }
    let ln_x = x.ln();
    let mut total = 0.0;
    let mut k = dim;
    loop {
        let term = (-x + k as f64 * ln_x - ln_gamma(k as f64 + 1.0)).exp();
        total += term;
        if k as f64 > x && term <= total * 1e-17 {
            break;
        }
        k += 1;
    }
    total.min(1.0)
}

/// Smallest dimension whose coherent-state tail weight is below `tol`.
pub fn required_dim(beta_abs: f64, tol: f64) -> usize {
    let mut dim = 2;
    while coherent_tail_weight(beta_abs, dim) >= tol {
        dim += 1;
    }
    dim
}

/// Default truncation for amplitudes up to `beta_abs_max`:
/// `ceil(b^2 + 6 b + 10)`, never below [`required_dim`], rounded up to a
/// multiple of 8 (`b = 3` gives 40).
pub fn default_dim(beta_abs_max: f64) -> usize {
    let b = beta_abs_max.abs();
    let base = (b * b + 6.0 * b + 10.0).ceil() as usize;
    let dim = base.max(required_dim(b, TRUNCATION_TOLERANCE));
    dim.div_ceil(8) * 8
}

/// Normalized pure state of the mode.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        let mut v = CVector::from_vec(amplitudes);
        let norm = v.norm();
        if !(norm * norm > DEGENERATE_TRACE) {
            return Err(Error::DegenerateState { trace: norm * norm });
        }
        v.unscale_mut(norm);
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Photon-number distribution `|<k|psi>|^2`.
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn expectation(&self, op: &FieldOperator) -> C64 {
        self.amplitudes.dotc(&(op.matrix() * &self.amplitudes))
    }
}

/// Coherent state `|beta>` truncated to `dim` and renormalized.
///
/// Fails with [`Error::Truncation`] when the discarded Poisson tail exceeds
/// [`TRUNCATION_TOLERANCE`].
pub fn coherent_state(beta: C64, dim: usize) -> Result<StateVector> {
    check_dim(dim)?;
    let beta_abs = beta.norm();
    let tail = coherent_tail_weight(beta_abs, dim);
    if tail >= TRUNCATION_TOLERANCE {
        return Err(Error::Truncation {
            beta_abs,
            dim,
            required: required_dim(beta_abs, TRUNCATION_TOLERANCE),
            tail,
        });
    }
    let mut amps = Vec::with_capacity(dim);
    let mut a = C64::new((-0.5 * beta_abs * beta_abs).exp(), 0.0);
    for k in 0..dim {
        amps.push(a);
        a = a * beta / ((k + 1) as f64).sqrt();
    }
    StateVector::from_amplitudes(amps)
}

/// Number state `|k>`.
pub fn fock_state(k: usize, dim: usize) -> Result<StateVector> {
    check_dim(dim)?;
    if k >= dim {
        return Err(Error::Index { k, dim });
    }
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    amps[k] = C64::new(1.0, 0.0);
    StateVector::from_amplitudes(amps)
}

/// Dense operator on the truncated mode space.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldOperator {
    elements: CMatrix,
}

impl FieldOperator {
    pub fn from_matrix(elements: CMatrix) -> Result<Self> {
        if !elements.is_square() {
            return Err(Error::invalid("operator matrix must be square"));
        }
        check_dim(elements.nrows())?;
        Ok(Self { elements })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            elements: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.elements
    }

    pub fn adjoint(&self) -> Self {
        Self {
            elements: self.elements.adjoint(),
        }
    }

    /// `op |psi>`, unnormalized.
    pub fn apply(&self, psi: &StateVector) -> CVector {
        &self.elements * psi.amplitudes()
    }

    /// Largest elementwise deviation from hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_diff(&self.elements, &self.elements.adjoint())
    }
}

impl std::ops::Mul for &FieldOperator {
    type Output = FieldOperator;

    fn mul(self, rhs: &FieldOperator) -> FieldOperator {
        FieldOperator {
            elements: &self.elements * &rhs.elements,
        }
    }
}

/// Annihilation operator with `<n-1|a|n> = sqrt(n)`.
pub fn annihilation(dim: usize) -> FieldOperator {
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    FieldOperator { elements: m }
}

pub fn creation(dim: usize) -> FieldOperator {
    annihilation(dim).adjoint()
}

/// Diagonal operator `g(a^dagger a)`.
pub fn number_function(dim: usize, g: impl Fn(usize) -> f64) -> FieldOperator {
    let diag = CVector::from_iterator(dim, (0..dim).map(|n| C64::new(g(n), 0.0)));
    FieldOperator {
        elements: CMatrix::from_diagonal(&diag),
    }
}

/// Rotated quadrature `(a^dagger e^{i phi} + a e^{-i phi}) / sqrt(2)`.
pub fn quadrature_operator(phi: f64, dim: usize) -> FieldOperator {
    let a = annihilation(dim).elements;
    let rot = C64::from_polar(1.0, phi);
    let m = (a.adjoint() * rot + a * rot.conj()).unscale(std::f64::consts::SQRT_2);
    FieldOperator { elements: m }
}

/// Mixed state of the mode: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    elements: CMatrix,
}

impl DensityMatrix {
    /// Validates and normalizes an arbitrary matrix. Rejects matrices with a
    /// negative eigenvalue below `-1e-8` after normalization.
    pub fn new(elements: CMatrix) -> Result<Self> {
        if !elements.is_square() {
            return Err(Error::invalid("density matrix must be square"));
        }
        check_dim(elements.nrows())?;
        let rho = renormalize(elements)?;
        let min_eig = rho.min_eigenvalue();
        if min_eig < -1e-8 {
            return Err(Error::invalid(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(rho)
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        Self {
            elements: v * v.adjoint(),
        }
    }

    /// Convex combination `sum_i w_i |psi_i><psi_i|`; weights are normalized.
    pub fn mixture(components: &[(f64, StateVector)]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("mixture needs at least one component"))?;
        let dim = first.1.dim();
        let mut m = CMatrix::zeros(dim, dim);
        for (w, psi) in components {
            if psi.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: psi.dim(),
                });
            }
            if !(*w >= 0.0) {
                return Err(Error::invalid(format!("mixture weight {w} is negative")));
            }
            let v = psi.amplitudes();
            m += v * v.adjoint() * C64::new(*w, 0.0);
        }
        renormalize(m)
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.elements
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    /// `Tr(op rho)`.
    pub fn expectation(&self, op: &FieldOperator) -> C64 {
        let a = op.matrix();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += a[(i, j)] * self.elements[(j, i)];
            }
        }
        acc
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.elements[(i, i)].re).collect()
    }

    pub fn purity(&self) -> f64 {
        self.elements.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_diff(&self.elements, &self.elements.adjoint())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.elements
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Eigen-ensemble `(p_i, |psi_i>)` with weights above `cutoff`.
    pub fn spectral_components(&self, cutoff: f64) -> Vec<(f64, StateVector)> {
        let eig = self.elements.clone().symmetric_eigen();
        let mut out = Vec::new();
        for (i, &p) in eig.eigenvalues.iter().enumerate() {
            if p > cutoff {
                let col: Vec<C64> = eig.eigenvectors.column(i).iter().copied().collect();
                if let Ok(psi) = StateVector::from_amplitudes(col) {
                    out.push((p, psi));
                }
            }
        }
        out
    }
}

/// Hermitian part `(rho + rho^dagger)/2` divided by its trace.
pub fn renormalize(mut m: CMatrix) -> Result<DensityMatrix> {
    let dim = m.nrows();
    for i in 0..dim {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..dim {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    let trace = m.trace().re;
    if !(trace >= DEGENERATE_TRACE) {
        return Err(Error::DegenerateState { trace });
    }
    m.unscale_mut(trace);
    Ok(DensityMatrix { elements: m })
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn number_op(dim: usize) -> FieldOperator {
        number_function(dim, |n| n as f64)
    }

    #[test]
    fn vacuum_from_zero_amplitude() {
        let psi = coherent_state(C64::new(0.0, 0.0), 8).unwrap();
        assert_eq!(psi.amplitudes()[0], C64::new(1.0, 0.0));
        assert!(psi.amplitudes().iter().skip(1).all(|a| a.norm() == 0.0));
    }

    #[test]
    fn coherent_mean_photon_number() {
        let psi = coherent_state(C64::new(3.0, 0.0), 40).unwrap();
        let n = psi.expectation(&number_op(40));
        assert_abs_diff_eq!(n.re, 9.0, epsilon = 1e-6);
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coherent_tail_matches_poisson_sum() {
        // Poisson(9) tail beyond k = 39 and k = 34, from a 50-digit mpmath sum.
        let tail = coherent_tail_weight(3.0, 40);
        assert!((tail / 2.859_202_014_881_225e-14 - 1.0).abs() < 1e-9, "tail = {tail:e}");
        let tail = coherent_tail_weight(3.0, 35);
        assert!((tail / 3.974_578_177_168_422e-11 - 1.0).abs() < 1e-9, "tail = {tail:e}");
        assert_eq!(required_dim(3.0, TRUNCATION_TOLERANCE), 35);
    }

    #[test]
    fn truncation_error_reports_required_dim() {
        match coherent_state(C64::new(3.0, 0.0), 20) {
            Err(Error::Truncation { required, .. }) => {
                assert_eq!(required, required_dim(3.0, TRUNCATION_TOLERANCE));
                assert!(coherent_tail_weight(3.0, required) < TRUNCATION_TOLERANCE);
                assert!(coherent_tail_weight(3.0, required - 1) >= TRUNCATION_TOLERANCE);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn default_dim_for_beta_three_is_forty() {
        assert_eq!(default_dim(3.0), 40);
        assert!(default_dim(0.0) >= 2);
    }

    #[test]
    fn fock_states() {
        let one = fock_state(1, 4).unwrap();
        let expected: Vec<C64> = [0.0, 1.0, 0.0, 0.0].iter().map(|&x| C64::new(x, 0.0)).collect();
        assert_eq!(one.amplitudes().as_slice(), expected.as_slice());
        assert_abs_diff_eq!(one.expectation(&number_op(4)).re, 1.0, epsilon = 1e-15);
        assert!(matches!(fock_state(4, 4), Err(Error::Index { k: 4, dim: 4 })));
        assert!(matches!(fock_state(0, 1), Err(Error::Dimension(1))));
    }

    #[test]
    fn annihilation_matrix_elements() {
        let a = annihilation(5);
        assert_abs_diff_eq!(a.matrix()[(2, 3)].re, 3f64.sqrt(), epsilon = 1e-15);
        let lowered = a.apply(&fock_state(1, 5).unwrap());
        assert_eq!(lowered, fock_state(0, 5).unwrap().amplitudes().clone());
        let zero = a.apply(&fock_state(0, 5).unwrap());
        assert!(zero.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn number_functions_are_diagonal() {
        let id = number_function(6, |_| 1.0);
        assert_eq!(id, FieldOperator::identity(6));
        let c = number_function(6, |n| (0.04 * (n as f64).sqrt()).cos());
        assert_abs_diff_eq!(c.matrix()[(4, 4)].re, 0.08f64.cos(), epsilon = 1e-15);
        let lt: f64 = 0.04;
        let s = number_function(6, |n| {
            if n == 0 {
                lt
            } else {
                (lt * (n as f64).sqrt()).sin() / (n as f64).sqrt()
            }
        });
        assert_eq!(s.matrix()[(0, 0)].re, lt);
    }

    #[test]
    fn quadrature_moments_in_coherent_state() {
        let dim = 40;
        for &(amp, big_phi, phi) in &[(3.0, PI / 4.0, -3.0 * PI / 4.0), (2.0, 0.3, 1.1), (1.5, FRAC_PI_2, 0.0)] {
            let psi = coherent_state(C64::from_polar(amp, big_phi), dim).unwrap();
            let x = quadrature_operator(phi, dim);
            assert!(x.hermiticity_defect() < 1e-12);
            let mean = psi.expectation(&x).re;
            assert_abs_diff_eq!(mean, 2f64.sqrt() * amp * (big_phi - phi).cos(), epsilon = 1e-8);
            let x2 = &x * &x;
            let second = psi.expectation(&x2).re;
            assert_abs_diff_eq!(second - mean * mean, 0.5, epsilon = 1e-8);
        }
        let vac = fock_state(0, 8).unwrap();
        assert_eq!(vac.expectation(&quadrature_operator(0.7, 8)).norm(), 0.0);
    }

    #[test]
    fn density_plumbing() {
        let vac = DensityMatrix::from_pure(&fock_state(0, 5).unwrap());
        assert_eq!(vac.populations(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(vac.trace(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vac.expectation(&FieldOperator::identity(5)).re, 1.0, epsilon = 1e-15);

        let mixed =
            DensityMatrix::mixture(&[(0.25, fock_state(0, 4).unwrap()), (0.75, fock_state(1, 4).unwrap())]).unwrap();
        assert_abs_diff_eq!(mixed.trace(), 1.0, epsilon = 1e-10);
        assert!(mixed.hermiticity_defect() < 1e-10);
        assert!(mixed.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn renormalize_rejects_zero_trace() {
        let m = CMatrix::zeros(3, 3);
        assert!(matches!(renormalize(m), Err(Error::DegenerateState { .. })));
    }

    #[test]
    fn renormalize_symmetrizes() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(2.0, 0.0);
        m[(1, 1)] = C64::new(2.0, 0.0);
        m[(0, 1)] = C64::new(0.2, 0.4);
        m[(1, 0)] = C64::new(0.0, 0.0);
        let rho = renormalize(m).unwrap();
        assert!(rho.hermiticity_defect() < 1e-15);
        assert_abs_diff_eq!(rho.matrix()[(0, 1)].re, 0.025, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.matrix()[(1, 0)].im, -0.05, epsilon = 1e-15);
    }
}
