use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityMatrix};

use super::{KrausPair, Outcome};

/// Largest atom count accepted by [`enumerate_integrated_probability`].
pub const DEFAULT_ENUMERATION_CAP: usize = 14;

/// Exact click-count distribution `P(n; m)`, `m = 0..=n`, obtained by
/// propagating `rho0` through all `2^n` outcome strings.
pub fn enumerate_integrated_probability(rho0: &DensityMatrix, kp: &KrausPair, n: usize) -> Result<Vec<f64>> {
    enumerate_with_cap(rho0, kp, n, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_with_cap(rho0: &DensityMatrix, kp: &KrausPair, n: usize, cap: usize) -> Result<Vec<f64>> {
    if n > cap {
        return Err(Error::Size { n, cap });
    }
    if rho0.dim() != kp.dim() {
        return Err(Error::DimensionMismatch {
            expected: kp.dim(),
            got: rho0.dim(),
        });
    }
    let mut pmf = vec![0.0; n + 1];
    descend(rho0.matrix(), kp, n, 0, &mut pmf);
    Ok(pmf)
}

// Depth-first over outcome strings, lower branch first; the accumulation
// order into each bin is therefore fixed.
fn descend(sigma: &CMatrix, kp: &KrausPair, remaining: usize, clicks: usize, pmf: &mut [f64]) {
    if remaining == 0 {
        pmf[clicks] += sigma.trace().re;
        return;
    }
    if remaining == 1 {
        pmf[clicks] += kp.branch_probability(Outcome::Lower, sigma);
        pmf[clicks + 1] += kp.branch_probability(Outcome::Upper, sigma);
        return;
    }
    let lower = kp.sandwich(Outcome::Lower, sigma);
    descend(&lower, kp, remaining - 1, clicks, pmf);
    let upper = kp.sandwich(Outcome::Upper, sigma);
    descend(&upper, kp, remaining - 1, clicks + 1, pmf);
}

/// Joint probability of one outcome string, `Tr(K_s ... K_1 rho K_1^† ... K_s^†)`.
pub fn path_probability(rho0: &DensityMatrix, kp: &KrausPair, outcomes: &[Outcome]) -> f64 {
    let dim = kp.dim();
    let mut string = CMatrix::identity(dim, dim);
    for &o in outcomes {
        string = kp.operator(o).matrix() * string;
    }
    (&string * rho0.matrix() * string.adjoint()).trace().re
}
