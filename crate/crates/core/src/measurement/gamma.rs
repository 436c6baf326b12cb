use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::InteractionParams;

/// Poisson tail weight at which the Γ series stops.
pub const GAMMA_SERIES_TOLERANCE: f64 = 1e-10;

/// How the Rabi overlap factor Γ is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMode {
    /// Full Poisson-weighted series.
    Series,
    /// Small-coupling expansion `1 - lt^2 (2|beta|^2/3 + 1/6)`.
    Approx,
    /// Γ = 1.
    #[default]
    Unity,
}

impl std::str::FromStr for GammaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "series" => Ok(GammaMode::Series),
            "approx" => Ok(GammaMode::Approx),
            "unity" => Ok(GammaMode::Unity),
            other => Err(format!("unknown gamma mode {other:?} (series|approx|unity)")),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// `sum_k cos(lt sqrt k) sinc(lt sqrt(k+1)) e^{-|beta|^2} |beta|^{2k} / k!`,
/// stopped once the remaining Poisson weight is below `tail_tol`.
pub fn gamma_series(beta_abs: f64, lambda_tau: f64, tail_tol: f64) -> f64 {
    let x = beta_abs * beta_abs;
    let mut weight = (-x).exp();
    let mut covered = 0.0;
    let mut total = 0.0;
    let mut k = 0usize;
    loop {
        let term = (lambda_tau * (k as f64).sqrt()).cos() * sinc(lambda_tau * ((k + 1) as f64).sqrt());
        total += term * weight;
        covered += weight;
        if k as f64 >= x && 1.0 - covered < tail_tol {
            break;
        }
        k += 1;
        weight *= x / k as f64;
        if weight == 0.0 && k as f64 > x {
            break;
        }
    }
    total
}

/// Γ to second order in `lambda_tau`; only meaningful while `|beta| lt << 1`.
pub fn gamma_approx(beta_abs: f64, lambda_tau: f64) -> f64 {
    if beta_abs * lambda_tau > 0.3 {
        log::warn!(
            "|beta| * lambda_tau = {:.3} is not small; the Γ expansion is unreliable",
            beta_abs * lambda_tau
        );
    }
    1.0 - lambda_tau * lambda_tau * (2.0 / 3.0 * beta_abs * beta_abs + 1.0 / 6.0)
}

pub fn gamma_factor(mode: GammaMode, beta_abs: f64, lambda_tau: f64) -> f64 {
    match mode {
        GammaMode::Series => gamma_series(beta_abs, lambda_tau, GAMMA_SERIES_TOLERANCE),
        GammaMode::Approx => gamma_approx(beta_abs, lambda_tau),
        GammaMode::Unity => 1.0,
    }
}

/// Click probability of the first probe for a coherent input `|beta>`:
/// `(1 + 2 lt |beta| Γ cos(Phi - phi)) / 2` with `Phi = arg(beta)`.
pub fn first_click_probability(beta: Complex64, params: &InteractionParams, mode: GammaMode) -> f64 {
    let beta_abs = beta.norm();
    if beta_abs == 0.0 {
        return 0.5;
    }
    let lt = params.lambda_tau;
    let gamma = gamma_factor(mode, beta_abs, lt);
    0.5 * (1.0 + 2.0 * lt * beta_abs * gamma * (beta.arg() - params.phi).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn series_at_zero_amplitude_is_single_term() {
        assert_abs_diff_eq!(gamma_series(0.0, 0.04, 1e-10), 0.04f64.sin() / 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(gamma_series(0.0, 0.04, 1e-10), 0.999_733_4, epsilon = 1e-7);
    }

    #[test]
    fn series_tends_to_one_for_weak_coupling() {
        assert_abs_diff_eq!(gamma_series(3.0, 1e-9, 1e-10), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(gamma_series(3.0, 0.0, 1e-10), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn approximation_values() {
        assert_abs_diff_eq!(gamma_approx(3.0, 0.04), 0.990_133_3, epsilon = 1e-7);
        assert_abs_diff_eq!(gamma_approx(0.0, 0.04), 1.0 - 0.0016 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn series_and_approximation_agree_for_small_coupling() {
        for i in 0..=30 {
            let b = 0.1 * i as f64;
            let s = gamma_series(b, 0.04, 1e-10);
            let a = gamma_approx(b, 0.04);
            assert!((s - a).abs() < 1e-4, "|beta| = {b}: series {s}, approx {a}");
        }
    }

    #[test]
    fn first_click_values() {
        let p = InteractionParams::new(0.04, 0.0, 40).unwrap();
        assert_eq!(
            first_click_probability(Complex64::new(0.0, 0.0), &p, GammaMode::Series),
            0.5
        );
        let p1 = first_click_probability(Complex64::new(3.0, 0.0), &p, GammaMode::Series);
        assert_abs_diff_eq!(p1, 0.61882, epsilon = 1e-5);
    }

    #[test]
    fn parses_modes() {
        assert_eq!("Series".parse::<GammaMode>().unwrap(), GammaMode::Series);
        assert!("bogus".parse::<GammaMode>().is_err());
    }
}
