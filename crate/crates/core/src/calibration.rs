//! Statistical model for the click count `m` and the fit of `mu`.
//!
//! Over a series of `n` probes the per-atom click probability is replaced by
//! its average
//!
//! ```text
//! p_bar = (1 + nu sqrt(2) |beta| cos(Phi - phi)) / 2,   nu = Γ lt (1 + mu) / sqrt(2)
//! ```
//!
//! so that `m` is binomial. `mu` is chosen by simulating a coherent state at
//! `|beta|_max` and minimizing the Kolmogorov distance between the sample
//! CDF of `m` and the binomial CDF. The fitted `nu` then fixes the variance
//! `sigma = 1/(n nu^2)` of the reconstructed quadrature and the variance
//! `sigma_s = sigma - 1/2` of the instrumental function.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::fock::{coherent_state, default_dim, C64};
use crate::measurement::{build_kraus, gamma_factor, GammaMode, InteractionParams};
use crate::trajectory::{run_ensemble, InitialState, RunConfig};

/// `nu = Γ lt (1 + mu) / sqrt(2)`.
pub fn nu(lambda_tau: f64, mu: f64, gamma: f64) -> Result<f64> {
    let nu = gamma * lambda_tau * (1.0 + mu) / SQRT_2;
    if !(nu > 0.0) {
        return Err(Error::NonpositiveNu { nu });
    }
    Ok(nu)
}

/// Mean click probability for a given slope `nu` and quadrature mean offset.
pub fn p_bar_from_nu(beta_abs: f64, phase_offset: f64, nu: f64) -> Result<f64> {
    let p = 0.5 * (1.0 + nu * SQRT_2 * beta_abs * phase_offset.cos());
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange { p_bar: p });
    }
    Ok(p)
}

/// Mean click probability `p_bar` for a coherent input, Γ per `gamma_mode`
/// evaluated at `beta_abs`.
pub fn p_bar(
    beta_abs: f64,
    coherent_phase: f64,
    phi: f64,
    lambda_tau: f64,
    mu: f64,
    gamma_mode: GammaMode,
) -> Result<f64> {
    let gamma = gamma_factor(gamma_mode, beta_abs, lambda_tau);
    let nu = nu(lambda_tau, mu, gamma)?;
    p_bar_from_nu(beta_abs, coherent_phase - phi, nu)
}

/// Binomial pmf of `m = 0..=n` with success probability `p`.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 || p >= 1.0 {
        let mut pmf = vec![0.0; n + 1];
        pmf[if p >= 1.0 { n } else { 0 }] = 1.0;
        return pmf;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (0..=n)
        .map(|m| (ln_binomial(n as u64, m as u64) + m as f64 * lp + (n - m) as f64 * lq).exp())
        .collect()
}

/// Local Moivre-Laplace density for `m`: normal with mean `n p` and
/// variance `n p (1 - p)`.
pub fn moivre_laplace_pdf(n: usize, p: f64, m: f64) -> f64 {
    let var = n as f64 * p * (1.0 - p);
    if var < 9.0 {
        log::warn!("n p (1 - p) = {var:.2} < 9; normal approximation to the binomial is poor");
    }
    let d = m - n as f64 * p;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Cumulative binomial distribution `F(x) = sum_{m <= x} P(n; m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinomialCdf {
    cumulative: Vec<f64>,
}

impl BinomialCdf {
    pub fn new(n: usize, p: f64) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = binomial_pmf(n, p)
            .into_iter()
            .map(|q| {
                acc += q;
                acc
            })
            .collect();
        // exact 1 at the top so that F(x >= n) == 1
        *cumulative.last_mut().expect("n + 1 entries") = 1.0;
        Self { cumulative }
    }

    pub fn n(&self) -> usize {
        self.cumulative.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let k = x.floor();
        if k >= self.n() as f64 {
            1.0
        } else {
            self.cumulative[k as usize].min(1.0)
        }
    }
}

pub fn theoretical_cdf_m(n: usize, p_bar: f64, x: f64) -> f64 {
    BinomialCdf::new(n, p_bar).eval(x)
}

/// Right-continuous sample distribution function `(1/N) sum_k I(X_k <= x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// Value just below `x`, `(1/N) #{X_k < x}`.
    pub fn eval_left(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s < x) as f64 / self.sorted.len() as f64
    }

    /// Supremum distance to a continuous CDF, checked on both sides of every jump.
    pub fn sup_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut sup: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let j = self.sorted.partition_point(|&s| s <= x);
            let f = cdf(x);
            sup = sup.max((i as f64 / n - f).abs()).max((j as f64 / n - f).abs());
            i = j;
        }
        sup
    }
}

pub fn empirical_cdf(samples: &[f64], x: f64) -> Result<f64> {
    Ok(EmpiricalCdf::new(samples)?.eval(x))
}

/// Kolmogorov confidence level `sqrt(ln(2/(1 - alpha))/2) / sqrt(N)`.
pub fn kolmogorov_bound(alpha: f64, sample_size: usize) -> f64 {
    (0.5 * (2.0 / (1.0 - alpha)).ln()).sqrt() / (sample_size as f64).sqrt()
}

/// Sample CDF of integer click counts, tabulated on `0..=max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClickCdf {
    cumulative: Vec<f64>,
}

impl ClickCdf {
    pub fn new(samples: &[usize], n: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        let top = samples.iter().copied().max().unwrap_or(0).max(n);
        let mut counts = vec![0usize; top + 1];
        for &m in samples {
            counts[m] += 1;
        }
        let total = samples.len() as f64;
        let mut acc = 0;
        let cumulative = counts
            .into_iter()
            .map(|c| {
                acc += c;
                acc as f64 / total
            })
            .collect();
        Ok(Self { cumulative })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            let k = (x.floor() as usize).min(self.cumulative.len() - 1);
            self.cumulative[k]
        }
    }

    /// `sup_x |F_sample(x) - F_binomial(x)|`. Both are step functions with
    /// jumps at integers only, so the supremum is attained on `0..=max`.
    pub fn distance_to(&self, theory: &BinomialCdf) -> f64 {
        self.cumulative
            .iter()
            .enumerate()
            .map(|(m, &e)| (e - theory.eval(m as f64)).abs())
            .fold(0.0, f64::max)
    }
}

/// Kolmogorov distance between click counts and `binomial(n, p_bar)`.
pub fn ks_statistic(samples: &[usize], n: usize, p_bar: f64) -> Result<f64> {
    Ok(ClickCdf::new(samples, n)?.distance_to(&BinomialCdf::new(n, p_bar)))
}

/// `sigma = 1 / (n nu^2)`.
pub fn sigma(n: usize, nu: f64) -> f64 {
    1.0 / (n as f64 * nu * nu)
}

/// `sigma_s = sigma - 1/2`, required to be positive.
pub fn sigma_s(sigma: f64) -> Result<f64> {
    let s = sigma - 0.5;
    if !(s > 0.0) {
        return Err(Error::NonpositiveInstrumentVariance { sigma_s: s });
    }
    Ok(s)
}

/// Search grid for `mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for MuGrid {
    fn default() -> Self {
        Self {
            lo: -1.0,
            hi: 1.0,
            step: 0.01,
        }
    }
}

impl MuGrid {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0 <= self.lo && self.lo <= self.hi && self.hi <= 1.0) {
            return Err(Error::invalid(format!(
                "mu grid [{}, {}] must lie within [-1, 1]",
                self.lo, self.hi
            )));
        }
        if !(self.step > 0.0) {
            return Err(Error::invalid("mu grid step must be positive"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| {
                let x = self.lo + i as f64 * self.step;
                (x * 1e9).round() / 1e9
            })
            .collect()
    }
}

/// Parameters of the calibration run: a coherent state at `|beta|_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInput {
    pub lambda_tau: f64,
    pub beta_max: f64,
    /// Phase `Phi` of the calibration amplitude.
    pub coherent_phase: f64,
    /// Quadrature phase `phi`.
    pub phi: f64,
    /// Atoms per series.
    pub atoms: usize,
    /// Number of series.
    pub runs: usize,
    pub alpha: f64,
    pub gamma_mode: GammaMode,
    pub mu_grid: MuGrid,
}

impl Default for CalibrationInput {
    fn default() -> Self {
        Self {
            lambda_tau: 0.04,
            beta_max: 3.0,
            coherent_phase: std::f64::consts::FRAC_PI_4,
            phi: -3.0 * std::f64::consts::FRAC_PI_4,
            atoms: 300,
            runs: 1000,
            alpha: 0.95,
            gamma_mode: GammaMode::Unity,
            mu_grid: MuGrid::default(),
        }
    }
}

impl CalibrationInput {
    pub fn validate(&self) -> Result<()> {
        self.mu_grid.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.lambda_tau > 0.0) {
            return Err(Error::invalid("lambda_tau must be positive"));
        }
        if self.atoms == 0 || self.runs == 0 {
            return Err(Error::invalid("atoms and runs must be positive"));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        gamma_factor(self.gamma_mode, self.beta_max, self.lambda_tau)
    }

    pub fn phase_offset(&self) -> f64 {
        self.coherent_phase - self.phi
    }

    /// Derived quantities for a given `mu`, without any data.
    pub fn evaluate(&self, mu: f64) -> Result<ModelPoint> {
        let gamma = self.gamma();
        let nu = nu(self.lambda_tau, mu, gamma)?;
        let p_bar = p_bar_from_nu(self.beta_max, self.phase_offset(), nu)?;
        let sigma = sigma(self.atoms, nu);
        Ok(ModelPoint {
            mu,
            gamma,
            nu,
            p_bar,
            sigma,
            sigma_s: sigma - 0.5,
        })
    }
}

/// Model quantities implied by one value of `mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub mu: f64,
    pub gamma: f64,
    pub nu: f64,
    pub p_bar: f64,
    pub sigma: f64,
    /// `sigma - 1/2`; may be non-positive when `n` is too large.
    pub sigma_s: f64,
}

/// Outcome of [`fit_mu`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub mu: f64,
    pub gamma: f64,
    pub nu: f64,
    pub p_bar: f64,
    pub sigma: f64,
    pub sigma_s: f64,
    pub ks_statistic: f64,
    pub ks_bound: f64,
    pub accepted: bool,
    pub atoms: usize,
    pub runs: usize,
}

impl CalibrationResult {
    /// Fails with [`Error::NoAcceptableMu`] unless the fit passed the test.
    pub fn require_accepted(&self) -> Result<&Self> {
        if self.accepted {
            Ok(self)
        } else {
            Err(Error::NoAcceptableMu {
                mu: self.mu,
                statistic: self.ks_statistic,
                bound: self.ks_bound,
            })
        }
    }

    pub fn model(&self) -> ModelPoint {
        ModelPoint {
            mu: self.mu,
            gamma: self.gamma,
            nu: self.nu,
            p_bar: self.p_bar,
            sigma: self.sigma,
            sigma_s: self.sigma_s,
        }
    }

    /// Instrumental variance, rejected when non-positive.
    pub fn instrument_variance(&self) -> Result<f64> {
        sigma_s(self.sigma)
    }
}

/// Grid search for the `mu` whose binomial model is closest, in Kolmogorov
/// distance, to the sample click counts. Ties go to the smaller `|mu|`.
///
/// The result is returned even when the best statistic is above the bound;
/// `accepted` records the verdict.
pub fn fit_mu(samples: &[usize], input: &CalibrationInput) -> Result<CalibrationResult> {
    input.validate()?;
    let sample_cdf = ClickCdf::new(samples, input.atoms)?;
    let mut best: Option<(f64, ModelPoint)> = None;
    for mu in input.mu_grid.points() {
        let point = match input.evaluate(mu) {
            Ok(p) => p,
            Err(Error::NonpositiveNu { .. }) | Err(Error::OutOfRange { .. }) => continue,
            Err(e) => return Err(e),
        };
        let d = sample_cdf.distance_to(&BinomialCdf::new(input.atoms, point.p_bar));
        let better = match &best {
            None => true,
            Some((bd, bp)) => d < *bd || (d == *bd && mu.abs() < bp.mu.abs()),
        };
        if better {
            best = Some((d, point));
        }
    }
    let (statistic, point) = best.ok_or_else(|| Error::invalid("mu grid has no admissible point"))?;
    let bound = kolmogorov_bound(input.alpha, samples.len());
    Ok(CalibrationResult {
        mu: point.mu,
        gamma: point.gamma,
        nu: point.nu,
        p_bar: point.p_bar,
        sigma: point.sigma,
        sigma_s: point.sigma_s,
        ks_statistic: statistic,
        ks_bound: bound,
        accepted: statistic < bound,
        atoms: input.atoms,
        runs: samples.len(),
    })
}

/// Simulated click counts for the calibration state `|beta_max e^{i Phi}>`.
pub fn calibration_samples(input: &CalibrationInput, dim: Option<usize>, master_seed: u64) -> Result<Vec<usize>> {
    input.validate()?;
    let dim = dim.unwrap_or_else(|| default_dim(input.beta_max));
    let psi = coherent_state(C64::from_polar(input.beta_max, input.coherent_phase), dim)?;
    let kp = build_kraus(InteractionParams::new(input.lambda_tau, input.phi, dim)?);
    let config = RunConfig::new(input.atoms, input.runs, master_seed)?;
    Ok(run_ensemble(&InitialState::Pure(psi), &kp, &config)?.clicks)
}

/// One row of the `sigma_s` versus `n` table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub atoms: usize,
    /// Median over seeds of the fitted `mu`.
    pub mu: f64,
    pub nu: f64,
    pub sigma: f64,
    pub sigma_s: f64,
    /// Fraction of seeds whose fit passed the Kolmogorov test.
    pub accepted_fraction: f64,
    /// Set when `sigma_s <= 0`, i.e. the instrumental model does not apply.
    pub flagged: bool,
}

/// Calibrates at each series length, `seeds.len()` times, and reports the
/// median `mu` with the instrumental variance it implies.
pub fn sigma_s_sweep(
    base: &CalibrationInput,
    atoms: &[usize],
    seeds: &[u64],
    dim: Option<usize>,
) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one seed"));
    }
    atoms
        .iter()
        .map(|&n| {
            let input = CalibrationInput { atoms: n, ..*base };
            let mut mus = Vec::with_capacity(seeds.len());
            let mut accepted = 0usize;
            for &seed in seeds {
                let samples = calibration_samples(&input, dim, seed)?;
                let fit = fit_mu(&samples, &input)?;
                accepted += fit.accepted as usize;
                mus.push(fit.mu);
            }
            let mu = median(&mut mus);
            let point = input.evaluate(mu)?;
            Ok(SweepRow {
                atoms: n,
                mu,
                nu: point.nu,
                sigma: point.sigma,
                sigma_s: point.sigma_s,
                accepted_fraction: accepted as f64 / seeds.len() as f64,
                flagged: point.sigma_s <= 0.0,
            })
        })
        .collect()
}

/// Lower median.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values[(values.len() - 1) / 2]
}
