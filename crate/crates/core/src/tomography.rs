//! Quadrature layer: the `m -> chi` map, theoretical quadrature densities,
//! the instrumental Gaussian, convolution, sample CDFs of `chi` and
//! regularized deconvolution.

use std::f64::consts::{PI, SQRT_2};

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::calibration::EmpiricalCdf;
use crate::error::{Error, Result};

/// Relative level below which a density counts as outside its support when
/// checking the convolution margin.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;
/// Required grid margin beyond the support, in units of `sqrt(sigma_s)`.
pub const KERNEL_MARGIN: f64 = 5.0;
/// Kernel truncation, in units of `sqrt(sigma_s)`.
const KERNEL_HALF_WIDTH: f64 = 10.0;
/// `sigma_s k_max^2` above which the inverse filter is reported as ill-conditioned.
pub const ILL_CONDITIONED_LEVEL: f64 = 40.0;

/// `chi = (2m - n) / (n nu)`.
pub fn chi_from_m(m: usize, n: usize, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::NonpositiveNu { nu });
    }
    if m > n || n == 0 {
        return Err(Error::invalid(format!("click count {m} outside [0, {n}]")));
    }
    Ok((2.0 * m as f64 - n as f64) / (n as f64 * nu))
}

pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / variance).exp() / (2.0 * PI * variance).sqrt()
}

pub fn normal_cdf(x: f64, mean: f64, variance: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (2.0 * variance).sqrt())
}

/// Quadrature mean `sqrt(2) |beta| cos(Phi - phi)` of a coherent state.
pub fn coherent_quadrature_mean(beta_abs: f64, coherent_phase: f64, phi: f64) -> f64 {
    SQRT_2 * beta_abs * (coherent_phase - phi).cos()
}

/// Quadrature density of `|beta e^{i Phi}>` at phase `phi`: normal, variance 1/2.
pub fn coherent_quadrature_pdf(chi: f64, beta_abs: f64, coherent_phase: f64, phi: f64) -> f64 {
    normal_pdf(chi, coherent_quadrature_mean(beta_abs, coherent_phase, phi), 0.5)
}

/// Quadrature density of `|1>`, `2 chi^2 e^{-chi^2} / sqrt(pi)`, for every phase.
pub fn fock1_quadrature_pdf(chi: f64) -> f64 {
    2.0 * chi * chi * (-chi * chi).exp() / PI.sqrt()
}

/// Quadrature density of `|k>`, `e^{-chi^2} H_k(chi)^2 / (2^k k! sqrt(pi))`,
/// evaluated through the normalized Hermite-function recurrence.
pub fn fock_quadrature_pdf(k: usize, chi: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * chi * chi).exp();
    for j in 0..k {
        let j = j as f64;
        let next = (2.0 / (j + 1.0)).sqrt() * chi * cur - (j / (j + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur * cur
}

/// Zero-mean normal with variance `sigma_s`.
pub fn instrumental_pdf(chi: f64, sigma_s: f64) -> Result<f64> {
    check_sigma_s(sigma_s)?;
    Ok(normal_pdf(chi, 0.0, sigma_s))
}

fn check_sigma_s(sigma_s: f64) -> Result<()> {
    if !(sigma_s > 0.0) {
        return Err(Error::NonpositiveInstrumentVariance { sigma_s });
    }
    Ok(())
}

/// Uniform abscissae `lo + i h`, `i = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub step: f64,
    pub len: usize,
}

impl Grid {
    /// Grid from `lo` to at least `hi` with spacing `h`.
    pub fn uniform(lo: f64, hi: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(hi > lo) {
            return Err(Error::invalid(format!("bad grid [{lo}, {hi}] with step {h}")));
        }
        let len = ((hi - lo) / h - 1e-9).ceil() as usize + 1;
        Ok(Self { lo, step: h, len })
    }

    /// Grid of spacing `h` aligned to the origin and covering `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, h: f64) -> Result<Self> {
        let a = (lo / h).floor() * h;
        let b = (hi / h).ceil() * h;
        Self::uniform(a, b, h)
    }

    pub fn hi(&self) -> f64 {
        self.x(self.len - 1)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.x(i))
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Density sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOnGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl DensityOnGrid {
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: grid.points().map(f).collect(),
            grid,
        }
    }

    pub fn h(&self) -> f64 {
        self.grid.step
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step)
    }

    /// Clips negative values and rescales to unit trapezoid integral.
    pub fn normalized(mut self) -> Result<Self> {
        for v in &mut self.values {
            *v = v.max(0.0);
        }
        let total = self.integral();
        if !(total > 0.0) {
            return Err(Error::DegenerateState { trace: total });
        }
        for v in &mut self.values {
            *v /= total;
        }
        Ok(self)
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        let w: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * f(self.grid.x(i)))
            .collect();
        trapezoid(&w, self.grid.step) / self.integral()
    }

    pub fn mean(&self) -> f64 {
        self.moment(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(|x| (x - m) * (x - m))
    }

    /// Linear interpolation, zero outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        interpolate(&self.grid, &self.values, x, 0.0, 0.0)
    }

    pub fn sup_distance(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (v - f(self.grid.x(i))).abs())
            .fold(0.0, f64::max)
    }

    /// `||self - reference||_2 / ||reference||_2` on the shared grid.
    pub fn l2_relative_error(&self, reference: &DensityOnGrid) -> Result<f64> {
        if self.grid != reference.grid {
            return Err(Error::invalid("densities live on different grids"));
        }
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).powi(2))
            .collect();
        let norm: Vec<f64> = reference.values.iter().map(|b| b * b).collect();
        Ok((trapezoid(&diff, self.h()) / trapezoid(&norm, self.h())).sqrt())
    }

    /// Indices of local maxima above `1e-3` of the global maximum. A plateau
    /// counts once.
    pub fn modes(&self) -> Vec<usize> {
        let v = &self.values;
        let top = v.iter().copied().fold(0.0, f64::max);
        let mut modes = Vec::new();
        let mut i = 0;
        while i < v.len() {
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[i] {
                j += 1;
            }
            let left_lower = i == 0 || v[i - 1] < v[i];
            let right_lower = j + 1 == v.len() || v[j + 1] < v[i];
            if left_lower && right_lower && v[i] > 1e-3 * top {
                modes.push((i + j) / 2);
            }
            i = j + 1;
        }
        modes
    }

    pub fn is_bimodal(&self) -> bool {
        self.modes().len() == 2
    }

    pub fn is_unimodal(&self) -> bool {
        self.modes().len() == 1
    }

    /// `(max - f(x0)) / max` for the lowest grid value between the outermost
    /// modes; zero for a unimodal density.
    pub fn dip_depth(&self) -> f64 {
        let modes = self.modes();
        let (Some(&a), Some(&b)) = (modes.first(), modes.last()) else {
            return 0.0;
        };
        let top = self.values.iter().copied().fold(0.0, f64::max);
        let low = self.values[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
        (top - low) / top
    }

    /// Smallest support interval where the density exceeds `rel * max`.
    fn support(&self, rel: f64) -> Option<(f64, f64)> {
        let top = self.values.iter().copied().fold(0.0, f64::max);
        let lo = self.values.iter().position(|&v| v > rel * top)?;
        let hi = self.values.iter().rposition(|&v| v > rel * top)?;
        Some((self.grid.x(lo), self.grid.x(hi)))
    }
}

fn interpolate(grid: &Grid, values: &[f64], x: f64, below: f64, above: f64) -> f64 {
    if x < grid.lo {
        return below;
    }
    let t = (x - grid.lo) / grid.step;
    let i = t.floor() as usize;
    if i + 1 >= grid.len {
        return if i + 1 == grid.len && t == i as f64 {
            values[i]
        } else {
            above
        };
    }
    let f = t - i as f64;
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// Sampled Gaussian on offsets `j h`, `|j| <= J`, normalized to unit sum.
fn gaussian_weights(variance: f64, h: f64) -> Vec<f64> {
    let half = (KERNEL_HALF_WIDTH * variance.sqrt() / h).ceil() as i64;
    let mut w: Vec<f64> = (-half..=half)
        .map(|j| {
            let x = j as f64 * h;
            (-0.5 * x * x / variance).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn convolve_weights(values: &[f64], w: &[f64]) -> Vec<f64> {
    let half = (w.len() / 2) as isize;
    let n = values.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let j = i + half - k as isize;
                if (0..n).contains(&j) {
                    acc += values[j as usize] * wk;
                }
            }
            acc
        })
        .collect()
}

/// Convolution with the instrumental Gaussian of variance `sigma_s`.
///
/// The grid must extend at least `5 sqrt(sigma_s)` past the region where
/// the input exceeds `1e-10` of its maximum.
pub fn convolve(pdf: &DensityOnGrid, sigma_s: f64) -> Result<DensityOnGrid> {
    check_sigma_s(sigma_s)?;
    let margin = KERNEL_MARGIN * sigma_s.sqrt();
    let (support_lo, support_hi) = pdf
        .support(SUPPORT_THRESHOLD)
        .ok_or(Error::DegenerateState { trace: 0.0 })?;
    let (lo, hi) = (pdf.grid.lo, pdf.grid.hi());
    if support_lo - lo < margin || hi - support_hi < margin {
        return Err(Error::GridTooNarrow {
            lo,
            hi,
            margin,
            support_lo,
            support_hi,
        });
    }
    let w = gaussian_weights(sigma_s, pdf.h());
    Ok(DensityOnGrid {
        grid: pdf.grid,
        values: convolve_weights(&pdf.values, &w),
    })
}

/// Gaussian kernel-density pass of bandwidth `b` (kernel variance `b^2`).
pub fn smooth(pdf: &DensityOnGrid, bandwidth: f64) -> DensityOnGrid {
    let w = gaussian_weights(bandwidth * bandwidth, pdf.h());
    DensityOnGrid {
        grid: pdf.grid,
        values: convolve_weights(&pdf.values, &w),
    }
}

/// Cumulative distribution on a grid, by cumulative trapezoid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfOnGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl CdfOnGrid {
    pub fn from_density(pdf: &DensityOnGrid) -> Self {
        let h = pdf.h();
        let mut acc = 0.0;
        let mut values = Vec::with_capacity(pdf.values.len());
        values.push(0.0);
        for w in pdf.values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            values.push(acc);
        }
        Self { grid: pdf.grid, values }
    }

    /// Interpolated value; 0 left of the grid, the last value right of it.
    pub fn eval(&self, x: f64) -> f64 {
        let last = *self.values.last().expect("nonempty grid");
        interpolate(&self.grid, &self.values, x, 0.0, last)
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    /// Smallest `x` with `F(x) >= q`, by interpolation.
    pub fn quantile(&self, q: f64) -> f64 {
        let i = self.values.partition_point(|&v| v < q);
        if i == 0 {
            return self.grid.lo;
        }
        if i >= self.values.len() {
            return self.grid.hi();
        }
        let (a, b) = (self.values[i - 1], self.values[i]);
        let f = if b > a { (q - a) / (b - a) } else { 0.0 };
        self.grid.x(i - 1) + f * self.grid.step
    }
}

/// Theoretical CDF of the convolution `pdf * Spr`.
pub fn convolution_cdf(pdf: &DensityOnGrid, sigma_s: f64) -> Result<CdfOnGrid> {
    Ok(CdfOnGrid::from_density(&convolve(pdf, sigma_s)?))
}

/// Quadrature values reconstructed from click counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSampleSet {
    pub chi_values: Vec<f64>,
    pub phi: f64,
    pub nu: f64,
    pub atoms: usize,
    pub label: String,
}

impl QuadratureSampleSet {
    pub fn from_clicks(clicks: &[usize], atoms: usize, nu: f64, phi: f64, label: impl Into<String>) -> Result<Self> {
        if clicks.is_empty() {
            return Err(Error::EmptySample);
        }
        let chi_values = clicks
            .iter()
            .map(|&m| chi_from_m(m, atoms, nu))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            chi_values,
            phi,
            nu,
            atoms,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.chi_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi_values.is_empty()
    }

    /// Spacing `2 / (n nu)` of the `chi` lattice.
    pub fn lattice_step(&self) -> f64 {
        2.0 / (self.atoms as f64 * self.nu)
    }

    pub fn mean(&self) -> f64 {
        self.chi_values.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let n = self.len() as f64;
        self.chi_values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0)
    }

    pub fn empirical_cdf(&self) -> EmpiricalCdf {
        EmpiricalCdf::new(&self.chi_values).expect("nonempty by construction")
    }

    /// Kolmogorov distance to a continuous CDF, with `chi` treated as a
    /// continuous variable.
    pub fn ks_naive(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        self.empirical_cdf().sup_distance(cdf)
    }

    /// Kolmogorov distance on the `chi` lattice. Each lattice point `chi_m`
    /// stands for the cell `[chi_m - d/2, chi_m + d/2)`, so the sample CDF at
    /// `chi_m` is compared with `F(chi_m + d/2)`; the lower tail
    /// `F(chi_0 - d/2)` is included as well.
    pub fn ks_lattice(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let e = self.empirical_cdf();
        let d = self.lattice_step();
        let half = 0.5 * d;
        let chi0 = -1.0 / self.nu;
        let mut sup = cdf(chi0 - half).abs();
        for m in 0..=self.atoms {
            let x = chi0 + m as f64 * d;
            // sample values equal lattice points up to rounding
            let emp = e.eval(x + 1e-9 * d);
            sup = sup.max((emp - cdf(x + half)).abs());
        }
        sup
    }
}

/// Maps click counts to `chi` and builds their sample CDF.
pub fn tomogram_from_ensemble(
    clicks: &[usize],
    atoms: usize,
    nu: f64,
    phi: f64,
) -> Result<(QuadratureSampleSet, EmpiricalCdf)> {
    let set = QuadratureSampleSet::from_clicks(clicks, atoms, nu, phi, "")?;
    let cdf = set.empirical_cdf();
    Ok((set, cdf))
}

/// Histogram of `samples` on `grid` (one bin per grid point, width `h`),
/// followed by a Gaussian smoothing pass of the given bandwidth. Samples
/// outside the grid are dropped.
pub fn histogram_density(samples: &[f64], grid: Grid, bandwidth: f64) -> Result<DensityOnGrid> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let h = grid.step;
    let mut counts = vec![0.0; grid.len];
    for &x in samples {
        let i = ((x - grid.lo) / h).round();
        if i >= 0.0 && (i as usize) < grid.len {
            counts[i as usize] += 1.0;
        }
    }
    let scale = 1.0 / (samples.len() as f64 * h);
    let raw = DensityOnGrid {
        grid,
        values: counts.into_iter().map(|c| c * scale).collect(),
    };
    smooth(&raw, bandwidth).normalized()
}

/// Regularized inverse of [`convolve`]: the spectrum is multiplied by
/// `G / (G^2 + epsilon)` with `G(k) = exp(-sigma_s k^2 / 2)`, the result is
/// clipped at zero and renormalized.
pub fn deconvolve(hist: &DensityOnGrid, sigma_s: f64, epsilon: f64) -> Result<DensityOnGrid> {
    check_sigma_s(sigma_s)?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid("regularization epsilon must be positive"));
    }
    let len = hist.values.len();
    let h = hist.h();
    let k_max = PI / h;
    if sigma_s * k_max * k_max > ILL_CONDITIONED_LEVEL {
        log::warn!(
            "deconvolution ill-conditioned: sigma_s k_max^2 = {:.1} > {ILL_CONDITIONED_LEVEL}",
            sigma_s * k_max * k_max
        );
    }
    let size = (2 * len).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = hist
        .values
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    let dk = 2.0 * PI / (size as f64 * h);
    for (j, c) in buf.iter_mut().enumerate() {
        let idx = if j <= size / 2 {
            j as f64
        } else {
            j as f64 - size as f64
        };
        let k = idx * dk;
        let g = (-0.5 * sigma_s * k * k).exp();
        *c *= g / (g * g + epsilon);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let values = buf[..len].iter().map(|c| c.re / size as f64).collect();
    DensityOnGrid {
        grid: hist.grid,
        values,
    }
    .normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn wide() -> Grid {
        Grid::covering(-16.0, 12.0, 0.05).unwrap()
    }

    fn fock_grid() -> Grid {
        Grid::covering(-10.0, 10.0, 0.05).unwrap()
    }

    #[test]
    fn chi_values() {
        assert_eq!(chi_from_m(150, 300, 0.05).unwrap(), 0.0);
        assert_abs_diff_eq!(chi_from_m(160, 300, 0.049_780).unwrap(), 1.3392, epsilon = 1e-4);
        assert_abs_diff_eq!(chi_from_m(0, 300, 0.05).unwrap(), -20.0, epsilon = 1e-12);
        assert!(matches!(chi_from_m(3, 10, 0.0), Err(Error::NonpositiveNu { .. })));
        assert!(chi_from_m(11, 10, 0.1).is_err());
    }

    #[test]
    fn coherent_density() {
        assert_abs_diff_eq!(coherent_quadrature_mean(3.0, PI, 0.0), -4.2426, epsilon = 1e-4);
        let d = DensityOnGrid::from_fn(wide(), |x| coherent_quadrature_pdf(x, 3.0, PI / 4.0, -3.0 * PI / 4.0));
        assert_abs_diff_eq!(d.integral(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.mean(), -3.0 * SQRT_2, epsilon = 1e-9);
        assert_abs_diff_eq!(d.variance(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn fock_density() {
        assert_eq!(fock1_quadrature_pdf(0.0), 0.0);
        let d = DensityOnGrid::from_fn(fock_grid(), fock1_quadrature_pdf);
        assert_abs_diff_eq!(d.integral(), 1.0, epsilon = 1e-9);
        let modes = d.modes();
        assert_eq!(modes.len(), 2);
        for i in modes {
            assert_abs_diff_eq!(d.grid.x(i).abs(), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(d.values[i], 2.0 * (-1.0f64).exp() / PI.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn fock_family() {
        for chi in [-2.3, -0.4, 0.0, 0.7, 1.9] {
            assert_abs_diff_eq!(fock_quadrature_pdf(0, chi), normal_pdf(chi, 0.0, 0.5), epsilon = 1e-15);
            assert_abs_diff_eq!(fock_quadrature_pdf(1, chi), fock1_quadrature_pdf(chi), epsilon = 1e-15);
            let h2 = 4.0 * chi * chi - 2.0;
            let p2 = (-chi * chi).exp() * h2 * h2 / (8.0 * PI.sqrt());
            assert_abs_diff_eq!(fock_quadrature_pdf(2, chi), p2, epsilon = 1e-14);
        }
        let d = DensityOnGrid::from_fn(fock_grid(), |x| fock_quadrature_pdf(5, x));
        assert_abs_diff_eq!(d.integral(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.variance(), 5.5, epsilon = 1e-6);
    }

    #[test]
    fn instrumental_values() {
        assert_abs_diff_eq!(instrumental_pdf(0.0, 0.845).unwrap(), 0.433_992, epsilon = 1e-6);
        assert_eq!(
            instrumental_pdf(0.7, 0.3).unwrap(),
            instrumental_pdf(-0.7, 0.3).unwrap()
        );
        assert!(matches!(
            instrumental_pdf(0.0, 0.0),
            Err(Error::NonpositiveInstrumentVariance { .. })
        ));
    }

    #[test]
    fn gaussian_closure() {
        for sigma_s in [0.176, 0.845] {
            let d = DensityOnGrid::from_fn(wide(), |x| coherent_quadrature_pdf(x, 3.0, PI, 0.0));
            let c = convolve(&d, sigma_s).unwrap();
            let mean = -3.0 * SQRT_2;
            assert!(c.sup_distance(|x| normal_pdf(x, mean, 0.5 + sigma_s)) < 1e-6);
            assert_abs_diff_eq!(c.integral(), 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(c.mean(), mean, epsilon = 1e-6);
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let g = Grid::covering(-6.0, 6.0, 0.05).unwrap();
        let d = DensityOnGrid::from_fn(g, fock1_quadrature_pdf);
        assert!(matches!(convolve(&d, 0.845), Err(Error::GridTooNarrow { .. })));
    }

    #[test]
    fn bimodality_threshold() {
        // analytically the dip closes at sigma_s = 1; at 0.845 it is 1.33 % deep
        let d = DensityOnGrid::from_fn(fock_grid(), fock1_quadrature_pdf);
        assert!(convolve(&d, 0.176).unwrap().is_bimodal());
        let c = convolve(&d, 0.845).unwrap();
        assert!(c.is_bimodal());
        assert_abs_diff_eq!(c.dip_depth(), 0.013_329, epsilon = 2e-4);
        let d = DensityOnGrid::from_fn(Grid::covering(-12.0, 12.0, 0.05).unwrap(), fock1_quadrature_pdf);
        let c = convolve(&d, 1.2).unwrap();
        assert!(c.is_unimodal());
        assert_eq!(c.dip_depth(), 0.0);
    }

    #[test]
    fn convolution_cdf_shape() {
        let d = DensityOnGrid::from_fn(wide(), |x| coherent_quadrature_pdf(x, 3.0, PI, 0.0));
        let cdf = convolution_cdf(&d, 0.845).unwrap();
        assert!(cdf.is_monotone());
        assert_abs_diff_eq!(cdf.values[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(*cdf.values.last().unwrap(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(cdf.quantile(0.5), -3.0 * SQRT_2, epsilon = 1e-3);
        assert_abs_diff_eq!(cdf.eval(-3.0 * SQRT_2), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn round_trips() {
        let g = DensityOnGrid::from_fn(wide(), |x| coherent_quadrature_pdf(x, 3.0, PI, 0.0));
        let back = deconvolve(&convolve(&g, 0.845).unwrap(), 0.845, 1e-4).unwrap();
        assert!(back.l2_relative_error(&g).unwrap() < 0.05);

        let f = DensityOnGrid::from_fn(fock_grid(), fock1_quadrature_pdf);
        let back = deconvolve(&convolve(&f, 0.176).unwrap(), 0.176, 1e-4).unwrap();
        assert!(back.l2_relative_error(&f).unwrap() < 0.05);
        let peak = back.values.iter().copied().fold(0.0, f64::max);
        assert!(back.eval(0.0) < 0.8 * peak);
    }

    #[test]
    fn tiny_kernel_is_identity() {
        let f = DensityOnGrid::from_fn(fock_grid(), fock1_quadrature_pdf);
        let back = deconvolve(&f, 1e-8, 1e-4).unwrap();
        assert!(back.l2_relative_error(&f).unwrap() < 1e-3);
    }

    #[test]
    fn lattice_ks_of_exact_lattice_cdf_is_zero() {
        // chi on the lattice, with a CDF that jumps exactly in the middle of each cell
        let clicks: Vec<usize> = (0..=10).collect();
        let set = QuadratureSampleSet::from_clicks(&clicks, 10, 0.1, 0.0, "").unwrap();
        let d = set.lattice_step();
        let step_cdf = |x: f64| {
            let m = ((x + 10.0) / d - 0.5).floor() + 1.0;
            (m / 11.0).clamp(0.0, 1.0)
        };
        assert!(set.ks_lattice(step_cdf) < 1e-12);
    }

    #[test]
    fn histogram_recovers_gaussian_moments() {
        let samples: Vec<f64> = (1..2000)
            .map(|i| {
                let u = i as f64 / 2000.0;
                // deterministic normal quantiles
                -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u) * 0.8
            })
            .collect();
        let g = Grid::covering(-6.0, 6.0, 0.05).unwrap();
        let d = histogram_density(&samples, g, 0.05).unwrap();
        assert_abs_diff_eq!(d.integral(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.mean(), 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(d.variance(), 0.64 + 0.0025, epsilon = 0.01);
    }
}
