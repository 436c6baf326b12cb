//! Calibrate, then reconstruct the quadrature distribution of a coherent
//! state from an independent ensemble.
//!
//! cargo run --release --example coherent_tomogram

use cqed_tomo::calibration::{calibration_samples, fit_mu, kolmogorov_bound, CalibrationInput};
use cqed_tomo::fock::{coherent_state, default_dim, C64};
use cqed_tomo::measurement::{build_kraus, InteractionParams};
use cqed_tomo::tomography::{
    coherent_quadrature_mean, coherent_quadrature_pdf, convolution_cdf, deconvolve, histogram_density, DensityOnGrid,
    Grid, QuadratureSampleSet,
};
use cqed_tomo::trajectory::{run_ensemble, InitialState, RunConfig};

fn main() -> cqed_tomo::Result<()> {
    let input = CalibrationInput::default();
    let fit = fit_mu(&calibration_samples(&input, None, 1)?, &input)?;
    fit.require_accepted()?;

    let dim = default_dim(input.beta_max);
    let psi = coherent_state(C64::from_polar(input.beta_max, input.coherent_phase), dim)?;
    let kp = build_kraus(InteractionParams::new(input.lambda_tau, input.phi, dim)?);
    let clicks = run_ensemble(
        &InitialState::Pure(psi),
        &kp,
        &RunConfig::new(input.atoms, input.runs, 2)?,
    )?
    .clicks;
    let set = QuadratureSampleSet::from_clicks(&clicks, input.atoms, fit.nu, input.phi, "coherent")?;

    let mean = coherent_quadrature_mean(input.beta_max, input.coherent_phase, input.phi);
    let truth = DensityOnGrid::from_fn(Grid::covering(mean - 10.0, mean + 10.0, 0.01)?, |x| {
        coherent_quadrature_pdf(x, input.beta_max, input.coherent_phase, input.phi)
    });
    let cdf = convolution_cdf(&truth, fit.sigma_s)?;
    println!("mu = {:.2}, sigma_s = {:.4}", fit.mu, fit.sigma_s);
    println!(
        "chi mean {:.4} (state {mean:.4}), variance {:.4} (1/2 + sigma_s = {:.4})",
        set.mean(),
        set.variance(),
        fit.sigma
    );
    println!(
        "lattice KS {:.4}, naive KS {:.4}, bound {:.4}",
        set.ks_lattice(|x| cdf.eval(x)),
        set.ks_naive(|x| cdf.eval(x)),
        kolmogorov_bound(input.alpha, input.runs)
    );

    let grid = Grid::covering(mean - 6.0, mean + 6.0, 0.05)?;
    let bandwidth = grid.step.max(set.lattice_step());
    let hist = histogram_density(&set.chi_values, grid, bandwidth)?;
    let rec = deconvolve(&hist, fit.sigma_s + bandwidth * bandwidth, 1e-4)?;
    println!("# chi histogram deconvolved truth");
    for i in (0..rec.values.len()).step_by(8) {
        let x = rec.grid.x(i);
        println!("{x:.3} {:.4} {:.4} {:.4}", hist.values[i], rec.values[i], truth.eval(x));
    }
    Ok(())
}
