//! Single-photon tomogram: the measured distribution is the Fock-state
//! quadrature density blurred by the instrument; deconvolution recovers the
//! central dip when the instrumental variance is small.
//!
//! cargo run --release --example fock_tomogram -- [mu]

use std::f64::consts::FRAC_PI_4;

use cqed_tomo::calibration::{kolmogorov_bound, nu, sigma, sigma_s};
use cqed_tomo::fock::fock_state;
use cqed_tomo::measurement::{build_kraus, InteractionParams};
use cqed_tomo::tomography::{
    convolution_cdf, convolve, deconvolve, fock1_quadrature_pdf, histogram_density, DensityOnGrid, Grid,
    QuadratureSampleSet,
};
use cqed_tomo::trajectory::{run_ensemble, InitialState, RunConfig};

fn main() -> cqed_tomo::Result<()> {
    let mu: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.36);
    let (lambda_tau, n, runs, phi) = (0.04, 1000, 1000, -3.0 * FRAC_PI_4);
    let nu_ = nu(lambda_tau, mu, 1.0)?;
    let s_s = sigma_s(sigma(n, nu_))?;

    let kp = build_kraus(InteractionParams::new(lambda_tau, phi, 2)?);
    let clicks = run_ensemble(
        &InitialState::Pure(fock_state(1, 2)?),
        &kp,
        &RunConfig::new(n, runs, 1)?,
    )?
    .clicks;
    let set = QuadratureSampleSet::from_clicks(&clicks, n, nu_, phi, "fock:1")?;

    let truth = DensityOnGrid::from_fn(Grid::covering(-10.0, 10.0, 0.05)?, fock1_quadrature_pdf);
    let blurred = convolve(&truth, s_s)?;
    let cdf = convolution_cdf(&truth, s_s)?;
    println!(
        "sigma_s = {s_s:.4}; modes of P*Spr: {}, dip {:.1}%",
        blurred.modes().len(),
        100.0 * blurred.dip_depth()
    );
    println!(
        "lattice KS {:.4} (bound {:.4})",
        set.ks_lattice(|x| cdf.eval(x)),
        kolmogorov_bound(0.95, runs)
    );

    let grid = Grid::covering(-5.0, 5.0, 0.05)?;
    let b = grid.step.max(set.lattice_step());
    let hist = histogram_density(&set.chi_values, grid, b)?;
    let rec = deconvolve(&hist, s_s + b * b, 1e-3)?;
    println!("# chi histogram deconvolved truth");
    for i in (0..rec.values.len()).step_by(5) {
        let x = rec.grid.x(i);
        println!(
            "{x:.2} {:.4} {:.4} {:.4}",
            hist.values[i],
            rec.values[i],
            fock1_quadrature_pdf(x)
        );
    }
    Ok(())
}
