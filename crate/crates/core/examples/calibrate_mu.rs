//! Fit the phenomenological factor mu on a simulated calibration run and
//! print the Kolmogorov comparison.
//!
//! cargo run --release --example calibrate_mu -- [seed]

use cqed_tomo::calibration::{calibration_samples, fit_mu, BinomialCdf, CalibrationInput, ClickCdf};

fn main() -> cqed_tomo::Result<()> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let input = CalibrationInput::default();
    let clicks = calibration_samples(&input, None, seed)?;
    let fit = fit_mu(&clicks, &input)?;
    println!(
        "mu = {:.2}  nu = {:.6}  p_bar = {:.4}  sigma = {:.4}  sigma_s = {:.4}",
        fit.mu, fit.nu, fit.p_bar, fit.sigma, fit.sigma_s
    );
    println!(
        "D = {:.4}, bound = {:.4} -> {}",
        fit.ks_statistic,
        fit.ks_bound,
        if fit.accepted { "accepted" } else { "rejected" }
    );

    let sample = ClickCdf::new(&clicks, input.atoms)?;
    let theory = BinomialCdf::new(input.atoms, fit.p_bar);
    println!("# m sample_cdf theory_cdf");
    for m in (80..=160).step_by(5) {
        println!("{m} {:.4} {:.4}", sample.eval(m as f64), theory.eval(m as f64));
    }
    Ok(())
}
