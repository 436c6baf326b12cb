//! First-click probability against |beta| for several phase offsets,
//! closed form beside the full matrix calculation.
//!
//! cargo run --example first_click_curve

use std::f64::consts::FRAC_PI_4;

use cqed_tomo::fock::{coherent_state, default_dim, DensityMatrix, C64};
use cqed_tomo::measurement::{
    build_kraus, detection_probabilities, first_click_probability, GammaMode, InteractionParams,
};

fn main() -> cqed_tomo::Result<()> {
    let (lambda_tau, phi) = (0.04, -3.0 * FRAC_PI_4);
    let dim = default_dim(3.0);
    let kp = build_kraus(InteractionParams::new(lambda_tau, phi, dim)?);
    println!("# beta_abs offset p1_closed p1_matrix");
    for k in 0..5 {
        let offset = k as f64 * FRAC_PI_4;
        for i in 0..=30 {
            let b = 0.1 * i as f64;
            let beta = C64::from_polar(b, phi + offset);
            let closed = first_click_probability(beta, kp.params(), GammaMode::Series);
            let (_, p1) = detection_probabilities(&DensityMatrix::from_pure(&coherent_state(beta, dim)?), &kp);
            println!("{b:.1} {offset:.4} {closed:.6} {p1:.6}");
        }
        println!();
    }
    Ok(())
}
