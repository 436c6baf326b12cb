//! Exact click-count distribution by enumerating all 2^n outcome strings,
//! compared with a Monte Carlo ensemble.
//!
//! cargo run --release --example enumeration_oracle

use cqed_tomo::fock::{coherent_state, default_dim, fock_state, DensityMatrix, C64};
use cqed_tomo::measurement::{build_kraus, enumerate_integrated_probability, InteractionParams};
use cqed_tomo::trajectory::{run_ensemble, InitialState, RunConfig};

fn main() -> cqed_tomo::Result<()> {
    let n = 6;
    let runs = 100_000;
    let dim = default_dim(1.0);
    let rho = DensityMatrix::mixture(&[
        (0.5, fock_state(1, dim)?),
        (0.5, coherent_state(C64::from_polar(1.0, 0.5), dim)?),
    ])?;
    let kp = build_kraus(InteractionParams::new(0.2, 0.0, dim)?);
    let exact = enumerate_integrated_probability(&rho, &kp, n)?;
    let freq = run_ensemble(&InitialState::Mixed(rho), &kp, &RunConfig::new(n, runs, 1)?)?.click_frequencies(n);
    println!("# m exact monte_carlo z");
    for (m, (p, f)) in exact.iter().zip(&freq).enumerate() {
        let se = (p * (1.0 - p) / runs as f64).sqrt();
        println!("{m} {p:.5} {f:.5} {:+.2}", (f - p) / se);
    }
    Ok(())
}
