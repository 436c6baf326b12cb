//! Instrumental variance against the number of atoms per series.
//!
//! cargo run --release --example sigma_s_sweep

use cqed_tomo::calibration::{sigma_s_sweep, CalibrationInput};

fn main() -> cqed_tomo::Result<()> {
    let atoms: Vec<usize> = (300..=1000).step_by(100).collect();
    let rows = sigma_s_sweep(&CalibrationInput::default(), &atoms, &[1, 2, 3, 4, 5], None)?;
    println!("# n mu sigma sigma_s accepted");
    for r in rows {
        println!(
            "{} {:.2} {:.4} {:.4} {:.2}",
            r.atoms, r.mu, r.sigma, r.sigma_s, r.accepted_fraction
        );
    }
    Ok(())
}
