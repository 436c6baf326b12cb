//! Click probability seen by each successive atom, for a coherent state and
//! for a single photon.
//!
//! cargo run --release --example probability_tracks -- [atoms]

use std::f64::consts::FRAC_PI_4;

use cqed_tomo::fock::{coherent_state, default_dim, fock_state, C64};
use cqed_tomo::measurement::{build_kraus, InteractionParams};
use cqed_tomo::trajectory::{probability_tracks, InitialState};

fn main() -> cqed_tomo::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(300);
    let phi = -3.0 * FRAC_PI_4;
    let seeds = [1, 2, 3, 4, 5];

    let dim = default_dim(3.0);
    let coherent = InitialState::Pure(coherent_state(C64::from_polar(3.0, FRAC_PI_4), dim)?);
    let single = InitialState::Pure(fock_state(1, 2)?);
    for (label, state) in [("coherent", coherent), ("fock1", single)] {
        let kp = build_kraus(InteractionParams::new(0.04, phi, state.dim())?);
        let tracks = probability_tracks(&state, &kp, n, &seeds)?;
        println!("# {label}: atom p1 per track");
        for k in (0..n).step_by((n / 30).max(1)) {
            let row: Vec<String> = tracks.iter().map(|t| format!("{:.4}", t[k])).collect();
            println!("{k} {}", row.join(" "));
        }
        println!();
    }
    Ok(())
}
