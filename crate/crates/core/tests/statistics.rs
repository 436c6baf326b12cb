//! Monte Carlo statistics against exact references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cqed_tomo::calibration::{fit_mu, sigma_s_sweep, CalibrationInput};
use cqed_tomo::fock::{coherent_state, default_dim, fock_state, DensityMatrix, C64};
use cqed_tomo::measurement::{
    build_kraus, detection_probabilities, enumerate_integrated_probability, InteractionParams,
};
use cqed_tomo::trajectory::{probability_tracks, run_ensemble, InitialState, RunConfig};

fn within_se(p: f64, f: f64, runs: usize, k: f64) -> bool {
    (p - f).abs() <= k * (p * (1.0 - p) / runs as f64).sqrt() + 1e-12
}

#[test]
fn single_atom_frequency_matches_first_click_probability() {
    let dim = default_dim(2.0);
    let psi = coherent_state(C64::from_polar(2.0, 0.4), dim).unwrap();
    let kp = build_kraus(InteractionParams::new(0.1, -0.8, dim).unwrap());
    let (_, p1) = detection_probabilities(&DensityMatrix::from_pure(&psi), &kp);
    let runs = 100_000;
    let freq = run_ensemble(&InitialState::Pure(psi), &kp, &RunConfig::new(1, runs, 7).unwrap())
        .unwrap()
        .click_frequencies(1);
    assert!(within_se(p1, freq[1], runs, 4.0), "{p1} vs {}", freq[1]);
}

#[test]
fn two_atoms_match_enumeration_for_a_mixed_state() {
    let rho = DensityMatrix::mixture(&[(0.3, fock_state(0, 6).unwrap()), (0.7, fock_state(2, 6).unwrap())]).unwrap();
    let kp = build_kraus(InteractionParams::new(0.4, 0.3, 6).unwrap());
    let exact = enumerate_integrated_probability(&rho, &kp, 2).unwrap();
    let runs = 100_000;
    let freq = run_ensemble(&InitialState::Mixed(rho), &kp, &RunConfig::new(2, runs, 11).unwrap())
        .unwrap()
        .click_frequencies(2);
    for (p, f) in exact.iter().zip(&freq) {
        assert!(within_se(*p, *f, runs, 4.0), "{exact:?} vs {freq:?}");
    }
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let psi = fock_state(1, 2).unwrap();
    let kp = build_kraus(InteractionParams::new(0.04, -2.356, 2).unwrap());
    let cfg = RunConfig::new(200, 500, 99).unwrap();
    let run = |t| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .unwrap()
            .install(|| {
                run_ensemble(&InitialState::Pure(psi.clone()), &kp, &cfg)
                    .unwrap()
                    .clicks
            })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn coherent_tracks_stay_near_their_start_and_fock_tracks_relax() {
    // For a strong coherent field a few hundred weak measurements barely
    // move the click probability; a single photon is driven towards an
    // eigenstate of the measured quadrature, so its track wanders.
    let dim = default_dim(3.0);
    let coh = InitialState::Pure(coherent_state(C64::from_polar(3.0, 0.785), dim).unwrap());
    let kp = build_kraus(InteractionParams::new(0.04, -2.356, dim).unwrap());
    let tracks = probability_tracks(&coh, &kp, 300, &[1, 2, 3]).unwrap();
    for t in &tracks {
        assert_eq!(t.len(), 300);
        let spread = t.iter().cloned().fold(f64::MIN, f64::max) - t.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.05, "coherent spread {spread}");
    }
    let fock = InitialState::Pure(fock_state(1, 2).unwrap());
    let kp2 = build_kraus(InteractionParams::new(0.04, -2.356, 2).unwrap());
    let tracks = probability_tracks(&fock, &kp2, 300, &[1, 2, 3, 4, 5]).unwrap();
    for t in &tracks {
        assert!((t[0] - 0.5).abs() < 1e-12);
    }
    let moved = tracks.iter().filter(|t| (t[299] - 0.5).abs() > 0.01).count();
    assert!(moved >= 3, "only {moved} Fock tracks left 1/2");
}

fn synthetic_clicks(n: usize, runs: usize, p: f64, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..runs)
        .map(|_| (0..n).filter(|_| rng.random::<f64>() < p).count())
        .collect()
}

#[test]
fn binomial_samples_are_accepted_at_the_nominal_rate() {
    let input = CalibrationInput::default();
    let p = input.evaluate(0.76).unwrap().p_bar;
    let seeds = 200;
    let accepted = (0..seeds)
        .filter(|&s| {
            fit_mu(&synthetic_clicks(input.atoms, input.runs, p, 500 + s), &input)
                .unwrap()
                .accepted
        })
        .count();
    assert!(
        accepted as f64 / seeds as f64 >= input.alpha - 0.03,
        "{accepted}/{seeds}"
    );
}

#[test]
fn fit_recovers_the_generating_mu() {
    let input = CalibrationInput {
        runs: 20_000,
        ..CalibrationInput::default()
    };
    for mu in [0.36, 0.76] {
        let p = input.evaluate(mu).unwrap().p_bar;
        let fit = fit_mu(&synthetic_clicks(input.atoms, input.runs, p, 3), &input).unwrap();
        assert!((fit.mu - mu).abs() <= input.mu_grid.step + 1e-9, "{mu} -> {}", fit.mu);
        assert!(fit.accepted);
    }
}

#[test]
fn instrumental_variance_falls_with_atom_number() {
    let rows = sigma_s_sweep(&CalibrationInput::default(), &[300, 600, 1000], &[1, 2, 3], None).unwrap();
    assert!(rows.windows(2).all(|w| w[1].sigma_s < w[0].sigma_s));
    assert!((rows[0].sigma_s - 0.845).abs() < 0.06, "{:?}", rows[0]);
    assert!(rows.iter().all(|r| r.accepted_fraction > 0.5));
}
