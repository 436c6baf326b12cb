//! Seeded Monte Carlo over sequences of probe atoms.
//!
//! Each trajectory draws its outcomes from its own ChaCha8 stream: the
//! generator is seeded with the run's `master_seed` and switched to stream
//! number `trajectory index`. Streams never overlap, so an ensemble is a pure
//! function of `(initial state, Kraus pair, RunConfig)` no matter how many
//! threads execute it or in which order trajectories finish.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, StateVector, C64, DEGENERATE_TRACE};
use crate::measurement::{KrausPair, Outcome};

/// Ensemble settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Probe atoms per experiment (`n`).
    pub atoms: usize,
    /// Number of repeated experiments (`N`).
    pub runs: usize,
    pub master_seed: u64,
    /// Keep every trajectory's outcomes and a-priori click probabilities.
    pub record_probability_track: bool,
}

impl RunConfig {
    pub fn new(atoms: usize, runs: usize, master_seed: u64) -> Result<Self> {
        if atoms == 0 || runs == 0 {
            return Err(Error::invalid(format!(
                "need at least one atom and one run, got n = {atoms}, N = {runs}"
            )));
        }
        Ok(Self {
            atoms,
            runs,
            master_seed,
            record_probability_track: false,
        })
    }

    pub fn recording(mut self, record: bool) -> Self {
        self.record_probability_track = record;
        self
    }
}

/// One simulated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub outcomes: Vec<Outcome>,
    /// Number of upper-level detections `m`.
    pub clicks: usize,
    /// Click probability before each draw, when recorded.
    pub p1_track: Option<Vec<f64>>,
}

/// Initial cavity state of an ensemble.
///
/// Pure states are propagated as state vectors, which is exact (Kraus maps
/// keep pure states pure) and costs `O(D)` per atom instead of `O(D^2)`.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Pure(psi) => psi.dim(),
            InitialState::Mixed(rho) => rho.dim(),
        }
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        match self {
            InitialState::Pure(psi) => DensityMatrix::from_pure(psi),
            InitialState::Mixed(rho) => rho.clone(),
        }
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        kp: &KrausPair,
        n: usize,
        rng: &mut R,
        record: bool,
    ) -> Result<TrajectoryRecord> {
        match self {
            InitialState::Pure(psi) => run_pure_trajectory(psi, kp, n, rng, record),
            InitialState::Mixed(rho) => run_trajectory(rho, kp, n, rng, record),
        }
    }
}

impl From<StateVector> for InitialState {
    fn from(psi: StateVector) -> Self {
        InitialState::Pure(psi)
    }
}

impl From<DensityMatrix> for InitialState {
    fn from(rho: DensityMatrix) -> Self {
        InitialState::Mixed(rho)
    }
}

/// Random stream of trajectory `index` within a run seeded by `master_seed`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Bernoulli draw on `u ~ U[0, 1)`; `u == p1` counts as a click.
fn draw<R: Rng + ?Sized>(p1: f64, rng: &mut R) -> Outcome {
    let u: f64 = rng.random();
    if p1 > 0.0 && u <= p1 {
        Outcome::Upper
    } else {
        Outcome::Lower
    }
}

fn check_dims(dim: usize, kp: &KrausPair) -> Result<()> {
    if dim != kp.dim() {
        return Err(Error::DimensionMismatch {
            expected: kp.dim(),
            got: dim,
        });
    }
    Ok(())
}

/// Runs `n` atoms through the cavity starting from `rho0`, reducing the
/// density matrix after every detection.
pub fn run_trajectory<R: Rng + ?Sized>(
    rho0: &DensityMatrix,
    kp: &KrausPair,
    n: usize,
    rng: &mut R,
    record: bool,
) -> Result<TrajectoryRecord> {
    check_dims(rho0.dim(), kp)?;
    let mut rho = rho0.matrix().clone();
    let mut outcomes = Vec::with_capacity(n);
    let mut track = record.then(|| Vec::with_capacity(n));
    let mut clicks = 0;
    for _ in 0..n {
        let p1 = kp.branch_probability(Outcome::Upper, &rho).clamp(0.0, 1.0);
        if let Some(t) = track.as_mut() {
            t.push(p1);
        }
        let outcome = draw(p1, rng);
        let sigma = kp.sandwich(outcome, &rho);
        let probability = sigma.trace().re;
        if !(probability > DEGENERATE_TRACE) {
            return Err(Error::ImpossibleOutcome { outcome, probability });
        }
        rho = fock::renormalize(sigma)?.matrix().clone();
        clicks += outcome.bit() as usize;
        outcomes.push(outcome);
    }
    Ok(TrajectoryRecord {
        outcomes,
        clicks,
        p1_track: track,
    })
}

type ApplyFn<'a> = dyn Fn(Outcome, &[C64], &mut [C64]) + 'a;

/// Same process as [`run_trajectory`] for a pure initial state.
pub fn run_pure_trajectory<R: Rng + ?Sized>(
    psi0: &StateVector,
    kp: &KrausPair,
    n: usize,
    rng: &mut R,
    record: bool,
) -> Result<TrajectoryRecord> {
    check_dims(psi0.dim(), kp)?;
    let dim = psi0.dim();
    let mut psi: Vec<C64> = psi0.amplitudes().iter().copied().collect();
    let mut upper = vec![C64::new(0.0, 0.0); dim];
    let mut lower = vec![C64::new(0.0, 0.0); dim];
    let mut outcomes = Vec::with_capacity(n);
    let mut track = record.then(|| Vec::with_capacity(n));
    let mut clicks = 0;

    // With the bidiagonal form the factor 1/sqrt(2) is applied to the norm.
    let (scale, apply): (f64, Box<ApplyFn>) = match kp.ladder() {
        Some(l) => (0.5, Box::new(move |o, v, out| l.apply_unscaled(o, v, out))),
        None => (1.0, Box::new(|o, v, out| kp.apply(o, v, out))),
    };
    let norm_sqr = |v: &[C64]| scale * v.iter().map(|z| z.norm_sqr()).sum::<f64>();

    for _ in 0..n {
        apply(Outcome::Upper, &psi, &mut upper);
        let p1 = norm_sqr(&upper).clamp(0.0, 1.0);
        if let Some(t) = track.as_mut() {
            t.push(p1);
        }
        let outcome = draw(p1, rng);
        let (branch, probability) = match outcome {
            Outcome::Upper => (&upper, p1),
            Outcome::Lower => {
                apply(Outcome::Lower, &psi, &mut lower);
                let p0 = norm_sqr(&lower);
                (&lower, p0)
            }
        };
        if !(probability > DEGENERATE_TRACE) {
            return Err(Error::ImpossibleOutcome { outcome, probability });
        }
        let norm = (probability / scale).sqrt();
        for (dst, src) in psi.iter_mut().zip(branch.iter()) {
            *dst = src / norm;
        }
        clicks += outcome.bit() as usize;
        outcomes.push(outcome);
    }
    Ok(TrajectoryRecord {
        outcomes,
        clicks,
        p1_track: track,
    })
}

/// Output of [`run_ensemble`], indexed by trajectory number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    /// Click counts `m_k`, `k = 0..N`.
    pub clicks: Vec<usize>,
    pub records: Option<Vec<TrajectoryRecord>>,
}

impl Ensemble {
    /// Relative frequency of each click count `0..=atoms`.
    pub fn click_frequencies(&self, atoms: usize) -> Vec<f64> {
        let mut freq = vec![0.0; atoms + 1];
        for &m in &self.clicks {
            freq[m] += 1.0;
        }
        let total = self.clicks.len() as f64;
        freq.iter_mut().for_each(|f| *f /= total);
        freq
    }
}

/// Runs `config.runs` independent experiments in parallel.
pub fn run_ensemble(initial: &InitialState, kp: &KrausPair, config: &RunConfig) -> Result<Ensemble> {
    if config.atoms == 0 || config.runs == 0 {
        return Err(Error::invalid("ensemble needs at least one atom and one run"));
    }
    check_dims(initial.dim(), kp)?;
    let records: Vec<TrajectoryRecord> = (0..config.runs as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = trajectory_rng(config.master_seed, index);
            initial.run(kp, config.atoms, &mut rng, config.record_probability_track)
        })
        .collect::<Result<_>>()?;
    let clicks = records.iter().map(|r| r.clicks).collect();
    Ok(Ensemble {
        clicks,
        records: config.record_probability_track.then_some(records),
    })
}

/// A-priori click probability along one trajectory per seed; trajectory `i`
/// uses stream 0 of `seeds[i]`.
pub fn probability_tracks(initial: &InitialState, kp: &KrausPair, n: usize, seeds: &[u64]) -> Result<Vec<Vec<f64>>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = trajectory_rng(seed, 0);
            let rec = initial.run(kp, n, &mut rng, true)?;
            Ok(rec.p1_track.unwrap_or_default())
        })
        .collect()
}
