//! Detector registration models: premeasurement, channel-based state
//! reduction, screens, composite (EPR and intensity-correlation)
//! registrations, and a layered-detector track simulator.
//!
//! The shared currency is the [`EndState`]: an explicit statistical
//! decomposition over detector-signal branches. It is a list, never a
//! summed matrix — which mixture of preparations occurred is part of the
//! physics here.

mod bcl;
mod composite;
mod detector;
mod screen;
mod tracks;

pub use bcl::{bcl_premeasure, BCLModel, Premeasurement};
pub use composite::{
    epr_end_state, hbt_correlation, hbt_correlation_via_projectors, hbt_register, singlet,
    EprDetectors, HbtAmplitudes,
};
pub use detector::{
    nonideal_end_state, reduce_fixed_array, reduce_flexible, reduce_state, release_end_state,
    ChannelFamily, DetectorSpec, NoSignalSector, SignalMode,
};
pub use screen::{screen_reduce, ScreenSpec};
pub use tracks::{simulate_tracks, straightness_fraction, TrackConfig};

use crate::qcore::{DecomposableState, StateOperator, WeightedComponent};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Branches below this weight are dropped before normalizing by `p_m`.
pub const BRANCH_THRESHOLD: f64 = 1e-14;

/// The signal record of one end-state branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Signal {
    /// No sub-detector fired.
    None,
    /// The listed sub-detectors fired (one entry for simple detectors,
    /// two for coincidence branches).
    Fired(Vec<usize>),
}

/// One branch of a registration end state.
#[derive(Debug, Clone)]
pub struct EndComponent {
    pub weight: f64,
    pub state: StateOperator,
    pub signal: Signal,
    /// Separation-status bookkeeping: which sector the branch lives in
    /// ("swallowed", "released", "through", "no-signal", ...). Tags only,
    /// no computational role.
    pub separation_status: Option<String>,
}

impl EndComponent {
    pub fn new(weight: f64, state: StateOperator, signal: Signal) -> Self {
        Self {
            weight,
            state,
            signal,
            separation_status: None,
        }
    }

    pub fn with_status(mut self, status: &str) -> Self {
        self.separation_status = Some(status.to_string());
        self
    }
}

/// A registration end state: the statistical decomposition over signal
/// branches. Components may live on different spaces (their branch's own
/// sector).
#[derive(Debug, Clone)]
pub struct EndState {
    pub components: Vec<EndComponent>,
}

impl EndState {
    pub fn new(components: Vec<EndComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Validation("end state has no branches".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "end-state weights sum to {total}, not 1"
            )));
        }
        if components.iter().any(|c| c.weight < 0.0) {
            return Err(Error::Validation("negative branch weight".into()));
        }
        Ok(Self { components })
    }

    /// View as a plain decomposable state (weights and states only).
    pub fn decomposition(&self) -> Result<DecomposableState> {
        DecomposableState::new(
            self.components
                .iter()
                .map(|c| WeightedComponent {
                    weight: c.weight,
                    state: c.state.clone(),
                })
                .collect(),
        )
    }

    /// Draw `n` branch indices with the component weights.
    pub fn sample_components(&self, n: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cumulative = Vec::with_capacity(self.components.len());
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            cumulative.push(acc);
        }
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(self.components.len() - 1)
            })
            .collect()
    }

    /// Empirical branch frequencies from `n` draws.
    pub fn sampled_frequencies(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut counts = vec![0usize; self.components.len()];
        for idx in self.sample_components(n, seed) {
            counts[idx] += 1;
        }
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }
}
