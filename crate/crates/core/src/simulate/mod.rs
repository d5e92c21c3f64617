//! Exact thinning simulation and the Poisson-embedding coupler.
//!
//! Between events the excitation `Σ h(t − τ)` can only decrease (h is
//! non-increasing) and `λ` is non-decreasing, so the intensity evaluated just
//! after the latest event dominates the path until the next one. The thinning
//! loop uses that value as its bound and asserts the domination on every
//! candidate.

mod compensator;
mod coupling;
mod excitation;

pub use compensator::{Compensator, QUADRATURE_TOLERANCE};
pub use coupling::{simulate_coupled, CoupledPair, PlanarPoisson, BAND_WIDTH};

use crate::model::{HawkesModel, History, ModelError};
use crate::rng::{substream, StreamRng};
use excitation::Excitation;
use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

/// Step of the grid on which burn-in lengths are chosen.
pub const BURNIN_GRID_STEP: f64 = 0.01;
/// Largest burn-in length accepted before reporting a configuration error.
pub const BURNIN_CAP: f64 = 1.0e5;
/// Threshold of the optional pruning of far-past events.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("horizon must be finite and > 0, got {0}")]
    InvalidHorizon(f64),
    #[error("epsilon must be finite and > 0, got {0}")]
    InvalidEpsilon(f64),
    #[error("burn-in for epsilon = {epsilon} exceeds the cap of {cap} time units")]
    BurninCap { epsilon: f64, cap: f64 },
    #[error("invalid event sequence: {0}")]
    InvalidEvents(String),
}

/// Event times on `(0, T]` together with the history they were conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    history: Vec<f64>,
    times: Vec<f64>,
    horizon: f64,
}

impl EventSequence {
    pub fn new(history: History, times: Vec<f64>, horizon: f64) -> Result<Self, SimulationError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(SimulationError::InvalidHorizon(horizon));
        }
        if times.iter().any(|&t| !(t > 0.0 && t <= horizon)) {
            return Err(SimulationError::InvalidEvents(format!("event times must lie in (0, {horizon}]")));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimulationError::InvalidEvents("event times must be strictly increasing".into()));
        }
        Ok(EventSequence { history: history.times().to_vec(), times, horizon })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn history_depth(&self) -> f64 {
        self.history.first().map_or(0.0, |t| -t)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `N(0, t]`
    pub fn count_to(&self, t: f64) -> usize {
        self.times.partition_point(|&e| e <= t)
    }

    /// `N(a, b]`
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.count_to(b).saturating_sub(self.count_to(a))
    }
}

/// Where the compensator is tabulated in a [`SimulationOutput`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CompensatorGrid {
    /// `t = 0, 1, …, ⌊T⌋`
    #[default]
    UnitStep,
    /// `n ≥ 2` equally spaced points from 0 to T inclusive.
    Uniform(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulationOptions {
    pub grid: CompensatorGrid,
    /// Drop past events whose kernel weight fell below this value. Off by
    /// default; enabling it biases the intensity downward.
    pub prune_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub events: EventSequence,
    /// `(t, Λ(t))` on the configured grid.
    pub compensator_grid: Vec<(f64, f64)>,
    /// Left-limit intensity `λ(τ−)` at each event.
    pub intensity_at_events: Vec<f64>,
    /// `Λ(τ)` at each event.
    pub compensator_at_events: Vec<f64>,
}

impl SimulationOutput {
    pub fn compensator<'a>(&'a self, model: &'a HawkesModel) -> Compensator<'a> {
        Compensator::new(model, &self.events)
    }

    /// Time-rescaled inter-arrival gaps, i.i.d. Exp(1) under the model.
    pub fn rescaled_gaps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.compensator_at_events
            .iter()
            .map(|&c| {
                let gap = c - prev;
                prev = c;
                gap
            })
            .collect()
    }
}

/// Dominating intensity for thinning: `λ(excitation)` evaluated just after
/// the most recent event.
#[inline]
pub fn thinning_bound(model: &HawkesModel, excitation_sum: f64) -> f64 {
    model.intensity(excitation_sum)
}

/// Simulates on `(0, T]` given `history`, drawing from substream 0 of `seed`.
pub fn simulate(
    model: &HawkesModel,
    history: &History,
    horizon: f64,
    seed: u64,
) -> Result<SimulationOutput, SimulationError> {
    let mut rng = substream(seed, 0);
    simulate_with_rng(model, history, horizon, &mut rng, &SimulationOptions::default())
}

pub fn simulate_with_rng<R: Rng + ?Sized>(
    model: &HawkesModel,
    history: &History,
    horizon: f64,
    rng: &mut R,
    options: &SimulationOptions,
) -> Result<SimulationOutput, SimulationError> {
    check_horizon(horizon)?;
    let times = thin(model, history.times(), horizon, rng, options.prune_threshold);
    let events = EventSequence::new(history.clone(), times, horizon)?;
    Ok(finish(model, events, options))
}

/// Simulates from the empty configuration on `(0, B + T]`, then relabels the
/// first `B` time units as history so the returned path approximates the
/// stationary regime on `(0, T]`.
pub fn simulate_stationary<R: Rng + ?Sized>(
    model: &HawkesModel,
    horizon: f64,
    burnin: f64,
    rng: &mut R,
    options: &SimulationOptions,
) -> Result<SimulationOutput, SimulationError> {
    check_horizon(horizon)?;
    if !(burnin.is_finite() && burnin >= 0.0) {
        return Err(SimulationError::InvalidHorizon(burnin));
    }
    let raw = thin(model, &[], burnin + horizon, rng, options.prune_threshold);
    let split = raw.partition_point(|&t| t <= burnin);
    let mut past: Vec<f64> = raw[..split].iter().map(|&t| t - burnin).collect();
    past.dedup();
    let mut times: Vec<f64> = raw[split..].iter().map(|&t| t - burnin).filter(|&t| t > 0.0 && t <= horizon).collect();
    times.dedup();
    let events = EventSequence::new(History::new(past)?, times, horizon)?;
    Ok(finish(model, events, options))
}

/// Smallest burn-in `B` on a grid of step [`BURNIN_GRID_STEP`] with
/// `α/(1 − α‖h‖₁)·∫_B^∞ t·h(t) dt < ε`.
pub fn stationary_burnin(model: &HawkesModel, epsilon: f64) -> Result<f64, SimulationError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(SimulationError::InvalidEpsilon(epsilon));
    }
    let factor = model.rate().lipschitz() / model.stability_margin();
    let bound = |b: f64| -> Result<f64, SimulationError> { Ok(factor * model.kernel().tail_first_moment(b)?) };
    if bound(0.0)? < epsilon {
        return Ok(0.0);
    }
    let max_steps = (BURNIN_CAP / BURNIN_GRID_STEP).round() as u64;
    if bound(BURNIN_CAP)? >= epsilon {
        return Err(SimulationError::BurninCap { epsilon, cap: BURNIN_CAP });
    }
    // invariant: bound(lo) >= epsilon > bound(hi)
    let (mut lo, mut hi) = (0u64, max_steps);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid as f64 * BURNIN_GRID_STEP)? < epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi as f64 * BURNIN_GRID_STEP)
}

/// Replication `r` of a stationary run: stream `r` of `master`.
pub fn simulate_replication(
    model: &HawkesModel,
    horizon: f64,
    burnin: f64,
    master: u64,
    replication: usize,
    options: &SimulationOptions,
) -> Result<SimulationOutput, SimulationError> {
    let mut rng: StreamRng = substream(master, replication as u64);
    simulate_stationary(model, horizon, burnin, &mut rng, options)
}

fn check_horizon(horizon: f64) -> Result<(), SimulationError> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(SimulationError::InvalidHorizon(horizon))
    }
}

fn thin<R: Rng + ?Sized>(
    model: &HawkesModel,
    history: &[f64],
    horizon: f64,
    rng: &mut R,
    prune: Option<f64>,
) -> Vec<f64> {
    let mut excitation = Excitation::new(model.kernel(), history, prune);
    let mut events = Vec::new();
    let mut t = 0.0f64;
    loop {
        let bound = thinning_bound(model, excitation.value(t));
        let step: f64 = rng.sample(Exp1);
        let candidate = t + step / bound;
        if candidate > horizon {
            break;
        }
        // Only reachable if the Exp(1) draw underflows relative to t.
        if candidate <= t {
            continue;
        }
        t = candidate;
        let intensity = model.intensity(excitation.value(t));
        assert!(
            intensity <= bound * (1.0 + 1e-12),
            "thinning bound violated at t = {t}: intensity {intensity} > bound {bound}"
        );
        if rng.random::<f64>() * bound < intensity {
            events.push(t);
            excitation.record(t);
        }
    }
    events
}

fn finish(model: &HawkesModel, events: EventSequence, options: &SimulationOptions) -> SimulationOutput {
    let horizon = events.horizon();
    let (grid, intensity_at_events, compensator_at_events) = {
        let compensator = Compensator::new(model, &events);
        let points: Vec<f64> = match options.grid {
            CompensatorGrid::UnitStep => (0..=horizon.floor() as usize).map(|i| i as f64).collect(),
            CompensatorGrid::Uniform(n) => {
                let n = n.max(2);
                (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect()
            }
        };
        let grid: Vec<(f64, f64)> = points.into_iter().map(|t| (t, compensator.at(t))).collect();
        (grid, compensator.intensity_at_events().to_vec(), compensator.at_events().to_vec())
    };
    let base = model.rate().base();
    assert!(intensity_at_events.iter().all(|&l| l >= base * (1.0 - 1e-12)), "intensity fell below lambda(0)");
    SimulationOutput { events, compensator_grid: grid, intensity_at_events, compensator_at_events }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Kernel, RateFunction};
    use approx::assert_relative_eq;

    fn linear_model() -> HawkesModel {
        HawkesModel::new(Kernel::exponential(1.0, 2.0).unwrap(), RateFunction::linear(1.0).unwrap()).unwrap()
    }

    #[test]
    fn thinning_bound_values() {
        let m = linear_model();
        assert_eq!(thinning_bound(&m, 0.0), 1.0);
        assert_eq!(thinning_bound(&m, 3.0), 4.0);
        let sat = HawkesModel::new(Kernel::exponential(1.0, 1.0).unwrap(), RateFunction::saturating(0.5, 0.4).unwrap())
            .unwrap();
        assert_relative_eq!(thinning_bound(&sat, 1.0), 0.7);
    }

    #[test]
    fn burnin_values() {
        let zero = HawkesModel::new(Kernel::zero(), RateFunction::linear(2.0).unwrap()).unwrap();
        assert_eq!(stationary_burnin(&zero, 1e-3).unwrap(), 0.0);
        let m = linear_model();
        // root of 2·∫_B^∞ t e^{-2t} dt = 1e-3 is 4.23094 (brentq on quadrature)
        let b = stationary_burnin(&m, 1e-3).unwrap();
        assert_relative_eq!(b, 4.24, epsilon = 1e-9);
        assert_eq!(stationary_burnin(&m, 1.0).unwrap(), 0.0);
        assert!(matches!(stationary_burnin(&m, 0.0), Err(SimulationError::InvalidEpsilon(_))));
        let heavy =
            HawkesModel::new(Kernel::power_law(0.1, 2.05, 1.0).unwrap(), RateFunction::linear(1.0).unwrap()).unwrap();
        assert!(matches!(stationary_burnin(&heavy, 1e-9), Err(SimulationError::BurninCap { .. })));
    }

    #[test]
    fn events_strictly_increase_and_respect_horizon() {
        let m = linear_model();
        for seed in 0..20 {
            let out = simulate(&m, &History::empty(), 50.0, seed).unwrap();
            let t = out.events.times();
            assert!(t.windows(2).all(|w| w[0] < w[1]));
            assert!(t.iter().all(|&x| x > 0.0 && x <= 50.0));
            assert_eq!(out.compensator_grid.len(), 51);
            assert_eq!(out.compensator_grid[0], (0.0, 0.0));
            assert!(out.compensator_grid.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let m = linear_model();
        let h = History::new(vec![-0.5, -0.1]).unwrap();
        let a = simulate(&m, &h, 100.0, 99).unwrap();
        let b = simulate(&m, &h, 100.0, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &h, 100.0, 100).unwrap();
        assert_ne!(a.events.times(), c.events.times());
    }

    #[test]
    fn rejects_bad_horizon() {
        let m = linear_model();
        assert!(simulate(&m, &History::empty(), 0.0, 1).is_err());
        assert!(simulate(&m, &History::empty(), f64::NAN, 1).is_err());
    }

    #[test]
    fn stationary_split_moves_burnin_into_history() {
        let m = linear_model();
        let mut rng = substream(5, 0);
        let out = simulate_stationary(&m, 20.0, 6.0, &mut rng, &SimulationOptions::default()).unwrap();
        assert!(out.events.history().iter().all(|&t| t <= 0.0 && t > -6.0));
        assert!(!out.events.history().is_empty());
        assert!(out.events.history_depth() <= 6.0);
    }

    #[test]
    fn power_law_compensator_matches_brute_force() {
        let m =
            HawkesModel::new(Kernel::power_law(0.5, 3.0, 1.0).unwrap(), RateFunction::saturating(0.8, 0.6).unwrap())
                .unwrap();
        let h = History::new(vec![-1.0, -0.3]).unwrap();
        let out = simulate(&m, &h, 15.0, 3).unwrap();
        let all: Vec<f64> = h.times().iter().chain(out.events.times()).copied().collect();
        let intensity = |s: f64| {
            let z: f64 = all.iter().filter(|&&tau| tau < s).map(|&tau| m.kernel().value(s - tau)).sum();
            m.intensity(z)
        };
        let n = 300_000;
        let dt = 15.0 / n as f64;
        let brute: f64 = (0..n).map(|i| intensity((i as f64 + 0.5) * dt) * dt).sum();
        let last = out.compensator_grid.last().unwrap();
        assert_eq!(last.0, 15.0);
        assert_relative_eq!(last.1, brute, max_relative = 1e-4);
    }

    #[test]
    fn pruning_keeps_paths_close() {
        let m =
            HawkesModel::new(Kernel::power_law(0.25, 3.0, 0.5).unwrap(), RateFunction::linear(1.0).unwrap()).unwrap();
        let options = SimulationOptions { prune_threshold: Some(DEFAULT_PRUNE_THRESHOLD), ..Default::default() };
        let mut r1 = substream(11, 0);
        let mut r2 = substream(11, 0);
        let pruned = simulate_with_rng(&m, &History::empty(), 30.0, &mut r1, &options).unwrap();
        let full = simulate_with_rng(&m, &History::empty(), 30.0, &mut r2, &SimulationOptions::default()).unwrap();
        // weights below 1e-12 never flip an acceptance at this scale
        assert_eq!(pruned.events.times(), full.events.times());
    }
}
