//! Poisson-embedding coupler.
//!
//! Both processes are read off one unit-rate Poisson measure on
//! `(0, T] × [0, ∞)`. The empty-history process `N⁰` keeps the points lying
//! below its own intensity curve. Layer `n ≥ 1` adds the points whose mark
//! falls in `[λ^{n−1}_t, λⁿ_t)`, where `λⁿ` is the intensity generated by
//! `N^{n−1}` plus the history. Layers increase in `n`, so every base event is
//! an augmented event.

use super::excitation::{excitation_before, excitation_through, Excitation};
use super::{check_horizon, EventSequence, SimulationError};
use crate::model::{HawkesModel, History};
use crate::rng::{derive_seed, substream};
use rand::Rng;
use rand_distr::Exp1;

/// Mark height of one lazily generated horizontal band.
pub const BAND_WIDTH: f64 = 1.0;

/// A unit-rate planar Poisson measure on `(0, T] × [0, ∞)`, generated lazily
/// in horizontal bands of height [`BAND_WIDTH`]. Band `k` is drawn from its
/// own substream, so the realization does not depend on how far up it was
/// ever explored.
#[derive(Debug, Clone)]
pub struct PlanarPoisson {
    seed: u64,
    horizon: f64,
    bands: Vec<Vec<(f64, f64)>>,
}

impl PlanarPoisson {
    pub fn new(seed: u64, horizon: f64) -> Self {
        PlanarPoisson { seed: derive_seed(seed, 0xC0_0B1E), horizon, bands: Vec::new() }
    }

    /// Generates bands until marks up to `height` are covered.
    pub fn ensure(&mut self, height: f64) {
        let needed = (height / BAND_WIDTH).ceil().max(1.0) as usize;
        while self.bands.len() < needed {
            let k = self.bands.len();
            let mut rng = substream(self.seed, k as u64);
            let floor = k as f64 * BAND_WIDTH;
            let mut t = 0.0;
            let mut band = Vec::new();
            loop {
                let step: f64 = rng.sample(Exp1);
                t += step / BAND_WIDTH;
                if t > self.horizon {
                    break;
                }
                band.push((t, floor + BAND_WIDTH * rng.random::<f64>()));
            }
            self.bands.push(band);
        }
    }

    /// Earliest point with time `> after` and mark `< height`.
    fn next_below(&mut self, after: f64, height: f64) -> Option<(f64, f64)> {
        self.ensure(height);
        let mut best: Option<(f64, f64)> = None;
        for (k, band) in self.bands.iter().enumerate() {
            if k as f64 * BAND_WIDTH >= height {
                break;
            }
            let start = band.partition_point(|p| p.0 <= after);
            if let Some(&p) = band[start..].iter().find(|p| p.1 < height) {
                if best.is_none_or(|b| p.0 < b.0) {
                    best = Some(p);
                }
            }
        }
        best
    }

    /// All generated points with mark `< height`, in band order.
    fn points_below(&mut self, height: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ensure(height);
        self.bands.iter().flatten().copied().filter(move |p| p.1 < height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    /// Process started from the empty configuration.
    pub base_events: EventSequence,
    /// Process started from the supplied history.
    pub augmented_events: EventSequence,
    pub shared_seed: u64,
    /// Number of layers `n ≥ 1` computed.
    pub layers: usize,
    /// `false` when `max_layers` was exhausted with a non-empty last layer.
    pub converged: bool,
}

impl CoupledPair {
    /// Exact inclusion `base ⊆ augmented`, comparing bit patterns.
    pub fn is_monotone(&self) -> bool {
        let aug = self.augmented_events.times();
        let mut j = 0;
        for &t in self.base_events.times() {
            while j < aug.len() && aug[j] < t {
                j += 1;
            }
            if j == aug.len() || aug[j].to_bits() != t.to_bits() {
                return false;
            }
            j += 1;
        }
        true
    }

    /// Excess counts `N(j, j+1] − N⁰(j, j+1]` on unit bins.
    pub fn gap_counts(&self, bins: usize) -> Vec<i64> {
        (0..bins)
            .map(|j| {
                let (a, b) = (j as f64, j as f64 + 1.0);
                self.augmented_events.count_in(a, b) as i64 - self.base_events.count_in(a, b) as i64
            })
            .collect()
    }

    /// Total excess count on `(0, T]`.
    pub fn total_gap(&self) -> usize {
        self.augmented_events.len() - self.base_events.len()
    }
}

/// Couples the empty-history process with the `history`-started process on
/// `(0, T]` through one planar Poisson measure identified by `seed`.
pub fn simulate_coupled(
    model: &HawkesModel,
    history: &History,
    horizon: f64,
    seed: u64,
    max_layers: usize,
) -> Result<CoupledPair, SimulationError> {
    check_horizon(horizon)?;
    let kernel = model.kernel();
    let hist = history.times();
    let mut plane = PlanarPoisson::new(seed, horizon);

    // N⁰: thinning of the plane below its own intensity curve.
    let mut base = Vec::new();
    let mut excitation = Excitation::new(kernel, &[], None);
    let mut t = 0.0;
    loop {
        let bound = model.intensity(excitation.value(t));
        let Some((s, mark)) = plane.next_below(t, bound) else {
            break;
        };
        let intensity = model.intensity(excitation.value(s));
        assert!(intensity <= bound * (1.0 + 1e-12), "coupler bound violated");
        if mark < intensity {
            base.push(s);
            excitation.record(s);
        }
        t = s;
    }

    let hist_at = |s: f64| excitation_before(kernel, hist, s);
    let mut previous: Option<Vec<f64>> = None;
    let mut current = base.clone();
    let mut layers = 0;
    let mut converged = hist.is_empty();
    while !converged && layers < max_layers {
        layers += 1;
        let upper = |s: f64| model.intensity(excitation_before(kernel, &current, s) + hist_at(s));
        let lower = |s: f64| match &previous {
            None => model.intensity(excitation_before(kernel, &current, s)),
            Some(prev) => model.intensity(excitation_before(kernel, prev, s) + hist_at(s)),
        };
        // The upper curve decreases between points of {0} ∪ current.
        let ceiling = std::iter::once(0.0)
            .chain(current.iter().copied())
            .map(|s| model.intensity(excitation_through(kernel, &current, s) + excitation_through(kernel, hist, s)))
            .fold(0.0f64, f64::max);
        let mut layer: Vec<f64> = plane
            .points_below(ceiling)
            .filter(|&(s, mark)| mark >= lower(s) && mark < upper(s))
            .map(|(s, _)| s)
            .collect();
        if layer.is_empty() {
            converged = true;
            break;
        }
        layer.sort_by(f64::total_cmp);
        let mut next = Vec::with_capacity(current.len() + layer.len());
        merge_sorted(&current, &layer, &mut next);
        previous = Some(std::mem::replace(&mut current, next));
    }

    Ok(CoupledPair {
        base_events: EventSequence::new(History::empty(), base, horizon)?,
        augmented_events: EventSequence::new(history.clone(), current, horizon)?,
        shared_seed: seed,
        layers,
        converged,
    })
}

fn merge_sorted(a: &[f64], b: &[f64], out: &mut Vec<f64>) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Kernel, RateFunction};

    fn linear() -> HawkesModel {
        HawkesModel::new(Kernel::exponential(1.0, 2.0).unwrap(), RateFunction::linear(1.0).unwrap()).unwrap()
    }

    #[test]
    fn empty_history_gives_identical_processes() {
        let pair = simulate_coupled(&linear(), &History::empty(), 30.0, 4, 50).unwrap();
        assert_eq!(pair.base_events.times(), pair.augmented_events.times());
        assert!(pair.gap_counts(30).iter().all(|&g| g == 0));
        assert!(pair.converged);
    }

    #[test]
    fn zero_kernel_ignores_history() {
        let m = HawkesModel::new(Kernel::zero(), RateFunction::linear(1.5).unwrap()).unwrap();
        let h = History::new(vec![-1e-9]).unwrap();
        let pair = simulate_coupled(&m, &h, 30.0, 4, 50).unwrap();
        assert_eq!(pair.base_events.times(), pair.augmented_events.times());
        assert_eq!(pair.layers, 1);
    }

    #[test]
    fn monotone_for_many_seeds() {
        let h = History::new(vec![-0.2, 0.0]).unwrap();
        for seed in 0..30 {
            let pair = simulate_coupled(&linear(), &h, 25.0, seed, 200).unwrap();
            assert!(pair.is_monotone());
            assert!(pair.converged);
            assert!(pair.gap_counts(25).iter().all(|&g| g >= 0));
        }
    }

    #[test]
    fn layer_cap_flags_truncation() {
        let h = History::new((0..40).map(|i| -(i as f64) * 0.01).rev().collect()).unwrap();
        let pair = simulate_coupled(&linear(), &h, 25.0, 1, 1).unwrap();
        assert_eq!(pair.layers, 1);
        assert!(!pair.converged);
    }

    #[test]
    fn planar_bands_do_not_depend_on_exploration_order() {
        let mut a = PlanarPoisson::new(9, 10.0);
        a.ensure(5.0);
        let mut b = PlanarPoisson::new(9, 10.0);
        b.ensure(1.0);
        b.ensure(5.0);
        assert_eq!(a.bands, b.bands);
    }
}
