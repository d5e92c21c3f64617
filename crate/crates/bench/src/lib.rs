//! Fixtures shared by the benchmarks.

use nlhawkes::estimate::{bin_counts, CountSeries};
use nlhawkes::lil::{LilSequence, S2Profile};
use nlhawkes::model::{HawkesModel, History, Kernel, RateFunction};
use nlhawkes::simulate::simulate;

/// `λ(z) = 1 + z`, `h(t) = e^{−2t}`.
pub fn linear_model() -> HawkesModel {
    HawkesModel::new(Kernel::exponential(1.0, 2.0).unwrap(), RateFunction::linear(1.0).unwrap()).unwrap()
}

/// `λ(z) = 0.5 + 0.4·z/(1 + z)`, `h(t) = 0.5·(t + 1)^{−3}`.
pub fn power_law_model() -> HawkesModel {
    HawkesModel::new(Kernel::power_law(0.5, 3.0, 1.0).unwrap(), RateFunction::saturating(0.5, 0.4).unwrap()).unwrap()
}

/// Unit-bin counts of `replications` linear runs of length `horizon`.
pub fn linear_counts(horizon: usize, replications: usize) -> Vec<CountSeries> {
    let model = linear_model();
    (0..replications)
        .map(|r| {
            let out = simulate(&model, &History::empty(), horizon as f64, r as u64).unwrap();
            bin_counts(&out.events, 0.0, horizon).unwrap()
        })
        .collect()
}

/// Centered linear counts prepared for Strassen paths with the plug-in profile.
pub fn linear_lil_sequence(n: usize) -> LilSequence {
    let counts = linear_counts(n, 1);
    let x = counts[0].counts().iter().map(|&c| f64::from(c) - 2.0).collect();
    LilSequence::from_centered(x, &S2Profile::PlugIn { sigma2: 8.0 }).unwrap()
}
