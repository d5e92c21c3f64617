use super::excitation::excitation_through;
use super::EventSequence;
use crate::model::{HawkesModel, KernelFamily};
use crate::quadrature::adaptive_simpson;

/// Absolute tolerance for one inter-event quadrature piece.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

/// Exact evaluator of `Λ(t) = ∫₀^t λ_s ds` for a realized event sequence.
///
/// Closed form between events for exponential and zero kernels; adaptive
/// quadrature otherwise.
#[derive(Debug, Clone)]
pub struct Compensator<'a> {
    model: &'a HawkesModel,
    events: &'a EventSequence,
    /// `Λ(τ_k)` for every event.
    cumulative: Vec<f64>,
    /// Excitation just after each event (exponential kernels only).
    post_state: Vec<f64>,
    initial_state: f64,
    /// `λ(τ_k−)` for every event.
    intensity_left: Vec<f64>,
}

impl<'a> Compensator<'a> {
    pub fn new(model: &'a HawkesModel, events: &'a EventSequence) -> Self {
        let times = events.times();
        let history = events.history();
        let kernel = model.kernel();
        let mut cumulative = Vec::with_capacity(times.len());
        let mut intensity_left = Vec::with_capacity(times.len());
        let mut post_state = Vec::new();
        let mut initial_state = 0.0;
        match kernel.family() {
            KernelFamily::Zero => {
                let base = model.rate().base();
                for &tau in times {
                    cumulative.push(base * tau);
                    intensity_left.push(base);
                }
            }
            KernelFamily::Exponential { a, b } => {
                initial_state = history.iter().map(|&tau| a * (b * tau).exp()).sum();
                post_state.reserve(times.len());
                let (mut prev, mut state, mut total) = (0.0, initial_state, 0.0);
                for &tau in times {
                    let dt = tau - prev;
                    total += model.rate().integral_along_decay(state, b, dt);
                    let left = state * (-b * dt).exp();
                    intensity_left.push(model.intensity(left));
                    cumulative.push(total);
                    state = left + a;
                    post_state.push(state);
                    prev = tau;
                }
            }
            KernelFamily::PowerLaw { .. } => {
                let mut total = 0.0;
                let mut prev = 0.0;
                for (k, &tau) in times.iter().enumerate() {
                    total += generic_piece(model, history, &times[..k], prev, tau);
                    let left = excitation_through(kernel, history, tau)
                        + times[..k].iter().map(|&s| kernel.value(tau - s)).sum::<f64>();
                    intensity_left.push(model.intensity(left));
                    cumulative.push(total);
                    prev = tau;
                }
            }
        }
        Compensator { model, events, cumulative, post_state, initial_state, intensity_left }
    }

    /// `Λ(t)` for `0 ≤ t`; events beyond the horizon are unknown, so `t`
    /// should not exceed it.
    pub fn at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let times = self.events.times();
        let k = times.partition_point(|&e| e <= t);
        let (t0, base) = if k == 0 { (0.0, 0.0) } else { (times[k - 1], self.cumulative[k - 1]) };
        let dt = t - t0;
        let piece = match self.model.kernel().family() {
            KernelFamily::Zero => self.model.rate().base() * dt,
            KernelFamily::Exponential { b, .. } => {
                let state = if k == 0 { self.initial_state } else { self.post_state[k - 1] };
                self.model.rate().integral_along_decay(state, b, dt)
            }
            KernelFamily::PowerLaw { .. } => generic_piece(self.model, self.events.history(), &times[..k], t0, t),
        };
        base + piece
    }

    pub fn at_events(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn intensity_at_events(&self) -> &[f64] {
        &self.intensity_left
    }

    /// Time-rescaled inter-arrival gaps `Λ(τ_{k+1}) − Λ(τ_k)`, starting from
    /// `Λ(0) = 0`. Under the model these are i.i.d. Exp(1).
    pub fn rescaled_gaps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let gap = c - prev;
                prev = c;
                gap
            })
            .collect()
    }
}

/// `∫_{t0}^{t1} λ(excitation(s)) ds` where the excitation counts history and
/// `past` (all events ≤ t0).
fn generic_piece(model: &HawkesModel, history: &[f64], past: &[f64], t0: f64, t1: f64) -> f64 {
    let kernel = model.kernel();
    let integrand = |s: f64| {
        let z = history.iter().map(|&tau| kernel.value(s - tau)).sum::<f64>()
            + past.iter().map(|&tau| kernel.value(s - tau)).sum::<f64>();
        model.intensity(z)
    };
    adaptive_simpson(&integrand, t0, t1, QUADRATURE_TOLERANCE)
}
