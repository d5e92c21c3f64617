use crate::model::{Kernel, KernelFamily};

/// Running excitation `Σ h(t − τ)` over recorded events `τ ≤ t`.
///
/// Exponential kernels use the one-state recursion; other kernels keep the
/// full event list. Queries must be made at non-decreasing times no earlier
/// than the last recorded event.
#[derive(Debug, Clone)]
pub(crate) enum Excitation<'a> {
    Zero,
    Exponential { a: f64, b: f64, state: f64, at: f64 },
    Sum { kernel: &'a Kernel, times: Vec<f64>, start: usize, prune: Option<f64> },
}

impl<'a> Excitation<'a> {
    /// Tracker positioned at time 0 with the given history (all `τ ≤ 0`).
    pub(crate) fn new(kernel: &'a Kernel, history: &[f64], prune: Option<f64>) -> Self {
        match kernel.family() {
            KernelFamily::Zero => Excitation::Zero,
            KernelFamily::Exponential { a, b } => {
                Excitation::Exponential { a, b, state: history.iter().map(|&tau| a * (b * tau).exp()).sum(), at: 0.0 }
            }
            KernelFamily::PowerLaw { .. } => Excitation::Sum { kernel, times: history.to_vec(), start: 0, prune },
        }
    }

    pub(crate) fn value(&mut self, t: f64) -> f64 {
        match self {
            Excitation::Zero => 0.0,
            Excitation::Exponential { b, state, at, .. } => *state * (-*b * (t - *at)).exp(),
            Excitation::Sum { kernel, times, start, prune } => {
                if let Some(threshold) = *prune {
                    while *start < times.len() && kernel.value(t - times[*start]) < threshold {
                        *start += 1;
                    }
                }
                times[*start..].iter().map(|&tau| kernel.value(t - tau)).sum()
            }
        }
    }

    pub(crate) fn record(&mut self, t: f64) {
        match self {
            Excitation::Zero => {}
            Excitation::Exponential { a, b, state, at } => {
                *state = *state * (-*b * (t - *at)).exp() + *a;
                *at = t;
            }
            Excitation::Sum { times, .. } => times.push(t),
        }
    }
}

/// `Σ_{τ ∈ events, τ < t} h(t − τ)` for a sorted slice.
pub(crate) fn excitation_before(kernel: &Kernel, events: &[f64], t: f64) -> f64 {
    let k = events.partition_point(|&e| e < t);
    events[..k].iter().map(|&tau| kernel.value(t - tau)).sum()
}

/// `Σ_{τ ∈ events, τ ≤ t} h(t − τ)` for a sorted slice.
pub(crate) fn excitation_through(kernel: &Kernel, events: &[f64], t: f64) -> f64 {
    let k = events.partition_point(|&e| e <= t);
    events[..k].iter().map(|&tau| kernel.value(t - tau)).sum()
}
