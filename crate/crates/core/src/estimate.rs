//! Long-run mean and variance of unit-bin counts.
//!
//! The variance constant of the central limit theorem is the autocovariance
//! series of `N[j, j+1]`:
//!
//! ```text
//! σ² = γ₀ + 2 Σ_{j≥1} γ_j,    γ_j = Cov(N[0,1], N[j,j+1])
//! ```
//!
//! Two estimators are provided: the truncated series with pooled
//! autocovariances, and non-overlapping batch means. They share no code path
//! beyond the grand mean, so their agreement is a meaningful check.

use crate::model::HawkesModel;
use crate::simulate::EventSequence;
use crate::stats::{mean, ols_slope};
use serde::Serialize;
use thiserror::Error;

/// Minimum number of pooled counts for a tail diagnostic.
pub const TAIL_MIN_COUNTS: usize = 10_000;
/// Survival points need at least this many exceedances to enter the fit.
pub const TAIL_MIN_EXCEEDANCES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("range error: events cover (0, {horizon}] but bins need up to {needed}")]
    Range { horizon: f64, needed: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate variance: truncated series sums to {0}")]
    DegenerateVariance(f64),
    #[error("stability violation: |h|_1 = {0} >= 1")]
    StabilityViolation(f64),
}

/// Counts `N(start + j, start + j + 1]` for `j = 0..m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountSeries {
    counts: Vec<u32>,
}

impl CountSeries {
    pub fn new(counts: Vec<u32>) -> Self {
        CountSeries { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    fn as_f64(&self) -> impl Iterator<Item = f64> + '_ {
        self.counts.iter().map(|&c| c as f64)
    }
}

pub fn bin_counts(events: &EventSequence, start: f64, m: usize) -> Result<CountSeries, EstimateError> {
    if m == 0 {
        return Err(EstimateError::InvalidArgument("m must be >= 1".into()));
    }
    if !(start >= 0.0) {
        return Err(EstimateError::InvalidArgument(format!("start must be >= 0, got {start}")));
    }
    let needed = start + m as f64;
    if events.horizon() < needed {
        return Err(EstimateError::Range { horizon: events.horizon(), needed });
    }
    let mut counts = vec![0u32; m];
    for &t in events.times() {
        let x = t - start;
        if x <= 0.0 || x > m as f64 {
            continue;
        }
        // τ ∈ (start + j, start + j + 1]  ⇔  j = ⌈x⌉ − 1
        let j = x.ceil() as usize - 1;
        counts[j] += 1;
    }
    Ok(CountSeries { counts })
}

/// How many autocovariance lags enter the `σ²` series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TruncationPolicy {
    /// Stop at the first lag `j` where `|γ_j|, |γ_{j+1}|, |γ_{j+2}|` all fall
    /// below two standard errors, never beyond `cap`.
    Auto {
        cap: usize,
    },
    Fixed(usize),
}

impl TruncationPolicy {
    /// Automatic policy capped at `⌈10 / (−ln(α‖h‖₁))⌉`: correlations decay
    /// at least geometrically with ratio `α‖h‖₁`.
    pub fn for_model(model: &HawkesModel) -> Self {
        TruncationPolicy::Auto { cap: lag_cap(model.contraction()) }
    }

    fn max_lag(&self) -> usize {
        match *self {
            TruncationPolicy::Auto { cap } => cap.max(1),
            TruncationPolicy::Fixed(j) => j.max(1),
        }
    }
}

/// `max(1, ⌈10 / (−ln ρ)⌉)` for a contraction ratio `ρ ∈ [0, 1)`.
pub fn lag_cap(contraction: f64) -> usize {
    if contraction <= 0.0 {
        return 1;
    }
    let cap = (10.0 / -contraction.ln()).ceil();
    if cap.is_finite() {
        (cap as usize).max(1)
    } else {
        usize::MAX
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardErrors {
    pub mu: f64,
    pub sigma2_series: f64,
    pub sigma2_batch: f64,
    /// Bartlett standard errors of `gamma_hat[j]`.
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStatistics {
    pub mu_hat: f64,
    /// Pooled autocovariances for lags `0..=truncation_lag`.
    pub gamma_hat: Vec<f64>,
    pub sigma2_series: f64,
    pub sigma2_batch: f64,
    pub truncation_lag: usize,
    pub batch_width: usize,
    pub batch_count: usize,
    pub total_counts: usize,
    pub replications: usize,
    pub standard_errors: StandardErrors,
}

impl PathStatistics {
    /// `|σ²_series − σ²_batch| / √(se_series² + se_batch²)`
    pub fn estimator_discrepancy(&self) -> f64 {
        let se = self.standard_errors.sigma2_series.hypot(self.standard_errors.sigma2_batch);
        (self.sigma2_series - self.sigma2_batch).abs() / se
    }
}

/// Pooled autocovariance sums `Σ_r Σ_i (x_{r,i} − μ)(x_{r,i+j} − μ)` for one
/// replication, lags `0..=max_lag`.
fn lag_products(x: &[f64], mu: f64, max_lag: usize) -> Vec<f64> {
    let centered: Vec<f64> = x.iter().map(|v| v - mu).collect();
    (0..=max_lag)
        .map(|j| {
            if j >= centered.len() {
                return 0.0;
            }
            centered[..centered.len() - j].iter().zip(&centered[j..]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

pub fn estimate_sigma2(series: &[CountSeries], truncation: TruncationPolicy) -> Result<PathStatistics, EstimateError> {
    let replications = series.len();
    let total: usize = series.iter().map(CountSeries::len).sum();
    if replications == 0 || total == 0 {
        return Err(EstimateError::InsufficientData("no counts".into()));
    }
    let max_lag = truncation.max_lag();
    if total < max_lag.saturating_mul(10) {
        return Err(EstimateError::InsufficientData(format!(
            "{total} pooled counts is fewer than 10x the candidate truncation lag {max_lag}"
        )));
    }
    let m_total = total as f64;
    let data: Vec<Vec<f64>> = series.iter().map(|s| s.as_f64().collect()).collect();
    let mu_hat = data.iter().flatten().sum::<f64>() / m_total;

    // lags needed: J plus two look-ahead lags for the automatic stop rule
    let scan = match truncation {
        TruncationPolicy::Auto { .. } => max_lag + 2,
        TruncationPolicy::Fixed(_) => max_lag,
    };
    let per_rep: Vec<Vec<f64>> = data.iter().map(|x| lag_products(x, mu_hat, scan)).collect();
    let gamma_full: Vec<f64> = (0..=scan).map(|j| per_rep.iter().map(|p| p[j]).sum::<f64>() / m_total).collect();
    let gamma0 = gamma_full[0];
    if gamma0 <= 0.0 {
        return Err(EstimateError::DegenerateVariance(gamma0));
    }

    // Bartlett: Var(γ̂_j) ≈ γ₀² (1 + 2 Σ_{k<j} ρ_k²) / M
    let mut bartlett = Vec::with_capacity(scan + 1);
    let mut acc = 0.0;
    bartlett.push(gamma0 * (2.0 / m_total).sqrt());
    for g in &gamma_full[1..] {
        bartlett.push(gamma0 * ((1.0 + 2.0 * acc) / m_total).sqrt());
        let rho = g / gamma0;
        acc += rho * rho;
    }

    let truncation_lag = match truncation {
        TruncationPolicy::Fixed(j) => j.max(1),
        TruncationPolicy::Auto { cap } => {
            let cap = cap.max(1);
            let quiet = |j: usize| gamma_full[j].abs() < 2.0 * bartlett[j];
            (1..=cap).find(|&j| quiet(j) && quiet(j + 1) && quiet(j + 2)).unwrap_or(cap)
        }
    };
    let series_sum = |g: &[f64]| g[0] + 2.0 * g[1..=truncation_lag].iter().sum::<f64>();
    let sigma2_series = series_sum(&gamma_full);
    if sigma2_series <= 0.0 {
        return Err(EstimateError::DegenerateVariance(sigma2_series));
    }

    let se_series = if replications >= 2 {
        // between-replication spread of the per-replication series estimates,
        // weighted by length so that their weighted mean is the pooled value
        let estimates: Vec<(f64, f64)> = per_rep
            .iter()
            .zip(&data)
            .filter(|(_, x)| !x.is_empty())
            .map(|(p, x)| {
                let m = x.len() as f64;
                let g: Vec<f64> = p.iter().map(|v| v / m).collect();
                (m / m_total, series_sum(&g))
            })
            .collect();
        let r = estimates.len() as f64;
        let spread: f64 = estimates.iter().map(|(w, s)| w * w * (s - sigma2_series).powi(2)).sum();
        (spread * r / (r - 1.0)).sqrt()
    } else {
        // truncated-kernel asymptotics at frequency zero
        sigma2_series * (2.0 * (2 * truncation_lag + 1) as f64 / m_total).sqrt()
    };

    let batch = batch_means(&data, mu_hat)?;

    Ok(PathStatistics {
        mu_hat,
        gamma_hat: gamma_full[..=truncation_lag].to_vec(),
        sigma2_series,
        sigma2_batch: batch.estimate,
        truncation_lag,
        batch_width: batch.width,
        batch_count: batch.count,
        total_counts: total,
        replications,
        standard_errors: StandardErrors {
            mu: (sigma2_series / m_total).sqrt(),
            sigma2_series: se_series,
            sigma2_batch: batch.se,
            gamma: bartlett[..=truncation_lag].to_vec(),
        },
    })
}

struct BatchMeans {
    estimate: f64,
    se: f64,
    width: usize,
    count: usize,
}

/// Each replication of length `m` is cut into `⌈m^{1/3}⌉` batches of width
/// `⌊m / ⌈m^{1/3}⌉⌋`; `σ²` is the scaled spread of batch means about `μ̂`.
fn batch_means(data: &[Vec<f64>], mu: f64) -> Result<BatchMeans, EstimateError> {
    let mut terms = Vec::new();
    let mut width_used = 0;
    for x in data {
        let m = x.len();
        if m == 0 {
            continue;
        }
        let k = (m as f64).cbrt().ceil() as usize;
        let w = (m / k).max(1);
        width_used = width_used.max(w);
        for chunk in x.chunks_exact(w).take(k) {
            let d = mean(chunk) - mu;
            terms.push(w as f64 * d * d);
        }
    }
    let count = terms.len();
    if count < 2 {
        return Err(EstimateError::InsufficientData("batch means need at least two batches".into()));
    }
    let sum: f64 = terms.iter().sum();
    let estimate = sum / (count as f64 - 1.0);
    let avg = sum / count as f64;
    let var_terms = terms.iter().map(|t| (t - avg).powi(2)).sum::<f64>() / (count as f64 - 1.0);
    Ok(BatchMeans { estimate, se: (var_terms / count as f64).sqrt(), width: width_used, count })
}

/// Linear-case constants `μ = ν/(1−‖h‖₁)`, `σ² = ν/(1−‖h‖₁)³`.
pub fn linear_oracle(nu: f64, l1: f64) -> Result<(f64, f64), EstimateError> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(EstimateError::InvalidArgument(format!("nu must be > 0, got {nu}")));
    }
    if !(l1 >= 0.0) {
        return Err(EstimateError::InvalidArgument(format!("l1 must be >= 0, got {l1}")));
    }
    if l1 >= 1.0 {
        return Err(EstimateError::StabilityViolation(l1));
    }
    let d = 1.0 - l1;
    Ok((nu / d, nu / (d * d * d)))
}

/// `α·∫t·h(t)dt / (1 − α‖h‖₁)`: bound on the expected total excess count
/// caused by history, integrated over the position of a history point.
pub fn coupling_gap_bound(model: &HawkesModel) -> f64 {
    model.rate().lipschitz() * model.kernel().first_moment() / model.stability_margin()
}

/// `α·H(u) / (1 − α‖h‖₁)`: bound on the expected total excess count caused by
/// a single history point at `−u`. Integrating over `u ≥ 0` gives
/// [`coupling_gap_bound`]; for a linear rate both hold with equality.
pub fn coupling_gap_bound_at_lag(model: &HawkesModel, lag: f64) -> Result<f64, EstimateError> {
    let tail = model.kernel().tail_integral(lag).map_err(|e| EstimateError::InvalidArgument(e.to_string()))?;
    Ok(model.rate().lipschitz() * tail / model.stability_margin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailVerdict {
    ConsistentWithExponentialTail,
    NotConsistent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailDiagnostic {
    pub theta_grid: Vec<f64>,
    /// Sample mean of `e^{θN}` per grid point.
    pub empirical_mgf: Vec<f64>,
    pub mgf_standard_errors: Vec<f64>,
    /// OLS slope of `ln P̂(N > x)` against `x`.
    pub log_survival_slope: f64,
    pub slope_standard_error: f64,
    pub verdict: TailVerdict,
}

pub fn tail_diagnostic(series: &[CountSeries], theta_grid: &[f64]) -> Result<TailDiagnostic, EstimateError> {
    if theta_grid.is_empty() || theta_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(EstimateError::InvalidArgument("theta grid must be non-empty and positive".into()));
    }
    let pooled: Vec<u32> = series.iter().flat_map(|s| s.counts().iter().copied()).collect();
    let n = pooled.len();
    if n < TAIL_MIN_COUNTS {
        return Err(EstimateError::InsufficientData(format!(
            "tail diagnostic needs {TAIL_MIN_COUNTS} pooled counts, got {n}"
        )));
    }
    let nf = n as f64;
    let (empirical_mgf, mgf_standard_errors): (Vec<f64>, Vec<f64>) = theta_grid
        .iter()
        .map(|&theta| {
            let vals: Vec<f64> = pooled.iter().map(|&c| (theta * c as f64).exp()).collect();
            let m = mean(&vals);
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nf - 1.0);
            (m, (v / nf).sqrt())
        })
        .unzip();

    let max = pooled.iter().copied().max().unwrap_or(0) as usize;
    let mut histogram = vec![0usize; max + 1];
    for &c in &pooled {
        histogram[c as usize] += 1;
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut exceed = n;
    for (x, &h) in histogram.iter().enumerate() {
        exceed -= h;
        if exceed < TAIL_MIN_EXCEEDANCES {
            break;
        }
        xs.push(x as f64);
        ys.push((exceed as f64 / nf).ln());
    }
    let (slope, se, verdict) = if xs.len() < 3 {
        (0.0, f64::INFINITY, TailVerdict::Inconclusive)
    } else {
        let (slope, se) = ols_slope(&xs, &ys);
        let theta_min = theta_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let verdict = if slope <= -theta_min && slope + 2.576 * se < 0.0 {
            TailVerdict::ConsistentWithExponentialTail
        } else {
            TailVerdict::NotConsistent
        };
        (slope, se, verdict)
    };
    Ok(TailDiagnostic {
        theta_grid: theta_grid.to_vec(),
        empirical_mgf,
        mgf_standard_errors,
        log_survival_slope: slope,
        slope_standard_error: se,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{History, Kernel, RateFunction};
    use approx::assert_relative_eq;

    #[test]
    fn bins_count_half_open_intervals() {
        let ev = EventSequence::new(History::empty(), vec![0.5, 1.2, 3.7], 4.0).unwrap();
        assert_eq!(bin_counts(&ev, 0.0, 4).unwrap().counts(), &[1, 1, 0, 1]);
        let ev = EventSequence::new(History::empty(), vec![1.0, 2.0], 4.0).unwrap();
        assert_eq!(bin_counts(&ev, 0.0, 4).unwrap().counts(), &[1, 1, 0, 0]);
        let empty = EventSequence::new(History::empty(), vec![], 5.0).unwrap();
        assert_eq!(bin_counts(&empty, 1.0, 3).unwrap().counts(), &[0, 0, 0]);
        assert!(matches!(bin_counts(&empty, 2.0, 4), Err(EstimateError::Range { .. })));
        assert!(bin_counts(&empty, 0.0, 0).is_err());
    }

    #[test]
    fn oracle_values() {
        assert_eq!(linear_oracle(1.0, 0.5).unwrap(), (2.0, 8.0));
        assert_eq!(linear_oracle(3.0, 0.0).unwrap(), (3.0, 3.0));
        let (mu, s2) = linear_oracle(1.0, 0.9).unwrap();
        assert_relative_eq!(mu, 10.0, max_relative = 1e-12);
        assert_relative_eq!(s2, 1000.0, max_relative = 1e-12);
        assert!(matches!(linear_oracle(1.0, 1.0), Err(EstimateError::StabilityViolation(_))));
    }

    #[test]
    fn gap_bounds() {
        let constant = HawkesModel::new(
            Kernel::exponential(1.0, 2.0).unwrap(),
            RateFunction::linear_with_slope(1.0, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(coupling_gap_bound(&constant), 0.0);
        let linear =
            HawkesModel::new(Kernel::exponential(1.0, 2.0).unwrap(), RateFunction::linear(1.0).unwrap()).unwrap();
        assert_relative_eq!(coupling_gap_bound(&linear), 0.5, max_relative = 1e-15);
        assert_relative_eq!(coupling_gap_bound_at_lag(&linear, 0.0).unwrap(), 1.0, max_relative = 1e-15);
        let sat = HawkesModel::new(Kernel::exponential(1.0, 1.0).unwrap(), RateFunction::saturating(0.5, 0.4).unwrap())
            .unwrap();
        assert_relative_eq!(coupling_gap_bound(&sat), 0.4 / 0.6, max_relative = 1e-14);
    }

    #[test]
    fn lag_caps() {
        assert_eq!(lag_cap(0.0), 1);
        assert_eq!(lag_cap(0.5), 15);
        assert_eq!(lag_cap(0.4), 11);
    }

    #[test]
    fn constant_counts_are_degenerate() {
        let s = vec![CountSeries::new(vec![3; 500])];
        assert!(matches!(estimate_sigma2(&s, TruncationPolicy::Fixed(5)), Err(EstimateError::DegenerateVariance(_))));
    }

    #[test]
    fn short_data_rejected() {
        let s = vec![CountSeries::new(vec![1, 2, 3, 1, 0, 2, 1, 1, 0])];
        assert!(matches!(estimate_sigma2(&s, TruncationPolicy::Fixed(1)), Err(EstimateError::InsufficientData(_))));
    }

    #[test]
    fn autocovariance_pairing_is_symmetric() {
        let x: Vec<f64> = (0..97).map(|i| ((i * 37 + 11) % 13) as f64).collect();
        let mu = mean(&x);
        let forward = lag_products(&x, mu, 6);
        for (j, f) in forward.iter().enumerate() {
            let backward: f64 = (j..x.len()).map(|i| (x[i] - mu) * (x[i - j] - mu)).sum();
            assert_eq!(*f, backward, "lag {j}");
        }
    }

    #[test]
    fn tail_of_constant_zero_is_inconclusive() {
        let s = vec![CountSeries::new(vec![0; 20_000])];
        let d = tail_diagnostic(&s, &[0.1, 0.5]).unwrap();
        assert_eq!(d.empirical_mgf, vec![1.0, 1.0]);
        assert_eq!(d.verdict, TailVerdict::Inconclusive);
        assert!(tail_diagnostic(&s[..0], &[0.1]).is_err());
    }
}
