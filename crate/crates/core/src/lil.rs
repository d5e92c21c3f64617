//! Strassen interpolation of centered partial sums.
//!
//! With `X_n = N[n−1, n] − μ`, `S_n = Σ_{i≤n} X_i` and `s_n² = E[S_n²]`, the
//! path
//!
//! ```text
//! η_n(t) = (S_k + (s_n² t − s_k²)/(s_{k+1}² − s_k²) · X_{k+1}) / √(2 s_n² log log s_n²),
//!          s_k² ≤ s_n² t ≤ s_{k+1}²
//! ```
//!
//! is the piecewise-linear interpolation of the knots `(s_k²/s_n², S_k)`. The
//! family `{η_n}` is relatively compact with limit set
//! `{f : f(0) = 0, ∫₀¹ f′² ≤ 1}`, so in particular `|η_n(1)|` has limsup 1.
//! Convergence is slow; finite-`n` statistics are compared against bands
//! obtained from i.i.d. normal sequences at the same `n`.

use crate::estimate::CountSeries;
use crate::rng::{replicate, substream};
use crate::stats::quantile;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum schedule length for [`strassen_check`].
pub const MIN_SCHEDULE: usize = 20;
/// Two-sided level of calibration bands.
pub const CALIBRATION_LEVEL: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LilError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("schedule has {got} points, need at least {needed}")]
    ScheduleTooShort { needed: usize, got: usize },
}

/// How `s_n² = E[S_n²]` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum S2Profile {
    /// `s_n² = n·σ²`
    PlugIn { sigma2: f64 },
    /// `values[n−1] = s_n²`, e.g. a cross-replication second moment.
    Empirical { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilSequence {
    /// `x[i] = X_{i+1}`
    pub x: Vec<f64>,
    /// `s_partial[n] = S_n`, with `S_0 = 0`.
    pub s_partial: Vec<f64>,
    /// `s2[n] = s_n²`, with `s_0² = 0`.
    pub s2: Vec<f64>,
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GIndex {
    pub threshold: f64,
    pub value: usize,
}

impl LilSequence {
    /// Builds the sequence from already-centered values `X_1, X_2, …`.
    pub fn from_centered(x: Vec<f64>, profile: &S2Profile) -> Result<Self, LilError> {
        let n_max = x.len();
        if n_max == 0 {
            return Err(LilError::Input("empty sequence".into()));
        }
        let mut s_partial = Vec::with_capacity(n_max + 1);
        s_partial.push(0.0);
        let mut acc = 0.0;
        for &v in &x {
            acc += v;
            s_partial.push(acc);
        }
        let mut s2 = Vec::with_capacity(n_max + 1);
        s2.push(0.0);
        match profile {
            S2Profile::PlugIn { sigma2 } => {
                if !(*sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(LilError::Input(format!("sigma2 must be > 0, got {sigma2}")));
                }
                s2.extend((1..=n_max).map(|n| n as f64 * sigma2));
            }
            S2Profile::Empirical { values } => {
                if values.len() < n_max {
                    return Err(LilError::Input(format!(
                        "profile has {} entries, sequence needs {n_max}",
                        values.len()
                    )));
                }
                s2.extend_from_slice(&values[..n_max]);
            }
        }
        if let Some(n) = s2.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(LilError::Input(format!("s_n^2 profile is not strictly increasing at n = {}", n + 1)));
        }
        let seq = LilSequence { x, s_partial, s2, n_max };
        let first = seq.first_valid_index();
        if n_max < first {
            return Err(LilError::Input(format!(
                "sequence of length {n_max} is too short: eta_n needs n > g(e) = {}",
                first - 1
            )));
        }
        Ok(seq)
    }

    /// `g(t) = sup{n : s_n² ≤ t}` over the available range.
    pub fn g_index(&self, t: f64) -> GIndex {
        let count = self.s2.partition_point(|&v| v <= t);
        GIndex { threshold: t, value: count.saturating_sub(1) }
    }

    /// Smallest `n` with `log log s_n² > 0`, i.e. `g(e) + 1`.
    pub fn first_valid_index(&self) -> usize {
        self.g_index(std::f64::consts::E).value + 1
    }

    fn normalizer(&self, n: usize) -> f64 {
        let s2n = self.s2[n];
        (2.0 * s2n * s2n.ln().ln()).sqrt()
    }

    /// `η_n(s_k²/s_n²) = S_k / √(2 s_n² log log s_n²)`.
    pub fn knot_value(&self, n: usize, k: usize) -> f64 {
        self.s_partial[k] / self.normalizer(n)
    }
}

/// Centers counts at `μ` and attaches an `s_n²` profile.
pub fn build_lil_sequence(counts: &CountSeries, mu: f64, profile: &S2Profile) -> Result<LilSequence, LilError> {
    let x = counts.counts().iter().map(|&c| c as f64 - mu).collect();
    LilSequence::from_centered(x, profile)
}

/// Cross-replication second moment `s_n² = mean_r S_{r,n}²` of centered
/// sequences, truncated to the shortest one.
pub fn empirical_s2_profile(centered: &[Vec<f64>]) -> Result<Vec<f64>, LilError> {
    let len = centered.iter().map(Vec::len).min().unwrap_or(0);
    if centered.len() < 2 || len == 0 {
        return Err(LilError::Input("need at least two non-empty replications".into()));
    }
    let mut out = vec![0.0; len];
    for x in centered {
        let mut acc = 0.0;
        for (slot, v) in out.iter_mut().zip(x) {
            acc += v;
            *slot += acc * acc;
        }
    }
    let r = centered.len() as f64;
    out.iter_mut().for_each(|v| *v /= r);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilPath {
    pub n: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub norm_sup: f64,
}

impl LilPath {
    /// `∫₀¹ η′(t)² dt` of the grid interpolation.
    pub fn energy(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .filter(|(g, _)| g[1] > g[0])
            .map(|(g, v)| (v[1] - v[0]).powi(2) / (g[1] - g[0]))
            .sum()
    }
}

pub fn build_eta(seq: &LilSequence, n: usize, grid: &[f64]) -> Result<LilPath, LilError> {
    if n == 0 || n > seq.n_max {
        return Err(LilError::Domain(format!("n = {n} outside 1..={}", seq.n_max)));
    }
    let g_e = seq.g_index(std::f64::consts::E).value;
    if n <= g_e {
        return Err(LilError::Domain(format!("n = {n} <= g(e) = {g_e}: log log s_n^2 is not positive")));
    }
    if grid.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(LilError::Domain("grid points must lie in [0, 1]".into()));
    }
    let s2 = &seq.s2[..=n];
    let s2n = s2[n];
    let denom = seq.normalizer(n);
    let values: Vec<f64> = grid
        .iter()
        .map(|&t| {
            let target = s2n * t;
            let k = (s2.partition_point(|&v| v <= target).max(1) - 1).min(n - 1);
            let frac = (target - s2[k]) / (s2[k + 1] - s2[k]);
            (seq.s_partial[k] + frac * seq.x[k]) / denom
        })
        .collect();
    let norm_sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(LilPath { n, grid: grid.to_vec(), values, norm_sup })
}

/// Geometric schedule of at least `min_points` indices starting at the first
/// `n > g(e) + 8` and ending at `n_max`. The ratio is 2 unless that would
/// give fewer than `min_points` indices, in which case it shrinks to fit.
pub fn lil_schedule(seq: &LilSequence, min_points: usize) -> Result<Vec<usize>, LilError> {
    let start = seq.g_index(std::f64::consts::E).value + 9;
    let end = seq.n_max;
    if start > end {
        return Err(LilError::ScheduleTooShort { needed: min_points, got: 0 });
    }
    let span = end as f64 / start as f64;
    let ratio = if min_points > 1 { span.powf(1.0 / (min_points - 1) as f64).min(2.0) } else { 2.0 };
    let mut schedule = Vec::new();
    let mut k = 0;
    loop {
        let n = (start as f64 * ratio.powi(k)).round() as usize;
        if n >= end || ratio <= 1.0 {
            break;
        }
        if schedule.last() != Some(&n) {
            schedule.push(n);
        }
        k += 1;
    }
    schedule.push(end);
    if schedule.len() < min_points {
        return Err(LilError::ScheduleTooShort { needed: min_points, got: schedule.len() });
    }
    Ok(schedule)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrassenReport {
    pub schedule: Vec<usize>,
    pub norm_sup: Vec<f64>,
    pub endpoint: Vec<f64>,
    /// `max_n sup_t |η_n(t)|`
    pub sup_norm_statistic: f64,
    /// `max |η_n(1)|` over the second half of the schedule.
    pub tail_endpoint_statistic: f64,
    /// Discrete energy of the path attaining the sup-norm statistic.
    pub energy_of_max_path: f64,
}

pub fn strassen_check(paths: &[LilPath]) -> Result<StrassenReport, LilError> {
    if paths.len() < MIN_SCHEDULE {
        return Err(LilError::ScheduleTooShort { needed: MIN_SCHEDULE, got: paths.len() });
    }
    let mut ordered: Vec<&LilPath> = paths.iter().collect();
    ordered.sort_by_key(|p| p.n);
    let endpoint: Vec<f64> = ordered
        .iter()
        .map(|p| match p.grid.last() {
            Some(&1.0) => Ok(*p.values.last().unwrap()),
            _ => Err(LilError::Domain("path grids must end at t = 1".into())),
        })
        .collect::<Result<_, _>>()?;
    let norm_sup: Vec<f64> = ordered.iter().map(|p| p.norm_sup).collect();
    let (argmax, sup) =
        norm_sup.iter().enumerate().fold((0, 0.0f64), |(i, m), (j, &v)| if v > m { (j, v) } else { (i, m) });
    let tail_start = ordered.len() / 2;
    let tail = endpoint[tail_start..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(StrassenReport {
        schedule: ordered.iter().map(|p| p.n).collect(),
        norm_sup,
        endpoint,
        sup_norm_statistic: sup,
        tail_endpoint_statistic: tail,
        energy_of_max_path: ordered[argmax].energy(),
    })
}

/// Schedule, paths and report for one sequence.
pub fn strassen_for_sequence(seq: &LilSequence, grid: &[f64]) -> Result<(Vec<LilPath>, StrassenReport), LilError> {
    let schedule = lil_schedule(seq, MIN_SCHEDULE)?;
    strassen_on_schedule(seq, &schedule, grid)
}

pub fn strassen_on_schedule(
    seq: &LilSequence,
    schedule: &[usize],
    grid: &[f64],
) -> Result<(Vec<LilPath>, StrassenReport), LilError> {
    let paths = schedule.iter().map(|&n| build_eta(seq, n, grid)).collect::<Result<Vec<_>, _>>()?;
    let report = strassen_check(&paths)?;
    Ok((paths, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationBand {
    pub n_max: usize,
    pub trials: usize,
    pub level: f64,
    pub tail_lower: f64,
    pub tail_median: f64,
    pub tail_upper: f64,
    pub sup_lower: f64,
    pub sup_median: f64,
    pub sup_upper: f64,
}

impl CalibrationBand {
    pub fn contains_tail(&self, value: f64) -> bool {
        value >= self.tail_lower && value <= self.tail_upper
    }

    pub fn contains_sup(&self, value: f64) -> bool {
        value >= self.sup_lower && value <= self.sup_upper
    }
}

/// Finite-`n` reference distribution of the Strassen statistics from i.i.d.
/// `Normal(0, σ²)` sequences with `s_n² = nσ²`, evaluated on `schedule`.
/// Matching `σ²` makes the normalization identical to that of a plug-in
/// sequence with the same variance constant. Trials run in parallel.
pub fn calibrate_iid_normal(
    schedule: &[usize],
    sigma2: f64,
    trials: usize,
    grid: &[f64],
    seed: u64,
) -> Result<CalibrationBand, LilError> {
    if trials < 2 {
        return Err(LilError::Input("calibration needs at least two trials".into()));
    }
    let n_max = *schedule.iter().max().ok_or(LilError::ScheduleTooShort { needed: MIN_SCHEDULE, got: 0 })?;
    let sd = sigma2.sqrt();
    let stats = replicate(trials, |r| {
        let mut rng = substream(seed, r as u64);
        let x: Vec<f64> = (0..n_max).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let seq = LilSequence::from_centered(x, &S2Profile::PlugIn { sigma2 })?;
        let (_, report) = strassen_on_schedule(&seq, schedule, grid)?;
        Ok::<_, LilError>((report.tail_endpoint_statistic, report.sup_norm_statistic))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut tails: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let mut sups: Vec<f64> = stats.iter().map(|s| s.1).collect();
    tails.sort_by(f64::total_cmp);
    sups.sort_by(f64::total_cmp);
    let (lo, hi) = (CALIBRATION_LEVEL / 2.0, 1.0 - CALIBRATION_LEVEL / 2.0);
    Ok(CalibrationBand {
        n_max,
        trials,
        level: CALIBRATION_LEVEL,
        tail_lower: quantile(&tails, lo),
        tail_median: quantile(&tails, 0.5),
        tail_upper: quantile(&tails, hi),
        sup_lower: quantile(&sups, lo),
        sup_median: quantile(&sups, 0.5),
        sup_upper: quantile(&sups, hi),
    })
}
