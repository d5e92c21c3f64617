//! Rescaled count paths and tests of their Brownian limit.
//!
//! The centered path `s ↦ (N_{st} − μst)/√t` should behave like `σB(s)` and
//! the compensated path `s ↦ (N_{st} − Λ(st))/√t` like `√μ B(s)`. Weak
//! convergence on `D[0,1]` is probed through finite-dimensional marginals on
//! a uniform grid.

use crate::simulate::{Compensator, EventSequence};
use crate::stats::{self, ks_one_sample, normal_sf, pearson, variance_with_se};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub const DEFAULT_GRID_POINTS: usize = 101;
pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;
/// Minimum paths for a marginal distribution-fit test.
pub const MIN_PATHS_MARGINAL: usize = 200;
/// Minimum paths for the increment-independence test.
pub const MIN_PATHS_INCREMENTS: usize = 500;
/// Band, in standard errors, for variance comparisons.
pub const VARIANCE_BAND_SE: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcltError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("need at least {needed} paths, got {got}")]
    TooFewPaths { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub t_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompensatedPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub t_scale: f64,
}

pub trait GridPath {
    fn grid(&self) -> &[f64];
    fn values(&self) -> &[f64];

    /// Value at grid point `s`, which must be on the grid.
    fn value_at(&self, s: f64) -> Result<f64, FcltError> {
        let grid = self.grid();
        let i = grid.partition_point(|&g| g < s - 1e-12);
        match grid.get(i) {
            Some(&g) if (g - s).abs() <= 1e-9 => Ok(self.values()[i]),
            _ => Err(FcltError::Domain(format!("s = {s} is not a grid point"))),
        }
    }

    /// Largest absolute difference between consecutive grid values.
    fn max_jump(&self) -> f64 {
        self.values().windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }
}

impl GridPath for RescaledPath {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl GridPath for CompensatedPath {
    fn grid(&self) -> &[f64] {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn uniform_grid(g: usize) -> Vec<f64> {
    (0..g).map(|i| i as f64 / (g - 1) as f64).collect()
}

fn check_scale(events: &EventSequence, t: f64, g: usize) -> Result<(), FcltError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(FcltError::Domain(format!("t must be > 0, got {t}")));
    }
    if g < 2 {
        return Err(FcltError::Domain(format!("grid needs at least 2 points, got {g}")));
    }
    if events.horizon() < t {
        return Err(FcltError::Domain(format!("events cover (0, {}] but t = {t}", events.horizon())));
    }
    Ok(())
}

/// `values[i] = (N(0, s_i t] − μ s_i t)/√t` on `s_i = i/(g−1)`.
pub fn build_rescaled(events: &EventSequence, mu: f64, t: f64, g: usize) -> Result<RescaledPath, FcltError> {
    check_scale(events, t, g)?;
    let grid = uniform_grid(g);
    let root = t.sqrt();
    let values = grid.iter().map(|&s| (events.count_to(s * t) as f64 - mu * s * t) / root).collect();
    Ok(RescaledPath { grid, values, t_scale: t })
}

/// `values[i] = (N(0, s_i t] − Λ(s_i t))/√t`.
pub fn build_compensated(
    events: &EventSequence,
    compensator: &Compensator<'_>,
    t: f64,
    g: usize,
) -> Result<CompensatedPath, FcltError> {
    check_scale(events, t, g)?;
    let grid = uniform_grid(g);
    let root = t.sqrt();
    let values = grid.iter().map(|&s| (events.count_to(s * t) as f64 - compensator.at(s * t)) / root).collect();
    Ok(CompensatedPath { grid, values, t_scale: t })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianTestReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n_samples: usize,
    pub significance: f64,
    pub pass: bool,
}

impl GaussianTestReport {
    fn new(test_name: &str, statistic: f64, p_value: f64, n_samples: usize, significance: f64, pass: bool) -> Self {
        GaussianTestReport {
            test_name: test_name.to_string(),
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            n_samples,
            significance,
            pass,
        }
    }
}

fn column<P: GridPath>(paths: &[P], s: f64) -> Result<Vec<f64>, FcltError> {
    paths.iter().map(|p| p.value_at(s)).collect()
}

/// Kolmogorov–Smirnov fit of `{path(s)}` to `Normal(0, σ²s)`.
pub fn test_marginal_normality<P: GridPath>(
    paths: &[P],
    s: f64,
    sigma2: f64,
    significance: f64,
) -> Result<GaussianTestReport, FcltError> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(FcltError::Domain(format!("sigma2 must be > 0, got {sigma2}")));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(FcltError::Domain(format!("s must lie in (0, 1], got {s}")));
    }
    if paths.len() < MIN_PATHS_MARGINAL {
        return Err(FcltError::TooFewPaths { needed: MIN_PATHS_MARGINAL, got: paths.len() });
    }
    let xs = column(paths, s)?;
    let normal = Normal::new(0.0, (sigma2 * s).sqrt()).map_err(|e| FcltError::Domain(e.to_string()))?;
    let ks = ks_one_sample(&xs, |x| normal.cdf(x));
    Ok(GaussianTestReport::new(
        &format!("marginal-normality(s={s})"),
        ks.statistic,
        ks.p_value,
        ks.n,
        significance,
        ks.p_value > significance,
    ))
}

/// Pairwise correlations of disjoint increments over `0 < s_1 < … < s_k`.
/// The statistic is the largest `|r|`; the p-value is Bonferroni-adjusted
/// over all pairs using Fisher's z.
pub fn test_increment_independence<P: GridPath>(
    paths: &[P],
    s_points: &[f64],
    significance: f64,
) -> Result<GaussianTestReport, FcltError> {
    if s_points.len() < 2 {
        return Err(FcltError::Domain("need at least two increments".into()));
    }
    if s_points[0] <= 0.0 || s_points.windows(2).any(|w| w[0] >= w[1]) || *s_points.last().unwrap() > 1.0 {
        return Err(FcltError::Domain("s_points must be strictly increasing in (0, 1]".into()));
    }
    if paths.len() < MIN_PATHS_INCREMENTS {
        return Err(FcltError::TooFewPaths { needed: MIN_PATHS_INCREMENTS, got: paths.len() });
    }
    let mut increments = Vec::with_capacity(s_points.len());
    let mut prev = vec![0.0; paths.len()];
    for &s in s_points {
        let col = column(paths, s)?;
        increments.push(col.iter().zip(&prev).map(|(a, b)| a - b).collect::<Vec<f64>>());
        prev = col;
    }
    let n = paths.len() as f64;
    let mut max_r = 0.0f64;
    let mut pairs = 0usize;
    for i in 0..increments.len() {
        for j in i + 1..increments.len() {
            pairs += 1;
            max_r = max_r.max(pearson(&increments[i], &increments[j]).abs());
        }
    }
    let z = max_r.min(1.0 - 1e-15).atanh() * (n - 3.0).sqrt();
    let p_value = (pairs as f64 * 2.0 * normal_sf(z)).min(1.0);
    Ok(GaussianTestReport::new(
        "increment-independence",
        max_r,
        p_value,
        paths.len(),
        significance,
        p_value > significance,
    ))
}

/// Endpoint sample variance of compensated paths against `μ`.
/// Passes within [`VARIANCE_BAND_SE`] standard errors.
pub fn test_compensated_variance(paths: &[CompensatedPath], mu: f64) -> Result<GaussianTestReport, FcltError> {
    if paths.len() < MIN_PATHS_MARGINAL {
        return Err(FcltError::TooFewPaths { needed: MIN_PATHS_MARGINAL, got: paths.len() });
    }
    let xs = column(paths, 1.0)?;
    let (v, se) = variance_with_se(&xs);
    let z = (v - mu) / se;
    Ok(GaussianTestReport::new(
        "compensated-variance",
        z,
        2.0 * normal_sf(z.abs()),
        xs.len(),
        2.0 * normal_sf(VARIANCE_BAND_SE),
        z.abs() <= VARIANCE_BAND_SE,
    ))
}

/// Brownian scaling: `Var path(s) ≈ σ²·s` at each `s`, within
/// [`VARIANCE_BAND_SE`] standard errors. The statistic is the largest |z|.
pub fn test_variance_scaling<P: GridPath>(
    paths: &[P],
    s_points: &[f64],
    sigma2: f64,
) -> Result<GaussianTestReport, FcltError> {
    if paths.len() < MIN_PATHS_MARGINAL {
        return Err(FcltError::TooFewPaths { needed: MIN_PATHS_MARGINAL, got: paths.len() });
    }
    let mut worst = 0.0f64;
    for &s in s_points {
        let (v, se) = variance_with_se(&column(paths, s)?);
        worst = worst.max(((v - sigma2 * s) / se).abs());
    }
    let p_value = (s_points.len() as f64 * 2.0 * normal_sf(worst)).min(1.0);
    Ok(GaussianTestReport::new(
        "variance-scaling",
        worst,
        p_value,
        paths.len(),
        2.0 * normal_sf(VARIANCE_BAND_SE),
        worst <= VARIANCE_BAND_SE,
    ))
}

/// Sample variance of `path(s)` across replications, with its standard error.
pub fn variance_at<P: GridPath>(paths: &[P], s: f64) -> Result<(f64, f64), FcltError> {
    let col = column(paths, s)?;
    if col.len() < 2 {
        return Err(FcltError::TooFewPaths { needed: 2, got: col.len() });
    }
    Ok(variance_with_se(&col))
}

/// Mean of `path(s)` across replications.
pub fn mean_at<P: GridPath>(paths: &[P], s: f64) -> Result<f64, FcltError> {
    Ok(stats::mean(&column(paths, s)?))
}
