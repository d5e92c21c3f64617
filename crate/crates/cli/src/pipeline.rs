//! Stages shared by the subcommands and by `verify`.

use crate::config::{LilSection, S2Mode};
use crate::io::{float, CsvOut};
use crate::CliError;
use nlhawkes::estimate::{
    bin_counts, estimate_sigma2, linear_oracle, tail_diagnostic, CountSeries, EstimateError, PathStatistics,
    StandardErrors, TailDiagnostic, TruncationPolicy,
};
use nlhawkes::fclt::{
    build_compensated, build_rescaled, test_compensated_variance, test_increment_independence, test_marginal_normality,
    test_variance_scaling, CompensatedPath, GaussianTestReport, RescaledPath, MIN_PATHS_INCREMENTS, MIN_PATHS_MARGINAL,
};
use nlhawkes::lil::{
    build_lil_sequence, calibrate_iid_normal, empirical_s2_profile, lil_schedule, strassen_on_schedule,
    CalibrationBand, LilError, LilPath, LilSequence, S2Profile, MIN_SCHEDULE,
};
use nlhawkes::model::HawkesModel;
use nlhawkes::rng::replicate;
use nlhawkes::simulate::{
    simulate_replication, stationary_burnin, Compensator, EventSequence, SimulationError, SimulationOptions,
    SimulationOutput,
};
use serde::Serialize;
use std::path::Path;

/// Stage tags mixed into the master seed so stages draw independent streams.
pub mod stage {
    pub const MAIN: u64 = 1;
    pub const FCLT: u64 = 2;
    pub const LIL: u64 = 3;
    pub const COUPLING: u64 = 4;
    pub const CALIBRATION: u64 = 5;
    pub const COUPLING_POSITION: u64 = 6;
    pub const LIL_CHECK: u64 = 7;
}

pub const TAIL_THETA_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.5];

pub fn sim_err(e: SimulationError) -> CliError {
    match e {
        SimulationError::BurninCap { .. } | SimulationError::InvalidEpsilon(_) | SimulationError::InvalidHorizon(_) => {
            CliError::Config(e.to_string())
        }
        other => CliError::Statistical(other.to_string()),
    }
}

pub fn est_err(e: EstimateError) -> CliError {
    match e {
        EstimateError::Range { .. } | EstimateError::InvalidArgument(_) => CliError::Config(e.to_string()),
        other => CliError::Statistical(other.to_string()),
    }
}

pub fn lil_err(e: LilError) -> CliError {
    match e {
        LilError::ScheduleTooShort { .. } => CliError::Config(e.to_string()),
        other => CliError::Statistical(other.to_string()),
    }
}

/// Linear-rate constants `(μ, σ²)`, `None` for nonlinear rates.
pub fn oracle(model: &HawkesModel) -> Option<(f64, f64)> {
    if model.rate().is_linear() {
        linear_oracle(model.rate().base(), model.contraction()).ok()
    } else {
        None
    }
}

/// Runs stationary replications in parallel and maps each output, in index order.
pub fn stationary_runs<T, F>(
    model: &HawkesModel,
    horizon: f64,
    replications: usize,
    seed: u64,
    burnin_epsilon: f64,
    f: F,
) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(usize, SimulationOutput) -> Result<T, CliError> + Sync + Send,
{
    let burnin = stationary_burnin(model, burnin_epsilon).map_err(sim_err)?;
    let options = SimulationOptions::default();
    replicate(replications, |r| {
        let out = simulate_replication(model, horizon, burnin, seed, r, &options).map_err(sim_err)?;
        f(r, out)
    })
    .into_iter()
    .collect()
}

/// Unit-bin counts over `(0, ⌊T⌋]`.
pub fn counts_of(events: &EventSequence) -> Result<CountSeries, CliError> {
    let m = events.horizon().floor() as usize;
    if m == 0 {
        return Err(CliError::Config("horizon must be at least one time unit".into()));
    }
    bin_counts(events, 0.0, m).map_err(est_err)
}

#[derive(Debug, Clone, Serialize)]
pub struct Oracle {
    pub mu: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub mu_hat: f64,
    pub sigma2_series: f64,
    pub sigma2_batch: f64,
    pub truncation_lag: usize,
    pub batch_width: usize,
    pub batch_count: usize,
    pub total_counts: usize,
    pub replications: usize,
    pub gamma: Vec<f64>,
    pub standard_errors: StandardErrors,
    pub oracle: Option<Oracle>,
    /// Diagnostic only: whether `σ̂² > μ̂`.
    pub sigma2_exceeds_mu: bool,
    pub tail: Option<TailDiagnostic>,
}

pub fn estimate(model: &HawkesModel, counts: &[CountSeries]) -> Result<(PathStatistics, StatsReport), CliError> {
    let stats = estimate_sigma2(counts, TruncationPolicy::for_model(model)).map_err(est_err)?;
    let tail = tail_diagnostic(counts, &TAIL_THETA_GRID).ok();
    let report = StatsReport {
        mu_hat: stats.mu_hat,
        sigma2_series: stats.sigma2_series,
        sigma2_batch: stats.sigma2_batch,
        truncation_lag: stats.truncation_lag,
        batch_width: stats.batch_width,
        batch_count: stats.batch_count,
        total_counts: stats.total_counts,
        replications: stats.replications,
        gamma: stats.gamma_hat.clone(),
        standard_errors: stats.standard_errors.clone(),
        oracle: oracle(model).map(|(mu, sigma2)| Oracle { mu, sigma2 }),
        sigma2_exceeds_mu: stats.sigma2_series > stats.mu_hat,
        tail,
    };
    Ok((stats, report))
}

pub fn write_counts(dir: &Path, counts: &[CountSeries]) -> Result<(), CliError> {
    let mut out = CsvOut::create(dir, crate::io::COUNTS_CSV, &["replication", "bin", "count"])?;
    for (r, series) in counts.iter().enumerate() {
        for (j, c) in series.counts().iter().enumerate() {
            out.row([r.to_string(), j.to_string(), c.to_string()])?;
        }
    }
    out.finish()
}

/// Rescaled, compensated path pair and time-rescaled gaps of one replication.
pub struct FcltSample {
    pub rescaled: RescaledPath,
    pub compensated: CompensatedPath,
    pub gaps: Vec<f64>,
}

pub fn fclt_sample(
    model: &HawkesModel,
    events: &EventSequence,
    mu: f64,
    horizon: f64,
    grid: usize,
) -> Result<FcltSample, CliError> {
    let comp = Compensator::new(model, events);
    let to_cfg = |e: nlhawkes::fclt::FcltError| CliError::Config(e.to_string());
    Ok(FcltSample {
        rescaled: build_rescaled(events, mu, horizon, grid).map_err(to_cfg)?,
        compensated: build_compensated(events, &comp, horizon, grid).map_err(to_cfg)?,
        gaps: comp.rescaled_gaps(),
    })
}

pub fn write_fclt_csv(dir: &Path, samples: &[FcltSample]) -> Result<(), CliError> {
    let mut out = CsvOut::create(dir, crate::io::FCLT_CSV, &["replication", "s", "value", "kind"])?;
    for (r, sample) in samples.iter().enumerate() {
        for (kind, grid, values) in [
            ("centered", &sample.rescaled.grid, &sample.rescaled.values),
            ("compensated", &sample.compensated.grid, &sample.compensated.values),
        ] {
            for (s, v) in grid.iter().zip(values.iter()) {
                out.row([r.to_string(), float(*s), float(*v), kind.to_string()])?;
            }
        }
    }
    out.finish()
}

/// Gaussian-limit tests that the path count supports, Bonferroni-adjusted
/// across the distribution-fit tests of the report.
pub fn fclt_reports(
    samples: &[FcltSample],
    sigma2: f64,
    mu: f64,
    significance: f64,
    s_points: &[f64],
) -> Result<Vec<GaussianTestReport>, CliError> {
    let rescaled: Vec<RescaledPath> = samples.iter().map(|s| s.rescaled.clone()).collect();
    let compensated: Vec<CompensatedPath> = samples.iter().map(|s| s.compensated.clone()).collect();
    let n = samples.len();
    let fit_tests =
        usize::from(n >= MIN_PATHS_MARGINAL) + usize::from(n >= MIN_PATHS_INCREMENTS && s_points.len() >= 2);
    let level = significance / fit_tests.max(1) as f64;
    let to_stat = |e: nlhawkes::fclt::FcltError| CliError::Statistical(e.to_string());
    let mut reports = Vec::new();
    if n >= MIN_PATHS_MARGINAL {
        reports.push(test_marginal_normality(&rescaled, 1.0, sigma2, level).map_err(to_stat)?);
        reports.push(test_variance_scaling(&rescaled, s_points, sigma2).map_err(to_stat)?);
        reports.push(test_compensated_variance(&compensated, mu).map_err(to_stat)?);
    }
    if n >= MIN_PATHS_INCREMENTS && s_points.len() >= 2 {
        reports.push(test_increment_independence(&rescaled, s_points, level).map_err(to_stat)?);
    }
    Ok(reports)
}

#[derive(Debug, Clone, Serialize)]
pub struct LilReport {
    pub n_max: usize,
    pub s2_mode: S2Mode,
    pub mu: f64,
    /// `s_{n_max}² / n_max`
    pub sigma2: f64,
    pub schedule: Vec<usize>,
    pub norm_sup: Vec<f64>,
    pub endpoint: Vec<f64>,
    pub sup_norm_statistic: f64,
    pub tail_endpoint_statistic: f64,
    pub energy_of_max_path: f64,
    pub calibration: CalibrationBand,
    pub tail_inside_band: bool,
    pub sup_inside_band: bool,
}

pub struct LilOutcome {
    pub report: LilReport,
    pub sequence: LilSequence,
    pub paths: Vec<LilPath>,
}

/// Strassen paths of the first sequence, with an i.i.d. normal band computed
/// on the same schedule and variance scale.
pub fn lil_analysis(
    counts: &[CountSeries],
    mu: f64,
    sigma2: f64,
    section: &LilSection,
    calibration_seed: u64,
) -> Result<LilOutcome, CliError> {
    let first = counts.first().ok_or_else(|| CliError::Config("no counts for the LIL stage".into()))?;
    let n = section.n_max.min(first.len());
    let truncate = |c: &CountSeries| CountSeries::new(c.counts()[..n.min(c.len())].to_vec());
    let profile = match section.s2_mode {
        S2Mode::PlugIn => S2Profile::PlugIn { sigma2 },
        S2Mode::Empirical => {
            let centered: Vec<Vec<f64>> =
                counts.iter().map(|c| c.counts()[..n.min(c.len())].iter().map(|&v| v as f64 - mu).collect()).collect();
            S2Profile::Empirical { values: empirical_s2_profile(&centered).map_err(lil_err)? }
        }
    };
    let sequence = build_lil_sequence(&truncate(first), mu, &profile).map_err(lil_err)?;
    let grid = nlhawkes::fclt::uniform_grid(section.grid);
    let schedule = lil_schedule(&sequence, MIN_SCHEDULE).map_err(lil_err)?;
    let (paths, strassen) = strassen_on_schedule(&sequence, &schedule, &grid).map_err(lil_err)?;
    let scale = sequence.s2[n] / n as f64;
    let calibration =
        calibrate_iid_normal(&schedule, scale, section.calibration_trials, &grid, calibration_seed).map_err(lil_err)?;
    let report = LilReport {
        n_max: n,
        s2_mode: section.s2_mode,
        mu,
        sigma2: scale,
        schedule: strassen.schedule.clone(),
        norm_sup: strassen.norm_sup.clone(),
        endpoint: strassen.endpoint.clone(),
        sup_norm_statistic: strassen.sup_norm_statistic,
        tail_endpoint_statistic: strassen.tail_endpoint_statistic,
        energy_of_max_path: strassen.energy_of_max_path,
        tail_inside_band: calibration.contains_tail(strassen.tail_endpoint_statistic),
        sup_inside_band: calibration.contains_sup(strassen.sup_norm_statistic),
        calibration,
    };
    Ok(LilOutcome { report, sequence, paths })
}

pub fn write_lil_csv(dir: &Path, replication: usize, paths: &[LilPath]) -> Result<(), CliError> {
    let mut out = CsvOut::create(dir, crate::io::LIL_CSV, &["replication", "n", "t", "eta"])?;
    for p in paths {
        for (t, v) in p.grid.iter().zip(&p.values) {
            out.row([replication.to_string(), p.n.to_string(), float(*t), float(*v)])?;
        }
    }
    out.finish()
}
