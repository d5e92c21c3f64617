//! Run configuration: model, budgets and output location, in TOML.

use crate::CliError;
use nlhawkes::model::{HawkesModel, KernelFamily, ModelSpec, RateFamily};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Canned verification scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// zero kernel, `λ ≡ 2`
    Poisson,
    /// `λ(z) = 1 + z`, `h(t) = e^{−2t}`
    Linear,
    /// `λ(z) = 0.5 + 0.4·z/(1 + z)`, `h(t) = e^{−t}`
    NonlinearSaturating,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Poisson => "poisson",
            Scenario::Linear => "linear",
            Scenario::NonlinearSaturating => "nonlinear-saturating",
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        match self {
            Scenario::Poisson => {
                ModelSpec { kernel: KernelFamily::Zero, rate: RateFamily::Linear { nu: 2.0, slope: 1.0 } }
            }
            Scenario::Linear => ModelSpec {
                kernel: KernelFamily::Exponential { a: 1.0, b: 2.0 },
                rate: RateFamily::Linear { nu: 1.0, slope: 1.0 },
            },
            Scenario::NonlinearSaturating => ModelSpec {
                kernel: KernelFamily::Exponential { a: 1.0, b: 1.0 },
                rate: RateFamily::Saturating { nu: 0.5, alpha: 0.4 },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Horizon `T` of each replication.
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    #[serde(default = "defaults::replications")]
    pub replications: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    /// Residual history influence tolerated after burn-in.
    #[serde(default = "defaults::burnin_epsilon")]
    pub burnin_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcltSection {
    #[serde(default = "defaults::grid")]
    pub grid: usize,
    #[serde(default = "defaults::significance")]
    pub significance: f64,
    #[serde(default = "defaults::s_points")]
    pub s_points: Vec<f64>,
    /// Path horizon used by `verify`.
    #[serde(default = "defaults::fclt_horizon")]
    pub horizon: f64,
    /// Path count used by `verify`.
    #[serde(default = "defaults::fclt_replications")]
    pub replications: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum S2Mode {
    /// `s_n² = n·σ²`
    PlugIn,
    /// cross-replication mean of `S_n²`
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LilSection {
    #[serde(default = "defaults::n_max")]
    pub n_max: usize,
    #[serde(default = "defaults::s2_mode")]
    pub s2_mode: S2Mode,
    /// Replications simulated by `verify`; the empirical profile needs at least two.
    #[serde(default = "defaults::lil_replications")]
    pub replications: usize,
    #[serde(default = "defaults::calibration_trials")]
    pub calibration_trials: usize,
    #[serde(default = "defaults::grid")]
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(default = "defaults::coupling_seeds")]
    pub seeds: usize,
    #[serde(default = "defaults::max_layers")]
    pub max_layers: usize,
    /// History point position `−U`, `U ~ Uniform[0, span]`, for the integrated gap.
    #[serde(default = "defaults::span")]
    pub span: f64,
    /// Fixed history lag for the pointwise gap.
    #[serde(default = "defaults::lag")]
    pub lag: f64,
    /// Coupled horizon; must leave room for the excess cascade to die out.
    #[serde(default = "defaults::coupling_horizon")]
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateFamily>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub fclt: FcltSection,
    #[serde(default)]
    pub lil: LilSection,
    #[serde(default)]
    pub coupling: CouplingSection,
}

mod defaults {
    use super::S2Mode;

    pub fn horizon() -> f64 {
        1000.0
    }
    pub fn replications() -> usize {
        10
    }
    pub fn seed() -> u64 {
        20_240_917
    }
    pub fn burnin_epsilon() -> f64 {
        1e-3
    }
    pub fn grid() -> usize {
        101
    }
    pub fn significance() -> f64 {
        0.01
    }
    pub fn s_points() -> Vec<f64> {
        vec![0.25, 0.5, 0.75, 1.0]
    }
    pub fn fclt_horizon() -> f64 {
        2000.0
    }
    pub fn fclt_replications() -> usize {
        1000
    }
    pub fn n_max() -> usize {
        100_000
    }
    pub fn s2_mode() -> S2Mode {
        S2Mode::PlugIn
    }
    pub fn lil_replications() -> usize {
        1
    }
    pub fn calibration_trials() -> usize {
        400
    }
    pub fn coupling_seeds() -> usize {
        1000
    }
    pub fn max_layers() -> usize {
        64
    }
    pub fn span() -> f64 {
        8.0
    }
    pub fn lag() -> f64 {
        0.25
    }
    pub fn coupling_horizon() -> f64 {
        40.0
    }
}

macro_rules! section_default {
    ($ty:ident { $($field:ident: $f:ident),* }) => {
        impl Default for $ty {
            fn default() -> Self {
                $ty { $($field: defaults::$f()),* }
            }
        }
    };
}

section_default!(RunSection {
    horizon: horizon,
    replications: replications,
    seed: seed,
    burnin_epsilon: burnin_epsilon
});
section_default!(FcltSection {
    grid: grid,
    significance: significance,
    s_points: s_points,
    horizon: fclt_horizon,
    replications: fclt_replications
});
section_default!(LilSection {
    n_max: n_max,
    s2_mode: s2_mode,
    replications: lil_replications,
    calibration_trials: calibration_trials,
    grid: grid
});
section_default!(CouplingSection {
    seeds: coupling_seeds,
    max_layers: max_layers,
    span: span,
    lag: lag,
    horizon: coupling_horizon
});

impl RunConfig {
    /// Budget used by `verify` for a canned scenario.
    pub fn for_scenario(scenario: Scenario) -> Self {
        let spec = scenario.model_spec();
        let run = match scenario {
            Scenario::Poisson => RunSection { horizon: 10_000.0, replications: 50, ..RunSection::default() },
            Scenario::Linear | Scenario::NonlinearSaturating => {
                RunSection { horizon: 50_000.0, replications: 200, ..RunSection::default() }
            }
        };
        RunConfig {
            scenario: Some(scenario),
            output: None,
            kernel: Some(spec.kernel),
            rate: Some(spec.rate),
            run,
            fclt: FcltSection::default(),
            lil: LilSection::default(),
            coupling: CouplingSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    /// Model from explicit `[kernel]`/`[rate]` tables, falling back to the scenario.
    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let fallback = self.scenario.map(|s| s.model_spec());
        let kernel = self.kernel.or(fallback.map(|s| s.kernel));
        let rate = self.rate.or(fallback.map(|s| s.rate));
        match (kernel, rate) {
            (Some(kernel), Some(rate)) => Ok(ModelSpec { kernel, rate }),
            _ => Err(CliError::Config("config needs [kernel] and [rate] tables or a scenario".into())),
        }
    }

    pub fn model(&self) -> Result<HawkesModel, CliError> {
        self.model_spec()?.build().map_err(|e| CliError::Config(format!("invalid model: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let run = &self.run;
        if !(run.horizon.is_finite() && run.horizon > 0.0) {
            return bad(format!("run.horizon must be > 0, got {}", run.horizon));
        }
        if run.replications == 0 {
            return bad("run.replications must be >= 1".into());
        }
        if !(run.burnin_epsilon.is_finite() && run.burnin_epsilon > 0.0) {
            return bad(format!("run.burnin_epsilon must be > 0, got {}", run.burnin_epsilon));
        }
        let f = &self.fclt;
        if !(f.significance > 0.0 && f.significance <= 0.1) {
            return bad(format!("fclt.significance must lie in (0, 0.1], got {}", f.significance));
        }
        if f.grid < 2 {
            return bad("fclt.grid must be >= 2".into());
        }
        if f.s_points.is_empty()
            || f.s_points[0] <= 0.0
            || f.s_points.windows(2).any(|w| w[0] >= w[1])
            || *f.s_points.last().unwrap() > 1.0
        {
            return bad("fclt.s_points must be strictly increasing in (0, 1]".into());
        }
        if !(f.horizon.is_finite() && f.horizon > 0.0) || f.replications == 0 {
            return bad("fclt.horizon must be > 0 and fclt.replications >= 1".into());
        }
        let l = &self.lil;
        if l.n_max == 0 || l.replications == 0 || l.grid < 2 {
            return bad("lil.n_max, lil.replications must be >= 1 and lil.grid >= 2".into());
        }
        if l.calibration_trials < 2 {
            return bad("lil.calibration_trials must be >= 2".into());
        }
        let c = &self.coupling;
        if c.seeds == 0 || c.max_layers == 0 {
            return bad("coupling.seeds and coupling.max_layers must be >= 1".into());
        }
        if !(c.span > 0.0 && c.lag >= 0.0 && c.horizon > c.span.max(c.lag)) {
            return bad("coupling needs span > 0, lag >= 0 and horizon > max(span, lag)".into());
        }
        self.model().map(|_| ())
    }
}
