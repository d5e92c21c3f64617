//! Subcommand drivers. Each returns `Ok(pass)` or an error carrying its exit code.

use crate::config::{RunConfig, S2Mode};
use crate::io::{self, float, CsvOut};
use crate::pipeline::{self, sim_err, stage};
use crate::{CliError, Command, CommonArgs};
use nlhawkes::estimate::CountSeries;
use nlhawkes::model::HawkesModel;
use nlhawkes::rng::{derive_seed, replicate};
use nlhawkes::simulate::{simulate_replication, stationary_burnin, EventSequence, SimulationOptions};
use std::path::{Path, PathBuf};

/// Replications simulated per batch by `simulate`, bounding memory.
const WRITE_CHUNK: usize = 64;

pub struct Context {
    pub config: RunConfig,
    pub model: HawkesModel,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    pub fn from_args(args: &CommonArgs) -> Result<Self, CliError> {
        let config = RunConfig::load(&args.config)?;
        let model = config.model()?;
        let seed = args.seed.unwrap_or(config.run.seed);
        let out = args
            .out
            .clone()
            .or_else(|| config.output.clone())
            .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output`".into()))?;
        Ok(Context { config, model, seed, out })
    }
}

pub fn run(command: &Command) -> Result<bool, CliError> {
    let args = match command {
        Command::Simulate(a) | Command::Estimate(a) | Command::Fclt(a) | Command::Lil(a) | Command::Verify(a) => a,
    };
    let ctx = Context::from_args(args)?;
    let workers = match args.workers {
        Some(0) => return Err(CliError::Config("--workers must be >= 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    io::ensure_dir(&ctx.out)?;
    pool.install(|| match command {
        Command::Simulate(_) => simulate(&ctx),
        Command::Estimate(_) => estimate(&ctx),
        Command::Fclt(_) => fclt(&ctx),
        Command::Lil(_) => lil(&ctx),
        Command::Verify(_) => crate::verify::verify(&ctx).map(|report| report.overall_pass),
    })
}

pub fn simulate(ctx: &Context) -> Result<bool, CliError> {
    let run = &ctx.config.run;
    let burnin = stationary_burnin(&ctx.model, run.burnin_epsilon).map_err(sim_err)?;
    let seed = derive_seed(ctx.seed, stage::MAIN);
    let options = SimulationOptions::default();
    let mut events = CsvOut::create(&ctx.out, io::EVENTS_CSV, &["replication", "time"])?;
    let mut comp = CsvOut::create(&ctx.out, io::COMPENSATOR_CSV, &["replication", "t", "lambda_integral"])?;
    let mut start = 0;
    while start < run.replications {
        let len = WRITE_CHUNK.min(run.replications - start);
        let outputs =
            replicate(len, |i| simulate_replication(&ctx.model, run.horizon, burnin, seed, start + i, &options));
        for (i, output) in outputs.into_iter().enumerate() {
            let output = output.map_err(sim_err)?;
            let r = (start + i).to_string();
            for &t in output.events.history().iter().chain(output.events.times()) {
                events.row([r.as_str(), &float(t)])?;
            }
            for &(t, lam) in &output.compensator_grid {
                comp.row([r.as_str(), &float(t), &float(lam)])?;
            }
        }
        start += len;
    }
    events.finish()?;
    comp.finish()?;
    Ok(true)
}

/// Events from a prior `simulate` in the output directory, else a fresh run.
pub fn load_or_simulate(ctx: &Context) -> Result<Vec<EventSequence>, CliError> {
    let run = &ctx.config.run;
    let path = ctx.out.join(io::EVENTS_CSV);
    if path.exists() {
        return io::read_events(&path, run.replications, run.horizon);
    }
    pipeline::stationary_runs(
        &ctx.model,
        run.horizon,
        run.replications,
        derive_seed(ctx.seed, stage::MAIN),
        run.burnin_epsilon,
        |_, out| Ok(out.events),
    )
}

fn counts_for(sequences: &[EventSequence]) -> Result<Vec<CountSeries>, CliError> {
    sequences.iter().map(pipeline::counts_of).collect()
}

/// `(μ, σ²)`: the linear closed forms when available, else estimates.
fn reference(model: &HawkesModel, counts: &[CountSeries]) -> Result<(f64, f64), CliError> {
    match pipeline::oracle(model) {
        Some(pair) => Ok(pair),
        None => {
            let (stats, _) = pipeline::estimate(model, counts)?;
            Ok((stats.mu_hat, stats.sigma2_series))
        }
    }
}

pub fn estimate(ctx: &Context) -> Result<bool, CliError> {
    let counts = counts_for(&load_or_simulate(ctx)?)?;
    let (_, report) = pipeline::estimate(&ctx.model, &counts)?;
    pipeline::write_counts(&ctx.out, &counts)?;
    io::write_json(&ctx.out, io::STATS_JSON, &report)?;
    Ok(true)
}

pub fn fclt(ctx: &Context) -> Result<bool, CliError> {
    let sequences = load_or_simulate(ctx)?;
    let counts = counts_for(&sequences)?;
    let (mu, sigma2) = reference(&ctx.model, &counts)?;
    let horizon = ctx.config.run.horizon;
    let f = &ctx.config.fclt;
    let samples = replicate(sequences.len(), |r| pipeline::fclt_sample(&ctx.model, &sequences[r], mu, horizon, f.grid))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let reports = pipeline::fclt_reports(&samples, sigma2, mu, f.significance, &f.s_points)?;
    pipeline::write_fclt_csv(&ctx.out, &samples)?;
    io::write_json(&ctx.out, io::REPORT_JSON, &reports)?;
    if reports.is_empty() {
        eprintln!("nlhawkes: {} paths is too few for any Gaussian-limit test", samples.len());
    }
    Ok(!reports.is_empty() && reports.iter().all(|r| r.pass))
}

pub fn lil(ctx: &Context) -> Result<bool, CliError> {
    if ctx.config.lil.s2_mode == S2Mode::Empirical && ctx.config.run.replications < 2 {
        return Err(CliError::Config("lil.s2_mode = \"empirical\" needs run.replications >= 2".into()));
    }
    let counts = counts_for(&load_or_simulate(ctx)?)?;
    let (mu, sigma2) = reference(&ctx.model, &counts)?;
    let outcome =
        pipeline::lil_analysis(&counts, mu, sigma2, &ctx.config.lil, derive_seed(ctx.seed, stage::CALIBRATION))?;
    pipeline::write_lil_csv(&ctx.out, 0, &outcome.paths)?;
    io::write_json(&ctx.out, io::LIL_REPORT_JSON, &outcome.report)?;
    Ok(outcome.report.tail_inside_band)
}

/// Convenience for tests: run a subcommand on a config file.
pub fn run_config(kind: &str, config: &Path, out: &Path, seed: Option<u64>, workers: Option<usize>) -> i32 {
    let mut args: Vec<String> = vec![
        "nlhawkes".into(),
        kind.into(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    if let Some(s) = seed {
        args.extend(["--seed".into(), s.to_string()]);
    }
    if let Some(w) = workers {
        args.extend(["--workers".into(), w.to_string()]);
    }
    crate::main_with_args(args)
}
