//! Command-line pipeline: ingest, repair, calibrate-nwp, fit-spline,
//! optimize, forecast, noise, evaluate and synth.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or model errors.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calendar::add_hours;
use crate::error::{Error, Result};
use crate::eval::{acf, distribution_summary, rmse_per_horizon};
use crate::exec::{with_jobs, Parallelism};
use crate::forecaster::{
    fit_spline_stage_from_config, noise_fit_apply, run_forecast, run_horizon, ForecastInputs, ModelConfig, ModelKind,
    SplineLabels, SplineStage, DEFAULT_NOISE_LAMBDA, HORIZONS,
};
use crate::optimize::{grid_search_noise_lambda, lambda_grid, optimize_all, OptimizationResult};
use crate::repair::{repair_joint, DEFAULT_LONG_GAP_HOURS};
use crate::series::{ingest_csv, save_series, ColumnSpec, HourlySeries};
use crate::synth::{generate, ScenarioConfig};
use crate::weather::{calibrate_nwp, load_horizon_matrix, save_horizon_matrix, HorizonMatrix, NwpSchedule, DEFAULT_SPAN};

#[derive(Debug, Parser)]
#[command(name = "loadcast", version, about = "Adaptive load forecasting for supermarket refrigeration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read a raw CSV into the canonical hourly series format.
    Ingest(IngestArgs),
    /// Fill gaps in co-registered series from the previous day or week.
    Repair(RepairArgs),
    /// Calibrate weather forecasts against observed temperature.
    CalibrateNwp(CalibrateArgs),
    /// Fit the offline spline stage for the nonlinear model.
    FitSpline(FitSplineArgs),
    /// Search forgetting factor and filter coefficient per horizon.
    Optimize(OptimizeArgs),
    /// Replay the adaptive forecaster over a record.
    Forecast(ForecastArgs),
    /// Fit the residual noise model to one-step residuals.
    Noise(NoiseArgs),
    /// RMSE per horizon and residual diagnostics.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic record with known ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model configuration as flat `key = value` text.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-horizon parameters from `optimize`, applied over the config.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    burn_in_hours: Option<usize>,
    #[arg(long)]
    utc_offset_hours: Option<i32>,
}

impl ModelArgs {
    fn resolve(&self, kind: Option<ModelKind>) -> Result<ModelConfig> {
        let mut cfg = match &self.config {
            Some(p) => ModelConfig::load(p)?,
            None => ModelConfig::default(),
        };
        if let Some(k) = kind {
            cfg.kind = k;
        }
        if let Some(h) = self.burn_in_hours {
            cfg.burn_in_hours = h;
        }
        if let Some(o) = self.utc_offset_hours {
            cfg.utc_offset_hours = o;
        }
        if let Some(p) = &self.params {
            OptimizationResult::load(p)?.apply_to(&mut cfg)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct RecordArgs {
    /// Load series CSV.
    #[arg(long)]
    load: PathBuf,
    /// Observed temperature series CSV.
    #[arg(long)]
    temp: PathBuf,
    /// Calibrated weather forecast matrix CSV.
    #[arg(long)]
    nwp: PathBuf,
}

impl RecordArgs {
    fn inputs(&self, cfg: &ModelConfig) -> Result<(HourlySeries, HourlySeries, ForecastInputs)> {
        let load = read_series(&self.load)?;
        let temp = read_series(&self.temp)?;
        let nwp = load_horizon_matrix(&self.nwp)?;
        let inputs = ForecastInputs::new(cfg, &load, &temp, &nwp, &NwpSchedule::default(), &cfg.calendar())?;
        Ok((load, temp, inputs))
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "time")]
    time_column: String,
    #[arg(long, default_value = "value")]
    value_column: String,
    #[arg(long, default_value = "")]
    unit: String,
}

#[derive(Debug, Args)]
struct RepairArgs {
    /// Series to repair together; each is written under `--out-dir` with
    /// its original file name.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Forecast matrix whose rows inside repaired stretches are replaced too.
    #[arg(long)]
    nwp: Option<PathBuf>,
    /// Gaps longer than this are filled from a week before.
    #[arg(long, default_value_t = DEFAULT_LONG_GAP_HOURS)]
    long_gap_hours: usize,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    nwp: PathBuf,
    #[arg(long)]
    temp: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SPAN)]
    span: f64,
}

#[derive(Debug, Args)]
struct FitSplineArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    load: PathBuf,
    #[arg(long)]
    temp: PathBuf,
    /// Calibrated forecasts; needed only for predicted regime labels.
    #[arg(long)]
    nwp: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    record: RecordArgs,
    #[arg(long, value_enum)]
    model_kind: Option<CliModel>,
    #[arg(long)]
    spline: Option<PathBuf>,
    /// Horizons to optimise, e.g. `1-16` or `1,4,8`; all by default.
    #[arg(long)]
    horizons: Option<String>,
    /// Worker threads for the horizon-parallel search.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ForecastArgs {
    #[command(flatten)]
    model_args: ModelArgs,
    #[command(flatten)]
    record: RecordArgs,
    #[arg(long, value_enum)]
    model: CliModel,
    /// Spline stage from `fit-spline`, required by `var-nonlin`.
    #[arg(long)]
    spline: Option<PathBuf>,
    /// Receives forecasts.csv, residuals.csv and regimes.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    /// Residual matrix from `forecast`; its horizon-1 column is modelled.
    #[arg(long)]
    residuals: PathBuf,
    #[arg(long, conflicts_with = "grid")]
    lambda: Option<f64>,
    /// Pick λ by grid search, `from:to:step`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    output: PathBuf,
    /// Grid scores as `lambda,rmse`.
    #[arg(long, requires = "grid")]
    scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    residuals: PathBuf,
    /// Noise-corrected series from `noise`; diagnostics use it when given.
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long, default_value_t = crate::forecaster::DEFAULT_BURN_IN_HOURS)]
    burn_in_hours: usize,
    #[arg(long, default_value_t = 48)]
    max_lag: usize,
    #[arg(long, default_value_t = 30)]
    bins: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scenario as flat `key = value` text.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hours: Option<usize>,
    /// Receives load.csv, temp.csv, nwp.csv and truth.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliModel {
    FixLin,
    VarLin,
    VarNonlin,
}

impl From<CliModel> for ModelKind {
    fn from(m: CliModel) -> Self {
        match m {
            CliModel::FixLin => ModelKind::FixLin,
            CliModel::VarLin => ModelKind::VarLin,
            CliModel::VarNonlin => ModelKind::VarNonlin,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Repair(a) => repair(a),
        Command::CalibrateNwp(a) => calibrate(a),
        Command::FitSpline(a) => fit_spline(a),
        Command::Optimize(a) => optimize(a),
        Command::Forecast(a) => forecast(a),
        Command::Noise(a) => noise(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a),
    }
}

fn read_series(path: &Path) -> Result<HourlySeries> {
    ingest_csv(path, &ColumnSpec::default())
}

fn write_series(series: &HourlySeries, path: &Path) -> Result<()> {
    save_series(series, path, &ColumnSpec::default())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let spec = ColumnSpec::new(&a.time_column, &a.value_column, &a.unit);
    let s = ingest_csv(&a.input, &spec)?;
    eprintln!("{} hours, {} missing", s.len(), s.missing_count());
    write_series(&s, &a.output)
}

fn repair(a: RepairArgs) -> Result<()> {
    let series = a.inputs.iter().map(|p| read_series(p)).collect::<Result<Vec<_>>>()?;
    let (repaired, runs) = repair_joint(&series, a.long_gap_hours)?;
    create_dir(&a.out_dir)?;
    for (path, s) in a.inputs.iter().zip(&repaired) {
        let name = path
            .file_name()
            .ok_or_else(|| Error::Parameter(format!("`{}` has no file name", path.display())))?;
        write_series(s, &a.out_dir.join(name))?;
    }
    if let (Some(path), Some(first)) = (&a.nwp, repaired.first()) {
        let mut m = load_horizon_matrix(path)?;
        m.repair_rows(first.start(), &runs);
        let name = path.file_name().unwrap_or_else(|| "nwp.csv".as_ref());
        save_horizon_matrix(&m, a.out_dir.join(name))?;
    }
    eprintln!("{} gap runs repaired", runs.len());
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let m = load_horizon_matrix(&a.nwp)?;
    let temp = read_series(&a.temp)?;
    save_horizon_matrix(&calibrate_nwp(&m, &temp, a.span)?, &a.output)
}

/// Regime labels from a one-hour-ahead var-lin replay, aligned to the hour
/// they describe. The first hour has no forecast and counts as open.
fn predicted_labels(inputs: &ForecastInputs, cfg: &ModelConfig) -> Result<Vec<u8>> {
    let run = run_horizon(inputs, ModelKind::VarLin, cfg.n_har, None, 1, cfg.lambda_for(1), cfg.a_ta_for(1))?;
    let mut labels = Vec::with_capacity(run.regimes.len());
    labels.push(1);
    labels.extend_from_slice(&run.regimes[..run.regimes.len() - 1]);
    Ok(labels)
}

fn fit_spline(a: FitSplineArgs) -> Result<()> {
    let cfg = a.model.resolve(None)?;
    let load = read_series(&a.load)?;
    let temp = read_series(&a.temp)?;
    let labels = match (cfg.spline_labels, &a.nwp) {
        (SplineLabels::Fixed, _) => None,
        (SplineLabels::Predicted, Some(nwp)) => {
            let nwp = load_horizon_matrix(nwp)?;
            let inputs = ForecastInputs::new(&cfg, &load, &temp, &nwp, &NwpSchedule::default(), &cfg.calendar())?;
            Some(predicted_labels(&inputs, &cfg)?)
        }
        (SplineLabels::Predicted, None) => {
            return Err(Error::Config("predicted spline labels need --nwp".into()));
        }
    };
    let stage = fit_spline_stage_from_config(&cfg, &load, &temp, labels.as_deref())?;
    stage.save(&a.output)
}

fn load_spline(kind: ModelKind, path: Option<&Path>) -> Result<Option<SplineStage>> {
    match (kind, path) {
        (ModelKind::VarNonlin, Some(p)) => Ok(Some(SplineStage::load(p)?)),
        (ModelKind::VarNonlin, None) => Err(Error::Config("var-nonlin needs a spline stage file (--spline)".into())),
        (_, Some(_)) => Err(Error::Config(format!("{kind} takes no spline stage"))),
        (_, None) => Ok(None),
    }
}

fn parse_horizons(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parameter(format!("bad horizon list `{spec}`"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() || out.iter().any(|k| !(1..=HORIZONS).contains(k)) {
        return Err(bad());
    }
    Ok(out)
}

fn optimize(a: OptimizeArgs) -> Result<()> {
    let cfg = a.model.resolve(a.model_kind.map(Into::into))?;
    let spline = load_spline(cfg.kind, a.spline.as_deref())?;
    let (_, _, inputs) = a.record.inputs(&cfg)?;
    let horizons = match &a.horizons {
        Some(s) => parse_horizons(s)?,
        None => (1..=HORIZONS).collect(),
    };
    let result = with_jobs(a.jobs, || {
        optimize_all(&cfg, spline.as_ref(), &inputs, &horizons, Parallelism::Parallel)
    })?;
    result.save(&a.output)
}

fn forecast(a: ForecastArgs) -> Result<()> {
    let cfg = a.model_args.resolve(Some(a.model.into()))?;
    let spline = load_spline(cfg.kind, a.spline.as_deref())?;
    let (_, _, inputs) = a.record.inputs(&cfg)?;
    let out = run_forecast(&cfg, spline.as_ref(), &inputs, Parallelism::Sequential)?;
    create_dir(&a.out_dir)?;
    save_horizon_matrix(&out.forecasts, a.out_dir.join("forecasts.csv"))?;
    save_horizon_matrix(&out.residuals, a.out_dir.join("residuals.csv"))?;
    save_horizon_matrix(&out.regimes, a.out_dir.join("regimes.csv"))?;
    let flagged: usize = out.flagged.iter().sum();
    if flagged > 0 {
        eprintln!("{flagged} forecasts flagged for missing inputs");
    }
    Ok(())
}

/// Horizon-1 residuals as a series indexed by target time.
fn one_step_residuals(m: &HorizonMatrix) -> Result<HourlySeries> {
    let start = *m.issue_times().first().ok_or(Error::EmptyEvaluation)?;
    HourlySeries::new(add_hours(start, 1), m.column(1), "kW")
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parameter(format!("bad grid `{spec}`, expected from:to:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [from, to, step] if step > 0.0 && to >= from => Ok(lambda_grid(from, to, step)),
        _ => Err(bad()),
    }
}

fn noise(a: NoiseArgs) -> Result<()> {
    let residuals = one_step_residuals(&load_horizon_matrix(&a.residuals)?)?;
    let lambda = match &a.grid {
        Some(spec) => {
            let search = grid_search_noise_lambda(&residuals, &parse_grid(spec)?)?;
            if let Some(path) = &a.scores {
                let mut w = csv::Writer::from_writer(create(path)?);
                w.write_record(["lambda", "rmse"])?;
                for (l, r) in &search.scores {
                    w.write_record([l.to_string(), r.to_string()])?;
                }
                w.flush().map_err(|e| Error::io(path, e))?;
            }
            eprintln!("selected lambda {}", search.best);
            search.best
        }
        None => a.lambda.unwrap_or(DEFAULT_NOISE_LAMBDA),
    };
    let (clean, _) = noise_fit_apply(&residuals, lambda)?;
    write_series(&clean, &a.output)
}

/// Values from `cut` on with trailing missing entries dropped.
fn diagnostic_window(series: &HourlySeries, cut: crate::calendar::Timestamp) -> Vec<f64> {
    let v: Vec<f64> = (0..series.len())
        .filter(|&i| series.timestamp(i) >= cut)
        .map(|i| series.values()[i])
        .collect();
    let end = v.iter().rposition(|x| !x.is_nan()).map_or(0, |i| i + 1);
    v[..end].to_vec()
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let m = load_horizon_matrix(&a.residuals)?;
    let curve = rmse_per_horizon(&m, a.burn_in_hours)?;
    let series = match &a.noise {
        Some(p) => read_series(p)?,
        None => one_step_residuals(&m)?,
    };
    let window = diagnostic_window(&series, curve.cut);
    let correlations = acf(&window, a.max_lag)?;
    let dist = distribution_summary(&window, a.bins)?;
    create_dir(&a.out_dir)?;
    curve.write_csv(create(&a.out_dir.join("rmse.csv"))?)?;
    correlations.write_csv(create(&a.out_dir.join("acf.csv"))?)?;
    dist.write_qq_csv(create(&a.out_dir.join("qq.csv"))?)?;
    dist.write_hist_csv(create(&a.out_dir.join("hist.csv"))?)?;
    eprintln!(
        "{} of {} lags outside the white-noise band",
        correlations.outside_band(a.max_lag),
        a.max_lag
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.scenario {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(h) = a.hours {
        cfg.hours = h;
    }
    let s = generate(&cfg)?;
    create_dir(&a.out_dir)?;
    write_series(&s.load, &a.out_dir.join("load.csv"))?;
    write_series(&s.temp_obs, &a.out_dir.join("temp.csv"))?;
    save_horizon_matrix(&s.nwp, a.out_dir.join("nwp.csv"))?;
    let path = a.out_dir.join("truth.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["time", "regime", "filtered_temp", "clean_load"])?;
    for i in 0..s.load.len() {
        w.write_record([
            crate::calendar::format_timestamp(s.load.timestamp(i)),
            s.truth.regimes[i].to_string(),
            s.truth.filtered_temp[i].to_string(),
            s.truth.clean_load[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}
