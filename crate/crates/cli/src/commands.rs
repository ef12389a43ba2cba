use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use muscle_core::calibration::{CalibrationKey, MIN_REPS};
use muscle_core::evaluation::{self, ExperimentConfig, Method, Scenario};
use muscle_core::{parse_series, ColumnSelector, QuantileConfig, Segmentation, TimeSeries};
use serde::Serialize;

use crate::cache::Store;
use crate::{plot, CalibrateArgs, CliError, FitArgs, ModelArgs, SimulateArgs};

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    n: usize,
    betas: &'a [f64],
    alpha: f64,
    interval_system: &'static str,
    method: &'static str,
    k_hat: usize,
    change_point_indices: &'a [usize],
    change_point_fractions: Vec<f64>,
    /// One array per level, one value per segment.
    segment_values: Vec<Vec<f64>>,
    total_loss: f64,
    calibration_key: Vec<CalibrationKey>,
    fallback_used: bool,
    level_crossings: &'a [usize],
    runtime_ms: f64,
}

fn quantiles(m: &ModelArgs) -> Result<QuantileConfig, CliError> {
    if m.mc_reps < MIN_REPS {
        return Err(CliError::Usage(format!("--mc-reps must be at least {MIN_REPS}")));
    }
    let betas = match &m.betas {
        Some(b) => b.clone(),
        None => vec![m.beta.unwrap_or(0.5)],
    };
    Ok(QuantileConfig::multi(betas, m.alpha, m.intervals)?)
}

fn method(q: &QuantileConfig, split: usize) -> Result<Method, CliError> {
    match (q.betas.len(), split) {
        (1, 0) => Ok(Method::Muscle),
        (1, p) => Ok(Method::MuscleS { piece_size: p }),
        (_, 0) => Ok(Method::MMuscle),
        _ => Err(CliError::Usage("--split works with a single level only".into())),
    }
}

fn read_series(path: &Path, column: Option<&ColumnSelector>) -> Result<TimeSeries, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_series(&text, column).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Output(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}").and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Output(format!("cannot write to stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))
}

pub(crate) fn fit(a: FitArgs) -> Result<(), CliError> {
    let q = quantiles(&a.model)?;
    let method = method(&q, a.split)?;
    let series = read_series(&a.input, a.column.as_ref())?;

    let mut store = Store::open(a.model.cache.as_deref(), a.model.verbose)?;
    let tables = store.tables(&q, series.len(), a.model.mc_reps, a.model.seed, false)?;
    store.save()?;

    let start = Instant::now();
    let seg = evaluation::fit(method, &series, &q, &tables)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    if a.model.verbose {
        eprintln!("fit: {} segments in {runtime_ms:.1} ms", seg.boundaries.len());
    }

    let report = fit_report(&seg, &q, method, &tables, runtime_ms);
    emit(a.output.as_deref(), &json(&report)?)?;
    if let Some(p) = &a.plot {
        let svg = plot::render(series.values(), &seg);
        fs::write(p, svg).map_err(|e| CliError::Output(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn fit_report<'a>(
    seg: &'a Segmentation,
    q: &QuantileConfig,
    method: Method,
    tables: &[muscle_core::CriticalValueTable],
    runtime_ms: f64,
) -> FitReport<'a> {
    let segment_values = (0..seg.betas.len())
        .map(|r| seg.values.iter().map(|v| v[r]).collect())
        .collect();
    FitReport {
        n: seg.n,
        betas: &seg.betas,
        alpha: q.alpha,
        interval_system: q.interval_system.as_str(),
        method: method.name(),
        k_hat: seg.k_hat(),
        change_point_indices: seg.change_points(),
        change_point_fractions: seg.change_locations(),
        segment_values,
        total_loss: seg.total_loss,
        calibration_key: tables.iter().map(|t| t.key).collect(),
        fallback_used: seg.fallback_used,
        level_crossings: &seg.level_crossings,
        runtime_ms,
    }
}

pub(crate) fn calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let q = quantiles(&a.model)?;
    let n = match (a.length, &a.input) {
        (Some(0), _) => return Err(CliError::Usage("--length must be positive".into())),
        (Some(n), _) => n,
        (None, Some(p)) => read_series(p, a.column.as_ref())?.len(),
        (None, None) => return Err(CliError::Usage("--length or --input is required".into())),
    };
    let mut store = Store::open(a.model.cache.as_deref(), a.model.verbose)?;
    let tables = store.tables(&q, n, a.model.mc_reps, a.model.seed, a.verify)?;
    store.save()?;
    emit(a.output.as_deref(), &json(&tables)?)
}

pub(crate) fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let q = quantiles(&a.model)?;
    let method = method(&q, a.split)?;
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let scenario = Scenario::by_name(&a.scenario).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut store = Store::open(a.model.cache.as_deref(), a.model.verbose)?;
    let tables = store.tables(&q, scenario.n, a.model.mc_reps, a.model.seed, false)?;
    store.save()?;

    let config = ExperimentConfig {
        method,
        quantiles: q,
        reps: a.reps,
        seed: a.model.seed,
    };
    let start = Instant::now();
    let result = evaluation::run_experiment(&scenario, &config, &tables)?;
    if a.model.verbose {
        eprintln!("simulate: {} reps in {:.1} ms", a.reps, start.elapsed().as_secs_f64() * 1e3);
    }
    if let Some(p) = &a.csv {
        let f = fs::File::create(p).map_err(|e| CliError::Output(format!("cannot write {}: {e}", p.display())))?;
        result.write_csv(f).map_err(|e| CliError::Output(e.to_string()))?;
    }
    emit(a.output.as_deref(), &json(&result.aggregate)?)
}
