//! Simulation scenarios, accuracy metrics and a repeated-experiment runner.

mod metrics;
mod scenario;

pub use metrics::{
    fdr_sample, hausdorff, labels_from_starts, localization_error, mise_miae, oer_sample, v_measure,
};
pub use scenario::{chi_sq3_median, NoiseKind, NoisePiece, Sample, Scenario, SCENARIO_NAMES};

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{calibrate, default_grid, splitmix, CriticalValueTable};
use crate::error::{MuscleError, Result};
use crate::multiscale::QuantileConfig;
use crate::segmentation::{m_muscle, muscle, muscle_s, Segmentation, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Muscle,
    MuscleS { piece_size: usize },
    MMuscle,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Muscle => "muscle",
            Method::MuscleS { .. } => "muscle_s",
            Method::MMuscle => "m_muscle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub quantiles: QuantileConfig,
    pub reps: usize,
    pub seed: u64,
}

/// Accuracy of one fitted replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub rep: usize,
    pub seed: u64,
    pub k_hat: usize,
    pub d: f64,
    pub d_h: f64,
    pub fd: usize,
    pub fdr: f64,
    pub oer: f64,
    pub mise: f64,
    pub miae: f64,
    pub vmeasure: f64,
    pub runtime_ms: f64,
}

/// Median, mean absolute deviation about the median, and mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub mad: f64,
    pub mean: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary {
                median: f64::NAN,
                mad: f64::NAN,
                mean: f64::NAN,
            };
        }
        let median = median(values);
        let n = values.len() as f64;
        Summary {
            median,
            mad: values.iter().map(|v| (v - median).abs()).sum::<f64>() / n,
            mean: values.iter().sum::<f64>() / n,
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub scenario: String,
    pub method: String,
    pub reps: usize,
    pub k_hat: Summary,
    pub d: Summary,
    pub d_h: Summary,
    pub fd: Summary,
    pub fdr: Summary,
    pub oer: Summary,
    pub mise: Summary,
    pub miae: Summary,
    pub vmeasure: Summary,
    pub runtime_ms: Summary,
}

impl AggregateReport {
    pub fn from_reports(scenario: &str, method: Method, reports: &[MetricsReport]) -> Self {
        let col = |f: fn(&MetricsReport) -> f64| -> Summary {
            Summary::of(&reports.iter().map(f).collect::<Vec<_>>())
        };
        AggregateReport {
            scenario: scenario.to_string(),
            method: method.name().to_string(),
            reps: reports.len(),
            k_hat: col(|r| r.k_hat as f64),
            d: col(|r| r.d),
            d_h: col(|r| r.d_h),
            fd: col(|r| r.fd as f64),
            fdr: col(|r| r.fdr),
            oer: col(|r| r.oer),
            mise: col(|r| r.mise),
            miae: col(|r| r.miae),
            vmeasure: col(|r| r.vmeasure),
            runtime_ms: col(|r| r.runtime_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub reports: Vec<MetricsReport>,
    pub aggregate: AggregateReport,
}

pub const CSV_HEADER: [&str; 13] = [
    "scenario", "rep", "seed", "k_hat", "d", "d_h", "fd", "fdr", "oer", "mise", "miae", "vmeasure",
    "runtime_ms",
];

impl ExperimentResult {
    /// One row per replicate, then a row of medians with `rep = median`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| MuscleError::invalid_input(format!("writing csv: {e}"));
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.reports {
            w.write_record([
                r.scenario.clone(),
                r.rep.to_string(),
                r.seed.to_string(),
                r.k_hat.to_string(),
                r.d.to_string(),
                r.d_h.to_string(),
                r.fd.to_string(),
                r.fdr.to_string(),
                r.oer.to_string(),
                r.mise.to_string(),
                r.miae.to_string(),
                r.vmeasure.to_string(),
                format!("{:.3}", r.runtime_ms),
            ])
            .map_err(io)?;
        }
        let a = &self.aggregate;
        w.write_record([
            a.scenario.clone(),
            "median".into(),
            String::new(),
            a.k_hat.median.to_string(),
            a.d.median.to_string(),
            a.d_h.median.to_string(),
            a.fd.median.to_string(),
            a.fdr.median.to_string(),
            a.oer.median.to_string(),
            a.mise.median.to_string(),
            a.miae.median.to_string(),
            a.vmeasure.median.to_string(),
            format!("{:.3}", a.runtime_ms.median),
        ])
        .map_err(io)?;
        w.flush()
            .map_err(|e| MuscleError::invalid_input(format!("writing csv: {e}")))
    }
}

/// Seed of replicate `rep` of an experiment.
pub fn replicate_seed(seed: u64, rep: usize) -> u64 {
    splitmix(splitmix(seed ^ 0x7369_6d75_6c61_7465) ^ rep as u64)
}

/// Tables for every level of `quantiles`, each at the per-level error
/// `alpha / m`, over the default grid for length `n`.
pub fn calibrate_tables(
    quantiles: &QuantileConfig,
    n: usize,
    mc_reps: usize,
    seed: u64,
) -> Result<Vec<CriticalValueTable>> {
    let grid = default_grid(n, quantiles.interval_system);
    quantiles
        .betas
        .iter()
        .map(|&b| calibrate(b, quantiles.level_alpha(), quantiles.interval_system, &grid, mc_reps, seed))
        .collect()
}

/// Fits one series with the configured method.
pub fn fit(
    method: Method,
    series: &TimeSeries,
    quantiles: &QuantileConfig,
    tables: &[CriticalValueTable],
) -> Result<Segmentation> {
    match method {
        Method::Muscle | Method::MuscleS { .. } => {
            let table = tables
                .first()
                .ok_or_else(|| MuscleError::TableMismatch("no critical value table".into()))?;
            if let Method::MuscleS { piece_size } = method {
                muscle_s(series, quantiles, table, piece_size)
            } else {
                muscle(series, quantiles, table)
            }
        }
        Method::MMuscle => m_muscle(series, quantiles, tables),
    }
}

/// Metrics of a fit against the scenario truth. Distances use the change
/// points of the signal; MISE/MIAE use the fit at the level closest to the median.
pub fn score(scenario: &Scenario, sample: &Sample, seg: &Segmentation) -> MetricsReport {
    let truth = scenario.change_fractions();
    let est = seg.change_locations();
    let (fd, fdr) = fdr_sample(&truth, &est);
    let level = seg
        .betas
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .map_or(0, |(i, _)| i);
    let (mise, miae) = mise_miae(&sample.signal, &seg.fitted(level));
    MetricsReport {
        scenario: scenario.name.clone(),
        rep: 0,
        seed: 0,
        k_hat: seg.k_hat(),
        d: localization_error(&truth, &est),
        d_h: hausdorff(&truth, &est),
        fd,
        fdr,
        oer: oer_sample(scenario.num_changes(), seg.k_hat()),
        mise,
        miae,
        vmeasure: v_measure(&scenario.labels(), &labels_from_starts(&seg.boundaries, seg.n)),
        runtime_ms: 0.0,
    }
}

/// Repeats generate-fit-score `reps` times with derived seeds.
pub fn run_experiment(
    scenario: &Scenario,
    config: &ExperimentConfig,
    tables: &[CriticalValueTable],
) -> Result<ExperimentResult> {
    scenario.validate()?;
    config.quantiles.validate()?;
    if config.reps == 0 {
        return Err(MuscleError::invalid_input("at least one replicate is required"));
    }
    let reports = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = replicate_seed(config.seed, rep);
            let sample = scenario.generate(seed)?;
            let start = Instant::now();
            let seg = fit(config.method, &sample.series, &config.quantiles, tables)?;
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(MetricsReport {
                rep,
                seed,
                runtime_ms,
                ..score(scenario, &sample, &seg)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = AggregateReport::from_reports(&scenario.name, config.method, &reports);
    Ok(ExperimentResult { reports, aggregate })
}
