//! Multiscale quantile segmentation: the plain, split-merge and multi-level
//! estimators.

mod dp;
mod feasibility;

use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::CriticalValueTable;
use crate::error::{MuscleError, Result};
use crate::multiscale::{IntervalSystem, QuantileConfig};
use crate::wavelet::WaveletTree;

use dp::{Candidate, CandidateEvaluator};
pub use feasibility::{check_loss, FeasibleInterval};
use feasibility::{LevelModel, LevelVerdict};

/// Default piece length of the split-merge variant.
pub const DEFAULT_PIECE_SIZE: usize = 300;

/// Observations `Z_1..Z_n` at design points `(i - 1) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MuscleError::invalid_input("series is empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MuscleError::invalid_input(format!(
                "non-finite value {} at position {}",
                values[i],
                i + 1
            )));
        }
        Ok(TimeSeries { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn design_point(&self, i: usize) -> f64 {
        (i - 1) as f64 / self.len() as f64
    }
}

/// A fitted piecewise constant quantile function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segmentation {
    pub n: usize,
    pub betas: Vec<f64>,
    /// 1-based start of every segment; the first is always 1.
    pub boundaries: Vec<usize>,
    /// `values[s][r]` is the fit of segment `s` at level `betas[r]`.
    pub values: Vec<Vec<f64>>,
    pub total_loss: f64,
    /// Some lookup went past the calibrated grid and used the envelope.
    pub fallback_used: bool,
    /// Segments whose fits decrease across increasing levels.
    pub level_crossings: Vec<usize>,
}

impl Segmentation {
    pub fn k_hat(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// 1-based first index of each new segment after the first.
    pub fn change_points(&self) -> &[usize] {
        &self.boundaries[1..]
    }

    /// Change locations `(b - 1) / n` on the unit interval.
    pub fn change_locations(&self) -> Vec<f64> {
        self.change_points()
            .iter()
            .map(|&b| (b - 1) as f64 / self.n as f64)
            .collect()
    }

    /// Inclusive 1-based `(start, end)` of every segment.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.boundaries.len());
        for (i, &s) in self.boundaries.iter().enumerate() {
            let e = self.boundaries.get(i + 1).map_or(self.n, |&b| b - 1);
            out.push((s, e));
        }
        out
    }

    /// Fitted value at every position for level index `level`.
    pub fn fitted(&self, level: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        for ((s, e), v) in self.segments().into_iter().zip(&self.values) {
            out.extend(std::iter::repeat_n(v[level], e - s + 1));
        }
        out
    }
}

/// Tuning switches of the dynamic program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub pruning: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { pruning: true }
    }
}

/// Feasible values of the segment `i..=j` at the first level of `config`.
pub fn segment_feasibility(
    series: &TimeSeries,
    tree: &WaveletTree,
    i: usize,
    j: usize,
    table: &CriticalValueTable,
    config: &QuantileConfig,
) -> Result<FeasibleInterval> {
    check_range(series, tree, i, j)?;
    let level = LevelModel::new(config.beta(), config.interval_system, table, series.len());
    Ok(level.interval(tree, i, j, false))
}

/// Empirical `beta`-quantile of `i..=j` clamped into `feasible`.
pub fn fit_segment_value(
    series: &TimeSeries,
    tree: &WaveletTree,
    i: usize,
    j: usize,
    feasible: FeasibleInterval,
    beta: f64,
) -> Result<f64> {
    check_range(series, tree, i, j)?;
    if !feasible.is_feasible() {
        return Err(MuscleError::InfeasibleSegment { start: i, end: j });
    }
    let theta = tree.range_quantile(i, j, beta)?;
    Ok(feasible.clamp(theta))
}

fn check_range(series: &TimeSeries, tree: &WaveletTree, i: usize, j: usize) -> Result<()> {
    let n = series.len();
    if tree.len() != n {
        return Err(MuscleError::invalid_query("tree was built for a different series"));
    }
    if i == 0 || i > j || j > n {
        return Err(MuscleError::invalid_query(format!("segment {i}..={j} outside 1..={n}")));
    }
    Ok(())
}

pub fn muscle(series: &TimeSeries, config: &QuantileConfig, table: &CriticalValueTable) -> Result<Segmentation> {
    muscle_with(series, config, table, SearchOptions::default())
}

pub fn muscle_with(
    series: &TimeSeries,
    config: &QuantileConfig,
    table: &CriticalValueTable,
    options: SearchOptions,
) -> Result<Segmentation> {
    single_level(config)?;
    check_tables(config, &[table], config.alpha)?;
    run(series.values(), &config.betas, config.interval_system, &[table], options)
}

/// Simultaneous segmentation at several quantile levels, one table per
/// level calibrated at `alpha / m`.
pub fn m_muscle(
    series: &TimeSeries,
    config: &QuantileConfig,
    tables: &[CriticalValueTable],
) -> Result<Segmentation> {
    m_muscle_with(series, config, tables, SearchOptions::default())
}

pub fn m_muscle_with(
    series: &TimeSeries,
    config: &QuantileConfig,
    tables: &[CriticalValueTable],
    options: SearchOptions,
) -> Result<Segmentation> {
    config.validate()?;
    let tables: Vec<&CriticalValueTable> = tables.iter().collect();
    check_tables(config, &tables, config.level_alpha())?;
    run(series.values(), &config.betas, config.interval_system, &tables, options)
}

/// Split-merge variant: independent runs on pieces of `piece_size`, then a
/// refit across each piece border.
pub fn muscle_s(
    series: &TimeSeries,
    config: &QuantileConfig,
    table: &CriticalValueTable,
    piece_size: usize,
) -> Result<Segmentation> {
    single_level(config)?;
    check_tables(config, &[table], config.alpha)?;
    if piece_size < 2 {
        return Err(MuscleError::invalid_input("piece size must be at least 2"));
    }
    let data = series.values();
    let n = data.len();
    let system = config.interval_system;
    let tables = [table];
    let options = SearchOptions::default();

    let starts = piece_starts(n, piece_size);
    if starts.len() == 1 {
        return run(data, &config.betas, system, &tables, options);
    }
    let pieces: Vec<Vec<usize>> = starts
        .par_iter()
        .enumerate()
        .map(|(p, &s)| {
            let e = starts.get(p + 1).map_or(n, |&b| b - 1);
            let local = optimal_starts(&data[s - 1..e], &config.betas, system, &tables, options);
            local.into_iter().map(|b| b + s - 1).collect()
        })
        .collect();
    let mut boundaries: Vec<usize> = pieces.concat();

    for &b in &starts[1..] {
        let pos = boundaries
            .binary_search(&b)
            .expect("piece starts stay segment starts");
        let left = boundaries[pos - 1];
        let right = boundaries.get(pos + 1).map_or(n, |&x| x - 1);
        let local = optimal_starts(&data[left - 1..right], &config.betas, system, &tables, options);
        boundaries.splice(pos - 1..=pos, local.into_iter().map(|x| x + left - 1));
    }

    let tree = WaveletTree::build(data)?;
    let segmenter = Segmenter::new(data, &tree, &config.betas, system, &tables);
    segmenter.finish(boundaries)
}

/// 1-based piece starts; a trailing remainder shorter than half a piece is
/// absorbed by the last piece.
fn piece_starts(n: usize, piece_size: usize) -> Vec<usize> {
    let rem = n % piece_size;
    let count = n / piece_size + usize::from(rem > 0 && 2 * rem >= piece_size);
    (0..count.max(1)).map(|p| p * piece_size + 1).collect()
}

fn single_level(config: &QuantileConfig) -> Result<()> {
    config.validate()?;
    if config.betas.len() != 1 {
        return Err(MuscleError::invalid_input(
            "single-level estimator needs exactly one quantile level",
        ));
    }
    Ok(())
}

fn check_tables(config: &QuantileConfig, tables: &[&CriticalValueTable], alpha: f64) -> Result<()> {
    if tables.len() != config.betas.len() {
        return Err(MuscleError::TableMismatch(format!(
            "{} quantile levels but {} tables",
            config.betas.len(),
            tables.len()
        )));
    }
    for (table, &beta) in tables.iter().zip(&config.betas) {
        table.check_matches(beta, config.interval_system)?;
        if (table.key.alpha - alpha).abs() > 1e-12 * alpha.max(1.0) {
            return Err(MuscleError::TableMismatch(format!(
                "table calibrated at alpha={}, run needs alpha={alpha}",
                table.key.alpha
            )));
        }
    }
    Ok(())
}

fn run(
    data: &[f64],
    betas: &[f64],
    system: IntervalSystem,
    tables: &[&CriticalValueTable],
    options: SearchOptions,
) -> Result<Segmentation> {
    let tree = WaveletTree::build(data)?;
    let mut segmenter = Segmenter::new(data, &tree, betas, system, tables);
    let starts = dp::solve(data.len(), &mut segmenter, options.pruning);
    segmenter.finish(starts)
}

fn optimal_starts(
    data: &[f64],
    betas: &[f64],
    system: IntervalSystem,
    tables: &[&CriticalValueTable],
    options: SearchOptions,
) -> Vec<usize> {
    let tree = WaveletTree::build(data).expect("series validated");
    let mut segmenter = Segmenter::new(data, &tree, betas, system, tables);
    dp::solve(data.len(), &mut segmenter, options.pruning)
}

struct Segmenter<'a> {
    data: &'a [f64],
    tree: &'a WaveletTree,
    betas: &'a [f64],
    levels: Vec<LevelModel<'a>>,
    tables: Vec<&'a CriticalValueTable>,
    scratch: Vec<u32>,
    /// `prefix[i]` = sum of the first `i` values.
    prefix: Vec<f64>,
    /// Slack covering rounding in the range-sum lower bounds.
    slack: f64,
}

impl<'a> Segmenter<'a> {
    fn new(
        data: &'a [f64],
        tree: &'a WaveletTree,
        betas: &'a [f64],
        system: IntervalSystem,
        tables: &[&'a CriticalValueTable],
    ) -> Self {
        let levels = betas
            .iter()
            .zip(tables)
            .map(|(&beta, &table)| LevelModel::new(beta, system, table, data.len()))
            .collect();
        let mut prefix = Vec::with_capacity(data.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &z in data {
            acc += z;
            prefix.push(acc);
        }
        let abs_sum: f64 = data.iter().map(|z| z.abs()).sum();
        let abs_max = data.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        let slack = 1e-9 * betas.len() as f64 * (1.0 + abs_sum + data.len() as f64 * abs_max);
        Segmenter {
            data,
            tree,
            betas,
            levels,
            tables: tables.to_vec(),
            scratch: Vec::new(),
            prefix,
            slack,
        }
    }

    fn finish(&self, boundaries: Vec<usize>) -> Result<Segmentation> {
        let n = self.data.len();
        let mut scratch = Vec::new();
        let mut values = Vec::with_capacity(boundaries.len());
        let mut total_loss = 0.0;
        let mut level_crossings = Vec::new();
        for (idx, &s) in boundaries.iter().enumerate() {
            let e = boundaries.get(idx + 1).map_or(n, |&b| b - 1);
            let mut fits = Vec::with_capacity(self.levels.len());
            for level in &self.levels {
                match level.evaluate(self.tree, self.data, s, e, false, &mut scratch) {
                    LevelVerdict::Feasible { theta, cost } => {
                        fits.push(theta);
                        total_loss += cost;
                    }
                    LevelVerdict::Infeasible { .. } => {
                        return Err(MuscleError::InfeasibleSegment { start: s, end: e })
                    }
                }
            }
            if fits.windows(2).any(|w| w[0] > w[1]) {
                level_crossings.push(idx);
            }
            values.push(fits);
        }
        let fallback_used = n > 1 && self.tables.iter().any(|t| !t.covers(n - 1));
        Ok(Segmentation {
            n,
            betas: self.betas.to_vec(),
            boundaries,
            values,
            total_loss,
            fallback_used,
            level_crossings,
        })
    }
}

impl CandidateEvaluator for Segmenter<'_> {
    fn lower_bound(&mut self, s: usize, e: usize) -> f64 {
        let total = self.prefix[e] - self.prefix[s - 1];
        let loss: f64 = self
            .levels
            .iter()
            .map(|level| level.unconstrained_loss(self.tree, s, e, total))
            .sum();
        loss - self.slack
    }

    fn evaluate(&mut self, s: usize, e: usize, pruning: bool) -> Candidate {
        let mut total = 0.0;
        let mut feasible = true;
        for level in &self.levels {
            match level.evaluate(self.tree, self.data, s, e, pruning, &mut self.scratch) {
                LevelVerdict::Feasible { cost, .. } => total += cost,
                LevelVerdict::Infeasible { hopeless: true } => {
                    return Candidate::Infeasible { hopeless: true }
                }
                LevelVerdict::Infeasible { hopeless: false } => {
                    if !pruning {
                        return Candidate::Infeasible { hopeless: false };
                    }
                    feasible = false;
                }
            }
        }
        if feasible {
            Candidate::Feasible(total)
        } else {
            Candidate::Infeasible { hopeless: false }
        }
    }
}
