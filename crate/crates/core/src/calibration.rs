//! Monte-Carlo critical values `q_alpha(m)` of the multiscale statistic under
//! the null, their text cache, and the analytic fallback envelope.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MuscleError, Result};
use crate::multiscale::{
    check_unit_open, multiscale_statistic, snap_ceil, IntervalSystem, PrefixKernel,
};

/// Default number of Monte-Carlo replicates per grid length.
pub const DEFAULT_REPS: usize = 5000;
/// Fewest replicates accepted by [`calibrate`].
pub const MIN_REPS: usize = 1000;
/// Every length up to this value is calibrated individually.
pub const DENSE_GRID_MAX: usize = 64;

/// Identity of a calibration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationKey {
    pub beta: f64,
    pub alpha: f64,
    pub interval_system: IntervalSystem,
    pub n_reps: usize,
    pub master_seed: u64,
}

impl CalibrationKey {
    fn bits(&self) -> (u64, u64, IntervalSystem, usize, u64) {
        (
            self.beta.to_bits(),
            self.alpha.to_bits(),
            self.interval_system,
            self.n_reps,
            self.master_seed,
        )
    }

    pub fn same_as(&self, other: &CalibrationKey) -> bool {
        self.bits() == other.bits()
    }
}

/// Result of a critical value lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    /// Set when `m` lies beyond the calibrated grid and the analytic
    /// envelope was used instead.
    pub fallback: bool,
}

/// Calibrated local quantiles on a grid of window lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub key: CalibrationKey,
    pub grid: Vec<usize>,
    pub values: Vec<f64>,
    /// Constant of the analytic envelope, the largest calibrated value.
    pub fallback_c: f64,
}

impl CriticalValueTable {
    pub fn from_parts(key: CalibrationKey, grid: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(MuscleError::invalid_input("grid and values must be non-empty and aligned"));
        }
        if grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MuscleError::invalid_input("grid must be strictly increasing from 1"));
        }
        let fallback_c = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(CriticalValueTable {
            key,
            grid,
            values,
            fallback_c,
        })
    }

    /// Largest calibrated length.
    pub fn max_len(&self) -> usize {
        *self.grid.last().unwrap()
    }

    pub fn covers(&self, n: usize) -> bool {
        self.max_len() >= n
    }

    /// `q_alpha(m)` at the smallest grid length `>= m`.
    pub fn lookup(&self, m: usize) -> Lookup {
        let idx = self.grid.partition_point(|&g| g < m);
        match self.values.get(idx) {
            Some(&value) => Lookup {
                value,
                fallback: false,
            },
            None => Lookup {
                value: fallback_bound(self.key.alpha, self.fallback_c)
                    .expect("alpha validated at calibration"),
                fallback: true,
            },
        }
    }

    pub fn critical_value(&self, m: usize) -> f64 {
        self.lookup(m).value
    }

    /// Largest value any lookup with `m <= n` can return.
    pub fn max_value_up_to(&self, n: usize) -> f64 {
        let last = self.grid.partition_point(|&g| g < n.max(1));
        if last >= self.values.len() {
            // the envelope dominates every calibrated value
            self.critical_value(n)
        } else {
            self.values[..=last].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    }

    /// Errors unless the table was calibrated for `beta` and `system`.
    pub fn check_matches(&self, beta: f64, system: IntervalSystem) -> Result<()> {
        if self.key.beta.to_bits() != beta.to_bits() || self.key.interval_system != system {
            return Err(MuscleError::TableMismatch(format!(
                "table calibrated for beta={} intervals={}, run uses beta={} intervals={}",
                self.key.beta, self.key.interval_system, beta, system
            )));
        }
        Ok(())
    }
}

/// Calibration grid for series of length `n`. ALL uses `1..=64`, powers of
/// two up to `n`, and `n` itself. DYADIC uses every length up to `n`: its
/// critical values jump within each octave, so rounding up to a sparse grid
/// can return a much smaller value.
pub fn default_grid(n: usize, system: IntervalSystem) -> Vec<usize> {
    let n = n.max(1);
    if system == IntervalSystem::Dyadic {
        return (1..=n).collect();
    }
    let mut grid: Vec<usize> = (1..=n.min(DENSE_GRID_MAX)).collect();
    let mut p = DENSE_GRID_MAX * 2;
    while p <= n {
        grid.push(p);
        p *= 2;
    }
    if *grid.last().unwrap() != n {
        grid.push(n);
    }
    grid
}

/// One draw of the null statistic on a window of `m` i.i.d. Bernoulli(beta) bits.
pub fn simulate_null_statistic<R: Rng + ?Sized>(
    m: usize,
    beta: f64,
    system: IntervalSystem,
    rng: &mut R,
) -> Result<f64> {
    let bits: Vec<bool> = (0..m).map(|_| draw_bit(rng, beta)).collect();
    multiscale_statistic(&bits, beta, system)
}

#[inline]
fn draw_bit<R: Rng + ?Sized>(rng: &mut R, beta: f64) -> bool {
    // 53-bit uniform in [0, 1)
    ((rng.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < beta
}

/// Seed of one replicate, independent of scheduling.
pub fn rep_seed(master_seed: u64, rep: usize) -> u64 {
    let h = splitmix(master_seed ^ 0x6d75_7363_6c65_0001);
    splitmix(h ^ (rep as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub(crate) fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const REP_CHUNK: usize = 256;

/// Null statistics for every length of the strictly increasing `grid`, one
/// row per length in replicate order. Replicate `r` draws one bit sequence
/// and each length takes its prefix, so a length's row does not depend on
/// the rest of the grid.
pub fn null_samples(
    grid: &[usize],
    beta: f64,
    system: IntervalSystem,
    n_reps: usize,
    master_seed: u64,
) -> Vec<Vec<f64>> {
    let kernel = PrefixKernel::new(grid, beta, system);
    let mut rows = vec![Vec::with_capacity(n_reps); grid.len()];
    for start in (0..n_reps).step_by(REP_CHUNK) {
        let draws: Vec<Vec<f64>> = (start..n_reps.min(start + REP_CHUNK))
            .into_par_iter()
            .map_init(
                || kernel.state(),
                |state, rep| {
                    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed(master_seed, rep));
                    kernel.evaluate(|| draw_bit(&mut rng, beta), state)
                },
            )
            .collect();
        for draw in draws {
            for (row, v) in rows.iter_mut().zip(draw) {
                row.push(v);
            }
        }
    }
    rows
}

/// Draws `n_reps` null statistics for window length `m`, in replicate order.
pub fn null_sample(m: usize, beta: f64, system: IntervalSystem, n_reps: usize, master_seed: u64) -> Vec<f64> {
    null_samples(&[m], beta, system, n_reps, master_seed).remove(0)
}

/// Empirical `(1 - alpha)`-quantile: the `ceil(R (1 - alpha))`-th order statistic.
pub fn upper_quantile(sample: &mut [f64], alpha: f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let r = sample.len();
    let k = snap_ceil(r as f64 * (1.0 - alpha)).clamp(1, r);
    sample[k - 1]
}

/// Calibrates `q_alpha(m)` for every `m` in `lengths`.
pub fn calibrate(
    beta: f64,
    alpha: f64,
    system: IntervalSystem,
    lengths: &[usize],
    n_reps: usize,
    master_seed: u64,
) -> Result<CriticalValueTable> {
    check_unit_open("beta", beta)?;
    check_unit_open("alpha", alpha)?;
    if lengths.is_empty() {
        return Err(MuscleError::invalid_input("calibration grid is empty"));
    }
    if n_reps < MIN_REPS {
        return Err(MuscleError::invalid_input(format!(
            "at least {MIN_REPS} Monte-Carlo replicates are required, got {n_reps}"
        )));
    }
    let mut grid = lengths.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid[0] == 0 {
        return Err(MuscleError::invalid_input("grid lengths must be >= 1"));
    }
    let values = null_samples(&grid, beta, system, n_reps, master_seed)
        .into_iter()
        .map(|mut sample| upper_quantile(&mut sample, alpha))
        .collect();
    let key = CalibrationKey {
        beta,
        alpha,
        interval_system: system,
        n_reps,
        master_seed,
    };
    CriticalValueTable::from_parts(key, grid, values)
}

/// Upper envelope `C + 2 sqrt(2 log(2 / alpha))` on the critical values.
pub fn fallback_bound(alpha: f64, fallback_c: f64) -> Result<f64> {
    check_unit_open("alpha", alpha)?;
    Ok(fallback_c + 2.0 * (2.0 * (2.0 / alpha).ln()).sqrt())
}

/// One line of the cache file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheRecord {
    pub key: CalibrationKey,
    pub m: usize,
    pub q: f64,
}

impl CacheRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            fmt_real(self.key.beta),
            fmt_real(self.key.alpha),
            self.key.interval_system,
            self.key.n_reps,
            self.key.master_seed,
            self.m,
            fmt_real(self.q)
        )
    }
}

/// 17 significant digits, enough for an exact round trip.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses cache text. Blank lines and `#` comments are skipped.
pub fn parse_cache(text: &str) -> Result<Vec<CacheRecord>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| MuscleError::CacheParse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", fields.len())));
        }
        let real = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("bad {what} '{s}'")))
        };
        let beta = real(fields[0], "beta")?;
        let alpha = real(fields[1], "alpha")?;
        check_unit_open("beta", beta).map_err(|e| err(e.detail()))?;
        check_unit_open("alpha", alpha).map_err(|e| err(e.detail()))?;
        let interval_system = fields[2]
            .parse::<IntervalSystem>()
            .map_err(|e| err(e.detail()))?;
        let n_reps = fields[3]
            .parse::<usize>()
            .map_err(|_| err(format!("bad n_reps '{}'", fields[3])))?;
        let master_seed = fields[4]
            .parse::<u64>()
            .map_err(|_| err(format!("bad seed '{}'", fields[4])))?;
        let m = fields[5]
            .parse::<usize>()
            .ok()
            .filter(|&m| m >= 1)
            .ok_or_else(|| err(format!("bad length '{}'", fields[5])))?;
        let q = real(fields[6], "critical value")?;
        out.push(CacheRecord {
            key: CalibrationKey {
                beta,
                alpha,
                interval_system,
                n_reps,
                master_seed,
            },
            m,
            q,
        });
    }
    Ok(out)
}

type KeyBits = (u64, u64, IntervalSystem, usize, u64);

/// In-memory view of a cache file.
#[derive(Debug, Default, Clone)]
pub struct CalibrationCache {
    entries: BTreeMap<(KeyBits, usize), f64>,
}

impl CalibrationCache {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cache = CalibrationCache::default();
        for rec in parse_cache(text)? {
            cache.insert(rec)?;
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds a record. Returns `true` when it was new; a differing value for
    /// an existing `(key, m)` is an error.
    pub fn insert(&mut self, rec: CacheRecord) -> Result<bool> {
        let slot = (rec.key.bits(), rec.m);
        match self.entries.get(&slot) {
            Some(&stored) if stored.to_bits() == rec.q.to_bits() => Ok(false),
            Some(&stored) => Err(MuscleError::CacheConflict {
                m: rec.m,
                stored,
                computed: rec.q,
            }),
            None => {
                self.entries.insert(slot, rec.q);
                Ok(true)
            }
        }
    }

    /// Builds a table when every grid length is present for `key`.
    pub fn table(&self, key: &CalibrationKey, grid: &[usize]) -> Option<CriticalValueTable> {
        let bits = key.bits();
        let values: Option<Vec<f64>> = grid
            .iter()
            .map(|&m| self.entries.get(&(bits, m)).copied())
            .collect();
        CriticalValueTable::from_parts(*key, grid.to_vec(), values?).ok()
    }

    /// Merges a table; returns the lines that were not yet present.
    pub fn absorb(&mut self, table: &CriticalValueTable) -> Result<Vec<String>> {
        let mut fresh = Vec::new();
        for (&m, &q) in table.grid.iter().zip(&table.values) {
            let rec = CacheRecord {
                key: table.key,
                m,
                q,
            };
            if self.insert(rec)? {
                fresh.push(rec.to_line());
            }
        }
        Ok(fresh)
    }
}

/// Renders a whole table as cache lines, one per grid length.
pub fn table_lines(table: &CriticalValueTable) -> String {
    let mut s = String::new();
    for (&m, &q) in table.grid.iter().zip(&table.values) {
        let rec = CacheRecord {
            key: table.key,
            m,
            q,
        };
        let _ = writeln!(s, "{}", rec.to_line());
    }
    s
}
