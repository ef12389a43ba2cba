//! Binary quantile transform, local likelihood ratios, the scale penalty and
//! the penalized multiscale statistic, plus the root bounds that turn the
//! multiscale constraint into order-statistic brackets.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{MuscleError, Result};

/// Absolute bisection tolerance on the count fraction.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Distance to an integer below which `l * u` / `l * v` are snapped.
pub const INDEX_SNAP: f64 = 1e-9;

/// Which subintervals of a window enter the multiscale statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalSystem {
    /// Every subinterval length `1..=m`.
    All,
    /// Lengths `2^p, 2^(p-1), .., 1` with `p = floor(log2 m)`, every start.
    Dyadic,
}

impl IntervalSystem {
    /// Subinterval lengths for a window of length `m`, longest first.
    pub fn lengths(self, m: usize) -> Vec<usize> {
        match self {
            IntervalSystem::All => (1..=m).rev().collect(),
            IntervalSystem::Dyadic => {
                if m == 0 {
                    return Vec::new();
                }
                let p = usize::BITS - 1 - m.leading_zeros();
                (0..=p).rev().map(|e| 1usize << e).collect()
            }
        }
    }

    /// Number of `(start, length)` pairs for a window of length `m`.
    pub fn interval_count(self, m: usize) -> usize {
        self.lengths(m).iter().map(|&l| m + 1 - l).sum()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IntervalSystem::All => "all",
            IntervalSystem::Dyadic => "dyadic",
        }
    }
}

impl fmt::Display for IntervalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntervalSystem {
    type Err = MuscleError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(IntervalSystem::All),
            "dyadic" => Ok(IntervalSystem::Dyadic),
            other => Err(MuscleError::invalid_input(format!(
                "unknown interval system '{other}' (expected 'all' or 'dyadic')"
            ))),
        }
    }
}

/// Quantile level(s), error level and interval system of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    /// Quantile levels, strictly increasing. A single entry is plain MUSCLE.
    pub betas: Vec<f64>,
    pub alpha: f64,
    pub interval_system: IntervalSystem,
}

impl QuantileConfig {
    pub fn new(beta: f64, alpha: f64, interval_system: IntervalSystem) -> Result<Self> {
        Self::multi(vec![beta], alpha, interval_system)
    }

    pub fn multi(betas: Vec<f64>, alpha: f64, interval_system: IntervalSystem) -> Result<Self> {
        let cfg = QuantileConfig {
            betas,
            alpha,
            interval_system,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_open("alpha", self.alpha)?;
        if self.betas.is_empty() {
            return Err(MuscleError::invalid_input("at least one quantile level is required"));
        }
        for &b in &self.betas {
            check_unit_open("beta", b)?;
        }
        if self.betas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MuscleError::invalid_input(
                "quantile levels must be strictly increasing",
            ));
        }
        Ok(())
    }

    /// The first (for plain MUSCLE, the only) quantile level.
    pub fn beta(&self) -> f64 {
        self.betas[0]
    }

    /// Per-level error after the Bonferroni split over the levels.
    pub fn level_alpha(&self) -> f64 {
        self.alpha / self.betas.len() as f64
    }
}

pub(crate) fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(MuscleError::invalid_input(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// `1{z <= theta}`.
#[inline]
pub fn transform(z: f64, theta: f64) -> bool {
    z <= theta
}

#[inline]
fn xlogx_over(x: f64, b: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * (x / b).ln()
    }
}

/// Bernoulli Kullback-Leibler divergence `x log(x/beta) + (1-x) log((1-x)/(1-beta))`
/// with `0 log 0 = 0`.
#[inline]
pub fn g_beta(x: f64, beta: f64) -> f64 {
    let v = xlogx_over(x, beta) + xlogx_over(1.0 - x, 1.0 - beta);
    // rounding can push the minimum a hair below zero
    v.max(0.0)
}

/// Log-likelihood ratio `len * g_beta(count_ones / len)` of one interval.
#[inline]
pub fn local_log_likelihood(count_ones: usize, len: usize, beta: f64) -> f64 {
    debug_assert!(len >= 1 && count_ones <= len);
    len as f64 * g_beta(count_ones as f64 / len as f64, beta)
}

/// Scale penalty `sqrt(2 log(e m / l))`.
#[inline]
pub fn penalty(window_len: usize, sub_len: usize) -> f64 {
    debug_assert!(sub_len >= 1 && sub_len <= window_len);
    (2.0 * (1.0 + (window_len as f64 / sub_len as f64).ln())).sqrt()
}

/// Penalized root likelihood ratio of a single interval inside a window.
#[inline]
pub fn interval_score(count_ones: usize, len: usize, window_len: usize, beta: f64) -> f64 {
    (2.0 * local_log_likelihood(count_ones, len, beta)).sqrt() - penalty(window_len, len)
}

/// The multiscale statistic of a bit window: the maximum of
/// [`interval_score`] over every interval of `system`.
pub fn multiscale_statistic(bits: &[bool], beta: f64, system: IntervalSystem) -> Result<f64> {
    let m = bits.len();
    if m == 0 {
        return Err(MuscleError::invalid_input("empty bit sequence"));
    }
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(0usize);
    for &b in bits {
        prefix.push(prefix.last().unwrap() + b as usize);
    }
    Ok(statistic_from_prefix(&prefix, beta, system))
}

/// `prefix[i]` = ones among the first `i` bits.
pub(crate) fn statistic_from_prefix(prefix: &[usize], beta: f64, system: IntervalSystem) -> f64 {
    let m = prefix.len() - 1;
    let mut best = f64::NEG_INFINITY;
    for l in system.lengths(m) {
        let (lo, hi) = window_count_range(prefix, l);
        // l * g(c / l) is convex in c, so the extremes dominate
        let s = interval_score(lo, l, m, beta).max(interval_score(hi, l, m, beta));
        if s > best {
            best = s;
        }
    }
    best
}

/// Minimum and maximum window sum over all windows of length `l`.
#[inline]
pub(crate) fn window_count_range(prefix: &[usize], l: usize) -> (usize, usize) {
    let m = prefix.len() - 1;
    let mut lo = usize::MAX;
    let mut hi = 0;
    for s in 0..=(m - l) {
        let c = prefix[s + l] - prefix[s];
        lo = lo.min(c);
        hi = hi.max(c);
    }
    (lo, hi)
}

/// Lower and upper count fractions admitted by the constraint on one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPair {
    pub u: f64,
    pub v: f64,
}

impl BoundPair {
    /// Integer count range `[ceil(l u), floor(l v)]` with integer snapping.
    pub fn count_range(&self, l: usize) -> (usize, usize) {
        let lf = l as f64;
        let a = snap_ceil(lf * self.u);
        let b = snap_floor(lf * self.v);
        (a.min(l), b.min(l))
    }
}

/// Threshold `q~ = (q + pen)_+^2 / (2 l)` on `g_beta(W_J)`.
#[inline]
pub fn count_threshold(critical_value: f64, pen: f64, l: usize) -> f64 {
    let t = critical_value + pen;
    if t > 0.0 {
        t * t / (2.0 * l as f64)
    } else {
        0.0
    }
}

/// Roots of `g_beta(x) = q~` for window length `k`, subinterval length `l`
/// and critical value `q_alpha_k`.
pub fn count_bounds(k: usize, l: usize, q_alpha_k: f64, beta: f64) -> BoundPair {
    bounds_for_threshold(count_threshold(q_alpha_k, penalty(k, l), l), beta)
}

/// Roots of `g_beta(x) = threshold` on either side of `beta`.
pub fn bounds_for_threshold(threshold: f64, beta: f64) -> BoundPair {
    if threshold <= 0.0 {
        return BoundPair { u: beta, v: beta };
    }
    let u = if threshold >= g_beta(0.0, beta) {
        0.0
    } else {
        // g is decreasing on [0, beta]
        bisect(0.0, beta, |x| g_beta(x, beta) > threshold)
    };
    let v = if threshold >= g_beta(1.0, beta) {
        1.0
    } else {
        // g is increasing on [beta, 1]
        bisect(beta, 1.0, |x| g_beta(x, beta) <= threshold)
    };
    BoundPair { u, v }
}

/// Bisection for the switch point of a predicate that is true on the left
/// part of `[lo, hi]`; returns the boundary to `ROOT_TOLERANCE`.
fn bisect(mut lo: f64, mut hi: f64, left: impl Fn(f64) -> bool) -> f64 {
    while hi - lo > ROOT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if left(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[inline]
pub(crate) fn snap_ceil(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= INDEX_SNAP {
        r.max(0.0) as usize
    } else {
        x.ceil().max(0.0) as usize
    }
}

#[inline]
pub(crate) fn snap_floor(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= INDEX_SNAP {
        r.max(0.0) as usize
    } else {
        x.floor().max(0.0) as usize
    }
}


/// The statistic of every prefix `bits[..m]` for `m` in a sorted grid,
/// computed in one pass over the bits.
pub(crate) struct PrefixKernel {
    grid: Vec<usize>,
    /// Every subinterval length used up to the largest grid length, increasing.
    lengths: Vec<usize>,
    /// `roots[i][c] = sqrt(2 l g(c / l))` for `l = lengths[i]`.
    roots: Vec<Vec<f64>>,
    /// `penalties[j][i] = penalty(grid[j], lengths[i])` for the lengths of window `grid[j]`.
    penalties: Vec<Vec<f64>>,
}

/// Reusable buffers of [`PrefixKernel::evaluate`].
pub(crate) struct PrefixState {
    prefix: Vec<u32>,
    lo: Vec<u32>,
    hi: Vec<u32>,
}

impl PrefixKernel {
    /// `grid` must be strictly increasing and start at 1 or above.
    pub(crate) fn new(grid: &[usize], beta: f64, system: IntervalSystem) -> Self {
        debug_assert!(grid.windows(2).all(|w| w[0] < w[1]) && grid.first().is_some_and(|&m| m >= 1));
        let top = grid.last().copied().unwrap_or(0);
        let mut lengths = system.lengths(top);
        lengths.reverse();
        let roots = lengths
            .iter()
            .map(|&l| (0..=l).map(|c| (2.0 * local_log_likelihood(c, l, beta)).sqrt()).collect())
            .collect();
        let penalties = grid
            .iter()
            .map(|&m| lengths.iter().take_while(|&&l| l <= m).map(|&l| penalty(m, l)).collect())
            .collect();
        PrefixKernel {
            grid: grid.to_vec(),
            lengths,
            roots,
            penalties,
        }
    }

    pub(crate) fn state(&self) -> PrefixState {
        PrefixState {
            prefix: vec![0; self.grid.last().map_or(1, |&m| m + 1)],
            lo: vec![0; self.lengths.len()],
            hi: vec![0; self.lengths.len()],
        }
    }

    /// Statistic of each grid prefix of the bits produced by `next_bit`,
    /// bit-identical to [`multiscale_statistic`] on that prefix.
    pub(crate) fn evaluate(&self, mut next_bit: impl FnMut() -> bool, state: &mut PrefixState) -> Vec<f64> {
        let PrefixState { prefix, lo, hi } = state;
        lo.fill(u32::MAX);
        hi.fill(0);
        let mut out = Vec::with_capacity(self.grid.len());
        let mut active = 0;
        let mut next = 0;
        for m in 1..prefix.len() {
            prefix[m] = prefix[m - 1] + next_bit() as u32;
            while active < self.lengths.len() && self.lengths[active] <= m {
                active += 1;
            }
            for (i, &l) in self.lengths[..active].iter().enumerate() {
                let c = prefix[m] - prefix[m - l];
                lo[i] = lo[i].min(c);
                hi[i] = hi[i].max(c);
            }
            if m == self.grid[next] {
                // subtracting the same penalty preserves the order of the two scores
                let best = self.penalties[next]
                    .iter()
                    .zip(&self.roots)
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|((p, r), (&a, &b))| r[a as usize].max(r[b as usize]) - p)
                    .fold(f64::NEG_INFINITY, f64::max);
                out.push(best);
                next += 1;
            }
        }
        out
    }
}
