//! Per-level feasibility of candidate segments.
//!
//! For an interior window of length `k` and a subinterval `J` of length `l`,
//! the constraint on `J` admits exactly the counts `c = #{t in J : Z_t <= theta}`
//! in `[a, b]`, which holds iff `Z_J(a) <= theta < Z_J(b + 1)` (order
//! statistics of `J`, with `Z_J(0) = -inf` and `Z_J(l + 1) = +inf`). The
//! feasible set of a segment is therefore the half-open interval
//! `[max lower, min upper)`.

use std::cell::OnceCell;

use crate::calibration::CriticalValueTable;
use crate::multiscale::{count_threshold, g_beta, local_log_likelihood, penalty, IntervalSystem};
use crate::wavelet::{quantile_order, WaveletTree};

/// Feasible values `[lower, upper)` for a segment; empty when `lower >= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleInterval {
    pub lower: f64,
    pub upper: f64,
}

impl FeasibleInterval {
    pub const UNBOUNDED: FeasibleInterval = FeasibleInterval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn is_feasible(&self) -> bool {
        self.lower < self.upper
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lower <= theta && theta < self.upper
    }

    /// Value in the interval closest to `theta`. Above the open upper end
    /// this is the largest float below `upper`.
    pub fn clamp(&self, theta: f64) -> f64 {
        if theta < self.lower {
            self.lower
        } else if theta >= self.upper {
            self.upper.next_down().max(self.lower)
        } else {
            theta
        }
    }
}

/// Admissible count range for one subinterval length.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LengthBounds {
    pub l: usize,
    pub a: usize,
    pub b: usize,
    /// Range under the relaxed pruning constraint.
    pub a0: usize,
    pub b0: usize,
}

impl LengthBounds {
    #[inline]
    fn strict(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    #[inline]
    fn relaxed(&self) -> (usize, usize) {
        (self.a0, self.b0)
    }
}

pub(crate) enum LevelVerdict {
    Feasible { theta: f64, cost: f64 },
    Infeasible { hopeless: bool },
}

/// Bounds cache and feasibility routines for one quantile level.
pub(crate) struct LevelModel<'t> {
    pub beta: f64,
    system: IntervalSystem,
    table: &'t CriticalValueTable,
    n: usize,
    relaxed_q: f64,
    by_window: Vec<OnceCell<Box<[LengthBounds]>>>,
    relaxed_by_len: Vec<OnceCell<(usize, usize)>>,
}

impl<'t> LevelModel<'t> {
    pub fn new(beta: f64, system: IntervalSystem, table: &'t CriticalValueTable, n: usize) -> Self {
        LevelModel {
            beta,
            system,
            table,
            n,
            relaxed_q: table.max_value_up_to(n),
            by_window: (0..n.max(1)).map(|_| OnceCell::new()).collect(),
            relaxed_by_len: (0..=n).map(|_| OnceCell::new()).collect(),
        }
    }

    fn relaxed_range(&self, l: usize) -> (usize, usize) {
        *self.relaxed_by_len[l].get_or_init(|| {
            admissible_counts(l, penalty(self.n, l), self.relaxed_q, self.beta)
        })
    }

    /// Count ranges for every subinterval length of an interior of length `k`.
    pub fn bounds(&self, k: usize) -> &[LengthBounds] {
        self.by_window[k].get_or_init(|| {
            let q = self.table.critical_value(k);
            self.system
                .lengths(k)
                .into_iter()
                .map(|l| {
                    let (a, b) = admissible_counts(l, penalty(k, l), q, self.beta);
                    let (a0, b0) = self.relaxed_range(l);
                    LengthBounds { l, a, b, a0, b0 }
                })
                .collect()
        })
    }

    /// Feasible interval of the segment `s..=e` (1-based), interior `s+1..=e`.
    /// With `stop_early` the scan ends as soon as the running intersection is
    /// empty, so the returned bounds are only meaningful when feasible.
    pub fn interval(&self, tree: &WaveletTree, s: usize, e: usize, stop_early: bool) -> FeasibleInterval {
        if e <= s {
            return FeasibleInterval::UNBOUNDED;
        }
        scan(tree, s, e - s, self.bounds(e - s), LengthBounds::strict, stop_early)
    }

    /// Check loss of the unconstrained fit of `s..=e`, a lower bound on the
    /// loss of any feasible fit. `total` is the sum of the segment values.
    pub fn unconstrained_loss(&self, tree: &WaveletTree, s: usize, e: usize, total: f64) -> f64 {
        let len = e - s + 1;
        let k = quantile_order(len, self.beta);
        let theta = tree.kth(s - 1, e, k - 1);
        let below = tree.smallest_sum(s - 1, e, k);
        let beta = self.beta;
        (1.0 - beta) * (k as f64 * theta - below) + beta * (total - below - (len - k) as f64 * theta)
    }

    /// Classifies the segment `s..=e` and fits its value.
    pub fn evaluate(
        &self,
        tree: &WaveletTree,
        data: &[f64],
        s: usize,
        e: usize,
        want_hopeless: bool,
        scratch: &mut Vec<u32>,
    ) -> LevelVerdict {
        let len = e - s + 1;
        let unconstrained = tree.kth(s - 1, e, quantile_order(len, self.beta) - 1);
        let theta = if e == s {
            unconstrained
        } else {
            let k = e - s;
            let bounds = self.bounds(k);
            match locate(tree, data, s, k, unconstrained, bounds, LengthBounds::strict, scratch) {
                Some(theta) => theta,
                None => {
                    let hopeless = want_hopeless
                        && locate(tree, data, s, k, unconstrained, bounds, LengthBounds::relaxed, scratch)
                            .is_none();
                    return LevelVerdict::Infeasible { hopeless };
                }
            }
        };
        LevelVerdict::Feasible {
            theta,
            cost: check_loss(&data[s - 1..e], theta, self.beta),
        }
    }
}

/// Running intersection of the per-subinterval brackets over the interior
/// `s+1..=s+k` (1-based), i.e. 0-based positions `s..s+k`.
fn scan(
    tree: &WaveletTree,
    s: usize,
    k: usize,
    bounds: &[LengthBounds],
    pick: fn(&LengthBounds) -> (usize, usize),
    stop_early: bool,
) -> FeasibleInterval {
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for lb in bounds {
        let (a, b) = pick(lb);
        let l = lb.l;
        if a == 0 && b >= l {
            continue;
        }
        for start in s..=(s + k - l) {
            if a > 0 {
                let z = tree.kth(start, start + l, a - 1);
                if z > lower {
                    lower = z;
                }
            }
            if b < l {
                let z = tree.kth(start, start + l, b);
                if z < upper {
                    upper = z;
                }
            }
            if stop_early && lower >= upper {
                return FeasibleInterval { lower, upper };
            }
        }
    }
    FeasibleInterval { lower, upper }
}

/// `clamp(theta)` on the feasible set of the interior `s+1..=s+k`, or `None`
/// when that set is empty. The lower constraints hold exactly for
/// `theta >= lower` and the upper ones exactly for `theta < upper`, and both
/// ends are interior values, so each is found by bisecting over the interior
/// order statistics.
#[allow(clippy::too_many_arguments)]
fn locate(
    tree: &WaveletTree,
    data: &[f64],
    s: usize,
    k: usize,
    theta: f64,
    bounds: &[LengthBounds],
    pick: fn(&LengthBounds) -> (usize, usize),
    prefix: &mut Vec<u32>,
) -> Option<f64> {
    if bounds.iter().any(|lb| {
        let (a, b) = pick(lb);
        a > b
    }) {
        return None;
    }
    let mut check = |v: f64, low: bool, high: bool| satisfied(data, s, k, v, bounds, pick, prefix, low, high);
    match check(theta, true, true) {
        (true, true) => Some(theta),
        (false, false) => None,
        (false, true) => {
            let r = first_rank(tree, s, k, |v| check(v, true, false).0);
            let lower = tree.kth(s, s + k, r);
            check(lower, false, true).1.then_some(lower)
        }
        (true, false) => {
            let r = first_rank(tree, s, k, |v| !check(v, false, true).1);
            let top = tree.kth(s, s + k, r).next_down();
            check(top, true, false).0.then_some(top)
        }
    }
}

/// Smallest rank `r < k` whose interior order statistic satisfies the
/// monotone predicate `hit`, which holds at the maximum.
fn first_rank(tree: &WaveletTree, s: usize, k: usize, mut hit: impl FnMut(f64) -> bool) -> usize {
    let (mut lo, mut hi) = (0usize, k - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if hit(tree.kth(s, s + k, mid)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Whether `theta` meets every lower (`count >= a`) and every upper
/// (`count <= b`) constraint on the interior. Families not requested are
/// reported as met.
///
/// Lengths are visited in increasing order. Once the extreme window counts
/// `min_l0`, `max_l0` of a length `l0` are known, every longer length `l`
/// has `min_l >= min_l0` and `max_l <= max_l0 + (l - l0)`, so its windows
/// are only counted when these bounds do not settle the constraint.
#[allow(clippy::too_many_arguments)]
fn satisfied(
    data: &[f64],
    s: usize,
    k: usize,
    theta: f64,
    bounds: &[LengthBounds],
    pick: fn(&LengthBounds) -> (usize, usize),
    prefix: &mut Vec<u32>,
    check_low: bool,
    check_high: bool,
) -> (bool, bool) {
    prefix.clear();
    prefix.push(0);
    let mut acc = 0u32;
    for &z in &data[s..s + k] {
        acc += (z <= theta) as u32;
        prefix.push(acc);
    }
    let (mut low_ok, mut high_ok) = (true, true);
    // (l0, max, min) of the last length counted
    let mut known: Option<(usize, usize, usize)> = None;
    for lb in bounds.iter().rev() {
        let (a, b) = pick(lb);
        let l = lb.l;
        let test_low = check_low && low_ok && a > 0 && known.is_none_or(|(_, _, lo)| lo < a);
        let test_high = check_high && high_ok && b < l && known.is_none_or(|(l0, hi, _)| hi + (l - l0) > b);
        if !test_low && !test_high {
            continue;
        }
        let (hi, lo) = prefix[l..]
            .iter()
            .zip(&prefix[..=k - l])
            .map(|(hi, lo)| hi - lo)
            .fold((0u32, u32::MAX), |(mx, mn), c| (mx.max(c), mn.min(c)));
        let (hi, lo) = (hi as usize, lo as usize);
        known = Some((l, hi, lo));
        if test_low && lo < a {
            low_ok = false;
        }
        if test_high && hi > b {
            high_ok = false;
        }
        if (!check_low || !low_ok) && (!check_high || !high_ok) {
            break;
        }
    }
    (low_ok, high_ok)
}

/// Counts `c` of a length-`l` subinterval whose score
/// `sqrt(2 l g(c / l)) - pen` is at most `q`, as `(a, b)`; empty when `a > b`.
/// The score falls then rises in `c`, so the admitted counts are contiguous.
pub(crate) fn admissible_counts(l: usize, pen: f64, q: f64, beta: f64) -> (usize, usize) {
    let pass = |c: usize| (2.0 * local_log_likelihood(c, l, beta)).sqrt() - pen <= q;
    let lf = l as f64;
    let floor = ((lf * beta).floor() as usize).min(l);
    let centre = if pass(floor) {
        floor
    } else if floor < l && pass(floor + 1) {
        floor + 1
    } else {
        return (1, 0);
    };
    let t = count_threshold(q, pen, l);
    let (lo_guess, hi_guess) = root_guesses(t, beta);
    let mut a = ((lf * lo_guess).round() as usize).min(centre);
    if pass(a) {
        while a > 0 && pass(a - 1) {
            a -= 1;
        }
    } else {
        while !pass(a) {
            a += 1;
        }
    }
    let mut b = ((lf * hi_guess).round() as usize).clamp(centre, l);
    if pass(b) {
        while b < l && pass(b + 1) {
            b += 1;
        }
    } else {
        while !pass(b) {
            b -= 1;
        }
    }
    (a, b)
}

/// Approximate roots of `g_beta(x) = t` below and above `beta`: the
/// quadratic approximation refined by two Newton steps.
fn root_guesses(t: f64, beta: f64) -> (f64, f64) {
    let spread = (2.0 * beta * (1.0 - beta) * t).sqrt();
    let newton = |mut x: f64, lo: f64, hi: f64| {
        for _ in 0..2 {
            let slope = (x / beta).ln() - ((1.0 - x) / (1.0 - beta)).ln();
            if !slope.is_finite() || slope == 0.0 {
                break;
            }
            x = (x - (g_beta(x, beta) - t) / slope).clamp(lo, hi);
        }
        x
    };
    let eps = 1e-12;
    (
        newton((beta - spread).clamp(eps, beta), eps, beta),
        newton((beta + spread).clamp(beta, 1.0 - eps), beta, 1.0 - eps),
    )
}

/// Check loss `sum (z - theta) (beta - 1{z <= theta})`.
pub fn check_loss(values: &[f64], theta: f64, beta: f64) -> f64 {
    values
        .iter()
        .map(|&z| {
            let r = z - theta;
            if z <= theta {
                r * (beta - 1.0)
            } else {
                r * beta
            }
        })
        .sum()
}
