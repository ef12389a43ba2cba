//! Layered dynamic program over segment ends.
//!
//! Layer `k` holds the ends `j` first reachable with `k` segments; every end
//! is settled in the earliest layer that reaches it, together with the least
//! cost among predecessors of the previous layer. This yields the fewest
//! segments first and the least total cost among those.
//!
//! With pruning, predecessors are tried in order of a cost lower bound and
//! the search for an end stops once the bound exceeds the best cost found;
//! a hopeless candidate also retires every predecessor at or left of it.

pub(crate) enum Candidate {
    Feasible(f64),
    /// `hopeless` certifies that every segment containing this one fails too.
    Infeasible { hopeless: bool },
}

pub(crate) trait CandidateEvaluator {
    /// Judges the 1-based segment `s..=e`.
    fn evaluate(&mut self, s: usize, e: usize, pruning: bool) -> Candidate;

    /// A value no larger than the cost of `s..=e` if it is feasible.
    fn lower_bound(&mut self, s: usize, e: usize) -> f64;
}

/// Returns the 1-based start of every segment of an optimal partition of `1..=n`.
pub(crate) fn solve<E: CandidateEvaluator>(n: usize, eval: &mut E, pruning: bool) -> Vec<usize> {
    const UNSET: usize = usize::MAX;
    let mut layer = vec![UNSET; n + 1];
    let mut cost = vec![0.0f64; n + 1];
    let mut back = vec![0usize; n + 1];
    layer[0] = 0;
    let mut frontier = vec![0usize];
    let mut k = 0;
    let mut order: Vec<(f64, usize)> = Vec::new();

    while layer[n] == UNSET {
        let mut next = Vec::new();
        // frontier[..alive] has been ruled out for all further ends
        let mut alive = 0usize;
        for j in frontier[0] + 1..=n {
            if layer[j] != UNSET {
                continue;
            }
            if alive == frontier.len() {
                break;
            }
            let upper = frontier.partition_point(|&p| p < j);
            let best = if pruning {
                best_bounded(eval, &frontier, &cost, &mut alive, upper, j, &mut order)
            } else {
                best_exhaustive(eval, &frontier, &cost, upper, j)
            };
            if let Some((c, p)) = best {
                layer[j] = k + 1;
                cost[j] = c;
                back[j] = p;
                next.push(j);
            }
        }
        // singletons are always feasible, so the next end is always reached
        assert!(!next.is_empty(), "no segment end reachable in layer {}", k + 1);
        frontier = next;
        k += 1;
    }

    let mut starts = Vec::with_capacity(k);
    let mut j = n;
    while j > 0 {
        let p = back[j];
        starts.push(p + 1);
        j = p;
    }
    starts.reverse();
    starts
}

/// Least-cost feasible predecessor, smallest index on ties.
fn best_exhaustive<E: CandidateEvaluator>(
    eval: &mut E,
    frontier: &[usize],
    cost: &[f64],
    upper: usize,
    j: usize,
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for &p in frontier[..upper].iter().rev() {
        if let Candidate::Feasible(c) = eval.evaluate(p + 1, j, false) {
            let total = cost[p] + c;
            if best.is_none_or(|(b, _)| total <= b) {
                best = Some((total, p));
            }
        }
    }
    best
}

/// Same result as [`best_exhaustive`], visiting predecessors by lower bound.
fn best_bounded<E: CandidateEvaluator>(
    eval: &mut E,
    frontier: &[usize],
    cost: &[f64],
    alive: &mut usize,
    upper: usize,
    j: usize,
    order: &mut Vec<(f64, usize)>,
) -> Option<(f64, usize)> {
    order.clear();
    for (idx, &p) in frontier.iter().enumerate().take(upper).skip(*alive) {
        order.push((cost[p] + eval.lower_bound(p + 1, j), idx));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best: Option<(f64, usize)> = None;
    for &(bound, idx) in order.iter() {
        if best.is_some_and(|(b, _)| bound > b) {
            break;
        }
        if idx < *alive {
            continue;
        }
        let p = frontier[idx];
        match eval.evaluate(p + 1, j, true) {
            Candidate::Feasible(c) => {
                let total = cost[p] + c;
                if best.is_none_or(|(b, bp)| total < b || (total == b && p < bp)) {
                    best = Some((total, p));
                }
            }
            Candidate::Infeasible { hopeless: true } => *alive = (*alive).max(idx + 1),
            Candidate::Infeasible { hopeless: false } => {}
        }
    }
    best
}
