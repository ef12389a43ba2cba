//! Accuracy measures for estimated change-point sets and fitted signals.
//! Change points are given as fractions of the unit interval.

use std::collections::HashMap;

/// Directed error `max_k min_j |tau_k - tau_hat_j|`; 1 when the estimate
/// is empty but the truth is not.
pub fn localization_error(truth: &[f64], estimate: &[f64]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    if estimate.is_empty() {
        return 1.0;
    }
    truth
        .iter()
        .map(|&t| estimate.iter().map(|&e| (t - e).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance; 0 for two empty sets, 1 if exactly one is empty.
pub fn hausdorff(truth: &[f64], estimate: &[f64]) -> f64 {
    match (truth.is_empty(), estimate.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => localization_error(truth, estimate).max(localization_error(estimate, truth)),
    }
}

/// False discoveries and their share `FD / (K_hat + 1)`. Estimate `i` is a
/// true discovery if some true change lies in
/// `[(tau_hat_{i-1} + tau_hat_i) / 2, (tau_hat_i + tau_hat_{i+1}) / 2)`
/// with `tau_hat_0 = 0` and `tau_hat_{K_hat+1} = 1`.
pub fn fdr_sample(truth: &[f64], estimate: &[f64]) -> (usize, f64) {
    let k = estimate.len();
    if k == 0 {
        return (0, 0.0);
    }
    let mut fd = 0;
    for i in 0..k {
        let prev = if i == 0 { 0.0 } else { estimate[i - 1] };
        let next = estimate.get(i + 1).copied().unwrap_or(1.0);
        let lo = 0.5 * (prev + estimate[i]);
        let hi = 0.5 * (estimate[i] + next);
        if !truth.iter().any(|&t| lo <= t && t < hi) {
            fd += 1;
        }
    }
    (fd, fd as f64 / (k + 1) as f64)
}

/// Overestimation ratio `(K_hat - K)_+ / max(K_hat, 1)`.
pub fn oer_sample(k: usize, k_hat: usize) -> f64 {
    k_hat.saturating_sub(k) as f64 / k_hat.max(1) as f64
}

/// Mean squared and mean absolute difference.
pub fn mise_miae(truth: &[f64], estimate: &[f64]) -> (f64, f64) {
    assert_eq!(truth.len(), estimate.len(), "functions on different grids");
    let n = truth.len() as f64;
    let (sq, abs) = truth
        .iter()
        .zip(estimate)
        .fold((0.0, 0.0), |(sq, abs), (&a, &b)| {
            let d = b - a;
            (sq + d * d, abs + d.abs())
        });
    (sq / n, abs / n)
}

/// V-measure: harmonic mean of homogeneity and completeness.
pub fn v_measure(truth: &[usize], estimate: &[usize]) -> f64 {
    assert_eq!(truth.len(), estimate.len(), "labelings of different length");
    let n = truth.len() as f64;
    if truth.is_empty() {
        return 1.0;
    }
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut by_truth: HashMap<usize, usize> = HashMap::new();
    let mut by_est: HashMap<usize, usize> = HashMap::new();
    for (&c, &k) in truth.iter().zip(estimate) {
        *joint.entry((c, k)).or_default() += 1;
        *by_truth.entry(c).or_default() += 1;
        *by_est.entry(k).or_default() += 1;
    }
    let entropy = |counts: &HashMap<usize, usize>| -> f64 {
        counts
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_c = entropy(&by_truth);
    let h_k = entropy(&by_est);
    let mut h_c_given_k = 0.0;
    let mut h_k_given_c = 0.0;
    for (&(c, k), &nck) in &joint {
        let p = nck as f64 / n;
        h_c_given_k -= p * (nck as f64 / by_est[&k] as f64).ln();
        h_k_given_c -= p * (nck as f64 / by_truth[&c] as f64).ln();
    }
    let homogeneity = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let completeness = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    }
}

/// Segment index of every position for 1-based segment starts.
pub fn labels_from_starts(starts: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 1..=n {
        while seg + 1 < starts.len() && i >= starts[seg + 1] {
            seg += 1;
        }
        out.push(seg);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn distance_examples() {
        assert_eq!(localization_error(&[0.5], &[0.5]), 0.0);
        assert_eq!(localization_error(&[0.25], &[0.75]), 0.5);
        assert!(close(localization_error(&[0.2, 0.8], &[0.25]), 0.55));
        assert_eq!(localization_error(&[0.2], &[]), 1.0);
        assert_eq!(hausdorff(&[0.5], &[0.5]), 0.0);
        assert_eq!(hausdorff(&[0.75], &[0.25]), 0.5);
        assert!(close(hausdorff(&[0.25], &[0.2, 0.8]), 0.55));
        assert_eq!(hausdorff(&[], &[]), 0.0);
        assert_eq!(hausdorff(&[], &[0.3]), 1.0);
        assert_eq!(hausdorff(&[0.3], &[]), 1.0);
    }

    #[test]
    fn fdr_examples() {
        let (fd, r) = fdr_sample(&[0.5], &[0.1, 0.5]);
        assert_eq!(fd, 1);
        assert!(close(r, 1.0 / 3.0));
        assert_eq!(fdr_sample(&[0.5], &[]), (0, 0.0));
    }

    #[test]
    fn oer_examples() {
        assert_eq!(oer_sample(2, 2), 0.0);
        assert_eq!(oer_sample(0, 1), 1.0);
        assert!(close(oer_sample(2, 5), 0.6));
        assert_eq!(oer_sample(3, 0), 0.0);
    }

    #[test]
    fn mise_examples() {
        let f = [1.0, 2.0, 3.0];
        assert_eq!(mise_miae(&f, &f), (0.0, 0.0));
        let g: Vec<f64> = f.iter().map(|v| v - 0.5).collect();
        let (a, b) = mise_miae(&f, &g);
        assert!(close(a, 0.25) && close(b, 0.5));
    }

    #[test]
    fn v_measure_examples() {
        assert_eq!(v_measure(&[0, 0, 1, 1], &[0, 0, 1, 1]), 1.0);
        assert_eq!(v_measure(&[0, 0, 1, 1], &[5, 5, 2, 2]), 1.0);
        // one estimated cluster: homogeneity 0, completeness 1, so V = 0
        assert_eq!(v_measure(&[0, 0, 1, 1], &[0, 0, 0, 0]), 0.0);
        // truth {0,0,1,1}, estimate {0,0,0,1}: H(C) = ln 2,
        // H(C|K) = 3/4 H(2/3, 1/3), H(K) = H(3/4, 1/4), H(K|C) = 1/2 ln 2
        let h = |ps: &[f64]| -> f64 { ps.iter().map(|p| -p * p.ln()).sum() };
        let hom = 1.0 - 0.75 * h(&[2.0 / 3.0, 1.0 / 3.0]) / 2f64.ln();
        let com = 1.0 - 0.5 * 2f64.ln() / h(&[0.75, 0.25]);
        let expect = 2.0 * hom * com / (hom + com);
        assert!(close(v_measure(&[0, 0, 1, 1], &[0, 0, 0, 1]), expect));
    }

    #[test]
    fn labels_follow_starts() {
        assert_eq!(labels_from_starts(&[1, 3, 4], 5), vec![0, 0, 1, 2, 2]);
        assert_eq!(labels_from_starts(&[1], 3), vec![0, 0, 0]);
    }

    fn fdr_direct(truth: &[f64], est: &[f64]) -> usize {
        let mut edges = vec![0.0];
        edges.extend_from_slice(est);
        edges.push(1.0);
        (1..edges.len() - 1)
            .filter(|&i| {
                let lo = (edges[i - 1] + edges[i]) / 2.0;
                let hi = (edges[i] + edges[i + 1]) / 2.0;
                truth.iter().all(|&t| t < lo || t >= hi)
            })
            .count()
    }

    fn sorted_fracs(v: Vec<u16>) -> Vec<f64> {
        let mut v: Vec<u16> = v.into_iter().map(|x| x % 999 + 1).collect();
        v.sort_unstable();
        v.dedup();
        v.into_iter().map(|x| x as f64 / 1000.0).collect()
    }

    proptest! {
        #[test]
        fn distance_properties(a in proptest::collection::vec(any::<u16>(), 0..8), b in proptest::collection::vec(any::<u16>(), 0..8)) {
            let (a, b) = (sorted_fracs(a), sorted_fracs(b));
            let h = hausdorff(&a, &b);
            prop_assert_eq!(h, hausdorff(&b, &a));
            prop_assert!((0.0..=1.0).contains(&h));
            if !a.is_empty() {
                prop_assert!(localization_error(&a, &b) <= h);
            }
            prop_assert_eq!(h == 0.0, a == b);
        }

        #[test]
        fn fdr_matches_direct(a in proptest::collection::vec(any::<u16>(), 0..8), b in proptest::collection::vec(any::<u16>(), 0..8)) {
            let (truth, est) = (sorted_fracs(a), sorted_fracs(b));
            let (fd, r) = fdr_sample(&truth, &est);
            prop_assert_eq!(fd, fdr_direct(&truth, &est));
            prop_assert!(fd <= est.len());
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn oer_in_unit_interval(k in 0usize..50, kh in 0usize..50) {
            prop_assert!((0.0..=1.0).contains(&oer_sample(k, kh)));
        }

        #[test]
        fn mise_matches_loop(pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..50)) {
            let (f, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (mut sq, mut ab) = (0.0, 0.0);
            for i in 0..f.len() {
                sq += (g[i] - f[i]).powi(2);
                ab += (g[i] - f[i]).abs();
            }
            let (m, a) = mise_miae(&f, &g);
            prop_assert!((m - sq / f.len() as f64).abs() < 1e-9);
            prop_assert!((a - ab / f.len() as f64).abs() < 1e-9);
        }

        #[test]
        fn v_measure_bounds_and_relabeling(
            t in proptest::collection::vec(0usize..4, 1..40),
            e in proptest::collection::vec(0usize..4, 40),
        ) {
            let e = &e[..t.len()];
            let v = v_measure(&t, e);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            let relabeled: Vec<usize> = e.iter().map(|&x| 7 - x).collect();
            prop_assert!((v - v_measure(&t, &relabeled)).abs() < 1e-12);
            prop_assert!((v - v_measure(e, &t)).abs() < 1e-12);
        }
    }
}
