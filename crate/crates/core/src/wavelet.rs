//! Wavelet tree over a real sequence answering range k-th smallest queries.
//!
//! Values are first replaced by their rank in a stable sort, so every key is
//! distinct and ties are ordered by position. A node covering the rank range
//! `[lo, hi)` splits at `mid = lo + (hi - lo) / 2`: keys below `mid` go left,
//! the rest go right. Since every node at one depth owns exactly the ranks in
//! its range, the nodes of a level tile the positions `0..n` in rank order,
//! which lets each level keep a single prefix-count array of length `n + 1`.

use crate::error::{MuscleError, Result};
use crate::multiscale::snap_ceil;

#[derive(Debug, Clone)]
pub struct WaveletTree {
    /// Leaf payloads: the input sorted ascending, indexed by rank.
    sorted: Vec<f64>,
    /// `levels[d][p]` = keys routed left among level-`d` positions `0..p`.
    levels: Vec<Vec<u32>>,
    /// `sums[d][p]` = sum of the values routed left among positions `0..p`.
    sums: Vec<Vec<f64>>,
}

impl WaveletTree {
    pub fn build(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(MuscleError::invalid_input("cannot index an empty sequence"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MuscleError::invalid_input(format!(
                "non-finite value {} at position {}",
                values[i],
                i + 1
            )));
        }
        if n > u32::MAX as usize {
            return Err(MuscleError::invalid_input("sequence too long"));
        }

        let mut order: Vec<u32> = (0..n as u32).collect();
        // sort_by is stable, so equal values keep their positional order
        order.sort_by(|&a, &b| values[a as usize].total_cmp(&values[b as usize]));
        let sorted: Vec<f64> = order.iter().map(|&i| values[i as usize]).collect();
        let mut keys = vec![0u32; n];
        for (rank, &pos) in order.iter().enumerate() {
            keys[pos as usize] = rank as u32;
        }

        let mut levels = Vec::new();
        let mut sums = Vec::new();
        let mut nodes: Vec<(usize, usize)> = vec![(0, n)];
        let mut next = vec![0u32; n];
        while nodes.iter().any(|&(lo, hi)| hi - lo > 1) {
            let mut prefix = vec![0u32; n + 1];
            let mut left_sum = vec![0f64; n + 1];
            let mut children = Vec::with_capacity(nodes.len() * 2);
            for &(lo, hi) in &nodes {
                let size = hi - lo;
                if size <= 1 {
                    for p in lo..hi {
                        prefix[p + 1] = prefix[p];
                        left_sum[p + 1] = left_sum[p];
                        next[p] = keys[p];
                    }
                    if size == 1 {
                        children.push((lo, hi));
                    }
                    continue;
                }
                let mid = (lo + size / 2) as u32;
                let mut left = lo;
                let mut right = lo + size / 2;
                for p in lo..hi {
                    let k = keys[p];
                    if k < mid {
                        prefix[p + 1] = prefix[p] + 1;
                        left_sum[p + 1] = left_sum[p] + sorted[k as usize];
                        next[left] = k;
                        left += 1;
                    } else {
                        prefix[p + 1] = prefix[p];
                        left_sum[p + 1] = left_sum[p];
                        next[right] = k;
                        right += 1;
                    }
                }
                children.push((lo, mid as usize));
                children.push((mid as usize, hi));
            }
            levels.push(prefix);
            sums.push(left_sum);
            std::mem::swap(&mut keys, &mut next);
            nodes = children;
        }

        Ok(WaveletTree { sorted, levels, sums })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Number of internal levels; a query visits at most this many nodes.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Total number of stored rank-prefix entries.
    pub fn count_entries(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Split value of the root: the key at sorted index `n / 2`.
    pub fn root_split(&self) -> Option<f64> {
        (self.len() > 1).then(|| self.sorted[self.len() / 2])
    }

    /// k-th smallest (1-based `k`) among the 1-based positions `l..=r`.
    pub fn range_kth(&self, l: usize, r: usize, k: usize) -> Result<f64> {
        let n = self.len();
        if l == 0 || l > r || r > n {
            return Err(MuscleError::invalid_query(format!(
                "range {l}..={r} outside 1..={n}"
            )));
        }
        if k == 0 || k > r - l + 1 {
            return Err(MuscleError::invalid_query(format!(
                "order {k} outside 1..={}",
                r - l + 1
            )));
        }
        Ok(self.kth(l - 1, r, k - 1))
    }

    /// Empirical quantile `inf{x : F(x) >= q}` of positions `l..=r`, i.e. the
    /// `ceil((r - l + 1) q)`-th smallest.
    pub fn range_quantile(&self, l: usize, r: usize, q: f64) -> Result<f64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(MuscleError::invalid_query(format!("quantile {q} outside (0, 1]")));
        }
        if l == 0 || l > r {
            return Err(MuscleError::invalid_query(format!("empty range {l}..={r}")));
        }
        let len = r - l + 1;
        self.range_kth(l, r, quantile_order(len, q))
    }

    /// Unchecked query: 0-based `k` among 0-based half-open positions `[start, end)`.
    #[inline]
    pub(crate) fn kth(&self, start: usize, end: usize, mut k: usize) -> f64 {
        debug_assert!(start < end && end <= self.len() && k < end - start);
        let (mut lo, mut hi) = (0usize, self.len());
        let (mut a, mut b) = (start, end);
        for prefix in &self.levels {
            let size = hi - lo;
            if size == 1 {
                break;
            }
            let mid = lo + size / 2;
            let base = prefix[lo] as usize;
            let la = prefix[a] as usize - base;
            let lb = prefix[b] as usize - base;
            let nl = lb - la;
            if k < nl {
                a = lo + la;
                b = lo + lb;
                hi = mid;
            } else {
                k -= nl;
                a = mid + (a - lo - la);
                b = mid + (b - lo - lb);
                lo = mid;
            }
        }
        self.sorted[lo]
    }

    /// Sum of the `count` smallest values among 0-based positions
    /// `[start, end)`, ties broken by position.
    pub(crate) fn smallest_sum(&self, start: usize, end: usize, mut count: usize) -> f64 {
        debug_assert!(start <= end && end <= self.len() && count <= end - start);
        let (mut lo, mut hi) = (0usize, self.len());
        let (mut a, mut b) = (start, end);
        let mut acc = 0.0;
        for (prefix, sums) in self.levels.iter().zip(&self.sums) {
            if count == 0 {
                return acc;
            }
            let size = hi - lo;
            if size == 1 {
                break;
            }
            let mid = lo + size / 2;
            let base = prefix[lo] as usize;
            let la = prefix[a] as usize - base;
            let lb = prefix[b] as usize - base;
            let nl = lb - la;
            if count <= nl {
                a = lo + la;
                b = lo + lb;
                hi = mid;
            } else {
                acc += sums[b] - sums[a];
                count -= nl;
                a = mid + (a - lo - la);
                b = mid + (b - lo - lb);
                lo = mid;
            }
        }
        acc + count as f64 * self.sorted[lo]
    }
}

/// Order statistic index of the empirical `q`-quantile of `len` values.
#[inline]
pub(crate) fn quantile_order(len: usize, q: f64) -> usize {
    snap_ceil(len as f64 * q).clamp(1, len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn oracle(values: &[f64], l: usize, r: usize, k: usize) -> f64 {
        let mut s = values[l - 1..r].to_vec();
        s.sort_by(f64::total_cmp);
        s[k - 1]
    }

    #[test]
    fn small_examples() {
        let t = WaveletTree::build(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(t.range_kth(1, 3, 2).unwrap(), 2.0);
        let t = WaveletTree::build(&[5.0]).unwrap();
        assert_eq!(t.range_kth(1, 1, 1).unwrap(), 5.0);
        assert_eq!(t.depth(), 0);
        let t = WaveletTree::build(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.range_kth(2, 4, 1).unwrap(), 2.0);
        let t = WaveletTree::build(&[4.0, 4.0, 4.0]).unwrap();
        assert_eq!(t.range_kth(1, 3, 2).unwrap(), 4.0);
    }

    #[test]
    fn quantile_examples() {
        let t = WaveletTree::build(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.range_quantile(1, 3, 0.5).unwrap(), 2.0);
        let t = WaveletTree::build(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.range_quantile(1, 4, 0.5).unwrap(), 2.0);
        assert_eq!(t.range_quantile(1, 4, 1.0).unwrap(), 4.0);
        assert!(t.range_quantile(1, 4, 0.0).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(WaveletTree::build(&[]), Err(MuscleError::InvalidInput(_))));
        assert!(matches!(
            WaveletTree::build(&[1.0, f64::NAN]),
            Err(MuscleError::InvalidInput(_))
        ));
        assert!(WaveletTree::build(&[f64::INFINITY]).is_err());
        let t = WaveletTree::build(&[1.0, 2.0]).unwrap();
        for (l, r, k) in [(0, 1, 1), (2, 1, 1), (1, 3, 1), (1, 2, 0), (1, 2, 3)] {
            assert!(matches!(t.range_kth(l, r, k), Err(MuscleError::InvalidQuery(_))));
        }
    }

    #[test]
    fn depth_and_memory_bounds() {
        for n in 1..=300usize {
            let values: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64).collect();
            let t = WaveletTree::build(&values).unwrap();
            let ceil_log = if n <= 1 { 0 } else { (usize::BITS - (n - 1).leading_zeros()) as usize };
            assert!(t.depth() <= ceil_log);
            assert!(t.count_entries() <= n * (ceil_log + 1));
        }
    }

    #[test]
    fn prefix_counts_unit_steps() {
        let values: Vec<f64> = (0..97).map(|i| ((i * 31) % 17) as f64).collect();
        let t = WaveletTree::build(&values).unwrap();
        for level in &t.levels {
            assert_eq!(level[0], 0);
            assert!(level.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        }
    }

    #[test]
    fn concurrent_readers_agree() {
        let values: Vec<f64> = (0..200).map(|i| ((i * 37) % 53) as f64 - 20.0).collect();
        let t = WaveletTree::build(&values).unwrap();
        let serial: Vec<f64> = (1..=200).map(|r| t.range_kth(1, r, r.div_ceil(2)).unwrap()).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..4)
                .map(|_| s.spawn(|| (1..=200).map(|r| t.range_kth(1, r, r.div_ceil(2)).unwrap()).collect::<Vec<_>>()))
                .collect();
            for h in handles {
                assert_eq!(h.join().unwrap(), serial);
            }
        });
    }

    proptest! {
        #[test]
        fn smallest_sums_match_sorting(
            values in proptest::collection::vec(-20i32..20, 1..70),
            picks in proptest::collection::vec((any::<usize>(), any::<usize>(), any::<usize>()), 1..30),
        ) {
            let values: Vec<f64> = values.into_iter().map(|v| v as f64 * 0.25).collect();
            let n = values.len();
            let t = WaveletTree::build(&values).unwrap();
            for (a, b, c) in picks {
                let start = a % n;
                let end = start + 1 + b % (n - start);
                let count = c % (end - start + 1);
                let mut s = values[start..end].to_vec();
                s.sort_by(f64::total_cmp);
                let expect: f64 = s[..count].iter().sum();
                prop_assert!((t.smallest_sum(start, end, count) - expect).abs() < 1e-9);
            }
        }

        #[test]
        fn matches_sort_oracle(
            values in proptest::collection::vec(-20i32..20, 1..80),
            picks in proptest::collection::vec((any::<usize>(), any::<usize>(), any::<usize>()), 1..40),
        ) {
            let values: Vec<f64> = values.into_iter().map(|v| v as f64 * 0.5).collect();
            let n = values.len();
            let t = WaveletTree::build(&values).unwrap();
            for (a, b, c) in picks {
                let l = a % n + 1;
                let r = l + b % (n - l + 1);
                let k = c % (r - l + 1) + 1;
                prop_assert_eq!(t.range_kth(l, r, k).unwrap(), oracle(&values, l, r, k));
            }
        }

        #[test]
        fn quantile_matches_ecdf_scan(
            values in proptest::collection::vec(-10i32..10, 1..60),
            q in 0.001f64..=1.0,
        ) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let n = values.len();
            let t = WaveletTree::build(&values).unwrap();
            // inf{x : F(x) >= q} by scanning candidate data values
            let mut cands = values.clone();
            cands.sort_by(f64::total_cmp);
            let expect = cands
                .iter()
                .copied()
                .find(|&x| {
                    let count = values.iter().filter(|&&z| z <= x).count();
                    count as f64 / n as f64 >= q - 1e-12
                })
                .unwrap();
            prop_assert_eq!(t.range_quantile(1, n, q).unwrap(), expect);
        }
    }
}
