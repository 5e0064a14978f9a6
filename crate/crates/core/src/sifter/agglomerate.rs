//! Two-cluster agglomeration of 1-D projections.
//!
//! Merge cost is `(m_x - m_y)^2 * min(|x|, |y|)`. On a line the cheapest pair is always a pair
//! of neighbouring clusters in sorted order, so only adjacent pairs are tracked, in a heap
//! keyed by `(cost, left position)`. Stale heap entries are skipped lazily.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// Merge cost of two clusters given their sums and sizes.
#[inline]
pub fn merge_cost(sum_a: f64, n_a: usize, sum_b: f64, n_b: usize) -> f64 {
    let d = sum_a / n_a as f64 - sum_b / n_b as f64;
    d * d * n_a.min(n_b) as f64
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    cost: f64,
    left: usize,
    mid: usize,
    right: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.left.cmp(&other.left))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Splits `points` into two clusters. Returns original indices of the lower-valued cluster,
/// then of the upper one, each ascending. Ties in cost go to the leftmost pair.
///
/// Panics when fewer than two points are given.
pub fn cluster_1d(points: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let n = points.len();
    assert!(n >= 2, "need at least two points to split");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]).then(a.cmp(&b)));

    let mut sum: Vec<f64> = order.iter().map(|&i| points[i]).collect();
    // Clusters are contiguous runs keyed by their start position.
    let mut end: Vec<usize> = (1..=n).collect();
    let mut prev: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
    let mut alive = vec![true; n];

    let pair = |l: usize, m: usize, r: usize, sum: &[f64]| Candidate {
        cost: merge_cost(sum[l], m - l, sum[m], r - m),
        left: l,
        mid: m,
        right: r,
    };

    let mut heap = BinaryHeap::with_capacity(n);
    for i in 0..n - 1 {
        heap.push(Reverse(pair(i, i + 1, i + 2, &sum)));
    }

    let mut clusters = n;
    while clusters > 2 {
        let Reverse(c) = heap.pop().expect("adjacent pairs remain while clusters > 2");
        let valid = alive[c.left] && alive[c.mid] && end[c.left] == c.mid && end[c.mid] == c.right;
        if !valid {
            continue;
        }
        // Merge [left, mid) and [mid, right).
        sum[c.left] += sum[c.mid];
        alive[c.mid] = false;
        end[c.left] = c.right;
        if c.right < n {
            prev[c.right] = Some(c.left);
            heap.push(Reverse(pair(c.left, c.right, end[c.right], &sum)));
        }
        if let Some(p) = prev[c.left] {
            heap.push(Reverse(pair(p, c.left, c.right, &sum)));
        }
        clusters -= 1;
    }

    let split = end[0];
    let mut lower: Vec<usize> = order[..split].to_vec();
    let mut upper: Vec<usize> = order[split..].to_vec();
    lower.sort_unstable();
    upper.sort_unstable();
    (lower, upper)
}
