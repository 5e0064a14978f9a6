//! Slow, obviously-correct references for the fast paths in the library.

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use peelsort::sifter::agglomerate::merge_cost;

/// Agglomeration over all cluster pairs, not just neighbours. Clusters are ranked by their
/// lowest sorted position, and ties in cost go to the lowest `(left, right)` rank pair.
pub fn agglomerate_all_pairs(points: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]).then(a.cmp(&b)));
    // (first rank, members in rank order, sum)
    let mut clusters: Vec<(usize, Vec<usize>, f64)> = order
        .iter()
        .enumerate()
        .map(|(r, &i)| (r, vec![i], points[i]))
        .collect();
    while clusters.len() > 2 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (lo, hi) = if clusters[a].0 < clusters[b].0 { (a, b) } else { (b, a) };
                let cost = merge_cost(
                    clusters[lo].2,
                    clusters[lo].1.len(),
                    clusters[hi].2,
                    clusters[hi].1.len(),
                );
                let better = match best {
                    None => true,
                    Some((c, l, h)) => {
                        cost < c || (cost == c && (clusters[lo].0, clusters[hi].0) < (clusters[l].0, clusters[h].0))
                    }
                };
                if better {
                    best = Some((cost, lo, hi));
                }
            }
        }
        let (_, lo, hi) = best.unwrap();
        let upper = clusters[hi].clone();
        clusters[lo].1.extend(upper.1);
        clusters[lo].2 += upper.2;
        clusters.remove(hi);
    }
    clusters.sort_by_key(|c| c.0);
    let mut lower = clusters[0].1.clone();
    let mut upper = clusters[1].1.clone();
    lower.sort_unstable();
    upper.sort_unstable();
    (lower, upper)
}

/// Leading eigenvector of the sample covariance by dense symmetric decomposition.
pub fn dense_principal_axis(waveforms: &[Vec<f32>]) -> Vec<f64> {
    let n = waveforms.len();
    let d = waveforms[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| f64::from(waveforms[i][j]));
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred;
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.imax();
    eig.eigenvectors.column(top).iter().copied().collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Minimum over all injections of the smaller side into the larger, summing pair costs in
/// ascending row order. Returns `(cost, pairs)`.
pub fn exhaustive_assignment(cost: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (0.0, Vec::new());
    }
    let mut best = (f64::INFINITY, Vec::new());
    let mut used = vec![false; cols.max(rows)];
    if rows <= cols {
        let mut pick = Vec::with_capacity(rows);
        rows_into_cols(cost, 0, &mut used, &mut pick, &mut best);
    } else {
        let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let mut pick = Vec::with_capacity(cols);
        let mut inner = (f64::INFINITY, Vec::new());
        rows_into_cols(&t, 0, &mut used, &mut pick, &mut inner);
        let mut pairs: Vec<(usize, usize)> = inner.1.iter().map(|&(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
        best = (total, pairs);
    }
    best
}

fn rows_into_cols(
    cost: &[Vec<f64>],
    row: usize,
    used: &mut [bool],
    pick: &mut Vec<(usize, usize)>,
    best: &mut (f64, Vec<(usize, usize)>),
) {
    if row == cost.len() {
        let total: f64 = pick.iter().map(|&(r, c)| cost[r][c]).sum();
        if total < best.0 {
            *best = (total, pick.clone());
        }
        return;
    }
    for c in 0..cost[row].len() {
        if !used[c] {
            used[c] = true;
            pick.push((row, c));
            rows_into_cols(cost, row + 1, used, pick, best);
            pick.pop();
            used[c] = false;
        }
    }
}

/// Maximum bipartite matching between two spike trains by augmenting paths.
pub fn kuhn_matching(a: &[usize], b: &[usize], tol: usize) -> usize {
    let adj: Vec<Vec<usize>> = a
        .iter()
        .map(|&x| (0..b.len()).filter(|&j| x.abs_diff(b[j]) <= tol).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; b.len()];
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|k| augment(k, adj, seen, owner)) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    (0..a.len())
        .filter(|&i| augment(i, &adj, &mut vec![false; b.len()], &mut owner))
        .count()
}

/// Magnitude response `|H(f)|` of a real impulse response, zero padded to `n_fft`.
pub fn magnitude_response(h: &[f64], n_fft: usize) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n_fft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    buf[..n_fft / 2 + 1].iter().map(|c| c.norm()).collect()
}
