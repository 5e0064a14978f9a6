//! Drift-driven segment boundaries.
//!
//! `S_c(t)` sums peak excursions of channel `c` over the open window `(t, t + L)`.
//! `H(t) = sum_c |S_c(t) - S_c(t - L)|` compares the window after `t` with the one before it,
//! so it peaks where per-channel amplitudes change abruptly. Boundaries are placed on
//! prominent local maxima of `H`, keeping every segment at least `L` long.

use std::ops::Range;

use crate::detection::{median, Peak, PeakTrain};

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationPlan {
    pub grid_step: usize,
    /// Minimum segment length in samples.
    pub min_len: usize,
    /// Grid times at which `h` is evaluated, spanning `[min_len, T - 1 - min_len]`.
    pub times: Vec<usize>,
    /// Per-channel `S` on the full grid `0, step, 2*step, ...`.
    pub s: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub boundaries: Vec<usize>,
}

impl SegmentationPlan {
    pub fn segments(&self, n_samples: usize) -> Vec<Range<usize>> {
        segments_from_boundaries(&self.boundaries, n_samples)
    }
}

pub fn segments_from_boundaries(boundaries: &[usize], n_samples: usize) -> Vec<Range<usize>> {
    let mut starts = vec![0];
    starts.extend_from_slice(boundaries);
    let mut ends = boundaries.to_vec();
    ends.push(n_samples);
    starts.into_iter().zip(ends).map(|(s, e)| s..e).collect()
}

/// `S(t)` at each grid time: sum of excursions of peaks with `t < t_p < t + window`.
pub fn sliding_amplitude_sum(peaks: &[Peak], window: usize, grid: &[usize]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(peaks.len() + 1);
    prefix.push(0.0f64);
    for p in peaks {
        prefix.push(prefix.last().unwrap() + f64::from(p.excursion));
    }
    grid.iter()
        .map(|&t| {
            let lo = peaks.partition_point(|p| p.t <= t);
            let hi = peaks.partition_point(|p| p.t < t + window);
            if hi > lo {
                prefix[hi] - prefix[lo]
            } else {
                0.0
            }
        })
        .collect()
}

/// `H[i] = sum_c |S_c[i + lag] - S_c[i]|`, i.e. `H` at grid index `i + lag`.
pub fn drift_measure(s: &[Vec<f64>], lag: usize) -> Vec<f64> {
    let len = s.first().map_or(0, |c| c.len().saturating_sub(lag));
    (0..len)
        .map(|i| s.iter().map(|c| (c[i + lag] - c[i]).abs()).sum())
        .collect()
}

/// Local maxima of `h` (plateaus count once, at their centre) above `2 * median(h)`, accepted
/// greedily by descending height while keeping `min_len` from both recording ends and from
/// every accepted boundary. `times[i]` is the sample index of `h[i]`.
pub fn select_boundaries(h: &[f64], times: &[usize], min_len: usize, n_samples: usize) -> Vec<usize> {
    if h.is_empty() || n_samples < 2 * min_len {
        return Vec::new();
    }
    let floor = 2.0 * median(&mut h.to_vec());

    let mut candidates = Vec::new();
    let mut i = 0;
    while i < h.len() {
        let mut j = i;
        while j + 1 < h.len() && h[j + 1] == h[i] {
            j += 1;
        }
        let left_lower = i == 0 || h[i - 1] < h[i];
        let right_lower = j + 1 == h.len() || h[j + 1] < h[i];
        if left_lower && right_lower && h[i] > floor {
            candidates.push(i + (j - i) / 2);
        }
        i = j + 1;
    }
    candidates.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));

    let mut accepted: Vec<usize> = Vec::new();
    for idx in candidates {
        let t = times[idx];
        let clear_of_ends = t >= min_len && n_samples - t >= min_len;
        let clear_of_others = accepted.iter().all(|&b| t.abs_diff(b) >= min_len);
        if clear_of_ends && clear_of_others {
            accepted.push(t);
        }
    }
    accepted.sort_unstable();
    accepted
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Full segmentation from detected peaks. The grid step is one second, reduced when needed
/// so it divides the minimum segment length.
pub fn plan_segments(
    peaks: &PeakTrain,
    n_samples: usize,
    sample_rate: f64,
    l_min_seconds: f64,
) -> SegmentationPlan {
    let min_len = ((l_min_seconds * sample_rate).round() as usize).max(1);
    let grid_step = gcd(min_len, (sample_rate.round() as usize).max(1)).max(1);
    let lag = min_len / grid_step;

    let mut plan = SegmentationPlan {
        grid_step,
        min_len,
        times: Vec::new(),
        s: Vec::new(),
        h: Vec::new(),
        boundaries: Vec::new(),
    };
    if n_samples < 2 * min_len + 1 {
        return plan;
    }
    let last = n_samples - 1 - min_len;
    let grid: Vec<usize> = (0..=last / grid_step).map(|k| k * grid_step).collect();
    plan.s = peaks
        .channels
        .iter()
        .map(|train| sliding_amplitude_sum(train, min_len, &grid))
        .collect();
    plan.h = drift_measure(&plan.s, lag);
    plan.times = grid[lag..].to_vec();
    plan.boundaries = select_boundaries(&plan.h, &plan.times, min_len, n_samples);
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Threshold;
    use rand::{Rng, SeedableRng};

    fn peak(t: usize, excursion: f32) -> Peak {
        Peak {
            t,
            value: -10.0 - excursion,
            excursion,
        }
    }

    fn train(channels: Vec<Vec<Peak>>) -> PeakTrain {
        let n = channels.len();
        PeakTrain {
            channels,
            thresholds: vec![
                Threshold {
                    value: -10.0,
                    degenerate: false
                };
                n
            ],
        }
    }

    #[test]
    fn window_sum_is_open_interval() {
        let peaks = [peak(5, 2.0), peak(7, 3.0), peak(10, 100.0)];
        assert_eq!(sliding_amplitude_sum(&peaks, 6, &[4]), vec![5.0]);
        assert_eq!(sliding_amplitude_sum(&peaks, 6, &[5]), vec![103.0]);
        assert_eq!(sliding_amplitude_sum(&peaks, 5, &[5]), vec![3.0]);
        assert_eq!(sliding_amplitude_sum(&peaks, 3, &[20]), vec![0.0]);
    }

    #[test]
    fn drift_measure_cases() {
        let flat = vec![vec![3.0; 6]; 2];
        assert!(drift_measure(&flat, 2).iter().all(|&h| h == 0.0));

        let step = vec![vec![0.0, 0.0, 0.0, 10.0, 10.0, 10.0]];
        assert_eq!(drift_measure(&step, 1), vec![0.0, 0.0, 10.0, 0.0, 0.0]);

        let two = vec![
            vec![0.0, 0.0, 4.0, 4.0],
            vec![6.0, 6.0, 0.0, 0.0],
        ];
        assert_eq!(drift_measure(&two, 1), vec![0.0, 10.0, 0.0]);
    }

    #[test]
    fn flat_h_gives_no_boundaries() {
        let times: Vec<usize> = (10..=90).collect();
        assert!(select_boundaries(&vec![0.0; times.len()], &times, 10, 101).is_empty());
        assert!(select_boundaries(&[5.0], &[10], 10, 15).is_empty());
    }

    #[test]
    fn nearby_events_keep_only_the_larger() {
        let times: Vec<usize> = (10..=90).collect();
        let mut h = vec![1.0; times.len()];
        h[40 - 10] = 8.0;
        h[45 - 10] = 12.0;
        assert_eq!(select_boundaries(&h, &times, 10, 101), vec![45]);
        h[70 - 10] = 6.0;
        assert_eq!(select_boundaries(&h, &times, 10, 101), vec![45, 70]);
    }

    #[test]
    fn rate_step_is_found() {
        // One channel doubles its peak rate at sample 500; minimum length 100.
        let mut peaks = Vec::new();
        for t in (3..1000).step_by(10) {
            peaks.push(peak(t, 1.0));
            if t >= 500 {
                peaks.push(peak(t + 5, 1.0));
            }
        }
        let plan = plan_segments(&train(vec![peaks]), 1001, 10.0, 10.0);
        assert_eq!(plan.grid_step, 10);
        assert_eq!(plan.boundaries.len(), 1);
        assert!(plan.boundaries[0].abs_diff(500) <= 10, "{:?}", plan.boundaries);
        for seg in plan.segments(1001) {
            assert!(seg.len() >= 100);
        }
    }

    #[test]
    fn short_recording_is_one_segment() {
        let plan = plan_segments(&train(vec![vec![peak(3, 1.0)]]), 150, 10.0, 10.0);
        assert!(plan.boundaries.is_empty());
        assert_eq!(plan.segments(150), vec![0..150]);
    }

    #[test]
    fn time_reversal_mirrors_boundaries() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n_samples = 3001; // T - 1 is a multiple of the grid step
            let channels: Vec<Vec<Peak>> = (0..3)
                .map(|_| {
                    // Dense peaks with dyadic excursions: sums are exact in either direction
                    // and H essentially never has flat stretches.
                    let mut ts: Vec<usize> = (0..1500).map(|_| rng.random_range(0..n_samples)).collect();
                    ts.sort_unstable();
                    ts.dedup();
                    ts.into_iter()
                        .map(|t| peak(t, rng.random_range(1..1000) as f32 / 8.0))
                        .collect()
                })
                .collect();
            let reversed: Vec<Vec<Peak>> = channels
                .iter()
                .map(|c| c.iter().rev().map(|p| peak(n_samples - 1 - p.t, p.excursion)).collect())
                .collect();
            let fwd = plan_segments(&train(channels), n_samples, 10.0, 30.0);
            let rev = plan_segments(&train(reversed), n_samples, 10.0, 30.0);
            let mut mirrored: Vec<usize> = rev.boundaries.iter().map(|b| n_samples - 1 - b).collect();
            mirrored.sort_unstable();
            assert_eq!(fwd.boundaries, mirrored);
        }
    }
}
