//! Robust per-channel thresholds and negative-peak detection.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// At most this many evenly strided samples feed the MAD estimate.
pub const MAD_SAMPLE_CAP: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    /// Negative voltage level; `0.0` when degenerate.
    pub value: f32,
    /// The signal had zero spread, so no meaningful threshold exists.
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub t: usize,
    pub value: f32,
    /// `|value| - |threshold|`.
    pub excursion: f32,
}

/// Median with the even-length convention (mean of the two central order statistics).
/// Reorders `values`.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty set");
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .expect("mid > 0 for even n");
        0.5 * (lower + upper)
    }
}

/// Median absolute deviation over at most [`MAD_SAMPLE_CAP`] evenly strided samples.
pub fn mad(signal: &[f32]) -> f64 {
    let stride = signal.len().div_ceil(MAD_SAMPLE_CAP).max(1);
    let mut xs: Vec<f64> = signal.iter().step_by(stride).map(|&v| f64::from(v)).collect();
    let m = median(&mut xs);
    for x in xs.iter_mut() {
        *x = (*x - m).abs();
    }
    median(&mut xs)
}

/// `theta = -kappa * MAD`.
pub fn mad_threshold(signal: &[f32], kappa: f64) -> Result<Threshold> {
    if signal.is_empty() {
        return Err(Error::InvalidParameter("threshold of an empty signal".into()));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    let spread = mad(signal);
    Ok(Threshold {
        value: (-kappa * spread) as f32,
        degenerate: spread == 0.0,
    })
}

/// True when `t` is the minimum of `signal` over `t ± window`, earliest sample winning ties.
#[inline]
fn is_window_min(signal: &[f32], t: usize, window: usize) -> bool {
    let v = signal[t];
    let lo = t.saturating_sub(window);
    let hi = (t + window + 1).min(signal.len());
    // Earlier samples must be strictly larger; later ones may tie.
    signal[lo..t].iter().all(|&s| s > v) && signal[t + 1..hi].iter().all(|&s| s >= v)
}

/// Negative peaks of `signal`.
///
/// With `local_min_only` every sample that is the minimum over `±window` is returned and
/// `threshold` is ignored. Otherwise only such minima at or below `threshold` are kept, which
/// leaves at most one peak per window and guarantees peaks more than `window` samples apart.
pub fn detect_peaks(
    signal: &[f32],
    threshold: f32,
    window: usize,
    local_min_only: bool,
) -> Vec<(usize, f32)> {
    detect_peaks_in(signal, threshold, window, local_min_only, 0..signal.len())
}

/// As [`detect_peaks`] but only reports candidates inside `range`; windows still see the
/// whole signal.
pub fn detect_peaks_in(
    signal: &[f32],
    threshold: f32,
    window: usize,
    local_min_only: bool,
    range: Range<usize>,
) -> Vec<(usize, f32)> {
    assert!(window >= 1, "refractory window must be at least one sample");
    let end = range.end.min(signal.len());
    let mut out = Vec::new();
    for t in range.start..end {
        let v = signal[t];
        if !local_min_only && v > threshold {
            continue;
        }
        // Cheap neighbour check before scanning the full window.
        if (t > 0 && signal[t - 1] <= v) || (t + 1 < signal.len() && signal[t + 1] < v) {
            continue;
        }
        if is_window_min(signal, t, window) {
            out.push((t, v));
        }
    }
    out
}

/// Per-channel threshold peaks of one stretch of filtered signal.
#[derive(Clone, Debug, PartialEq)]
pub struct PeakTrain {
    pub channels: Vec<Vec<Peak>>,
    pub thresholds: Vec<Threshold>,
}

impl PeakTrain {
    /// Detects on every channel. Peaks outside `valid` (the reliable part of the signal) are
    /// dropped; degenerate channels get no peaks.
    pub fn detect<S: AsRef<[f32]> + Sync>(
        channels: &[S],
        thresholds: &[Threshold],
        window: usize,
        valid: Range<usize>,
    ) -> Self {
        let trains = channels
            .par_iter()
            .zip(thresholds)
            .map(|(signal, th)| channel_peaks(signal.as_ref(), *th, window, valid.clone()))
            .collect();
        Self {
            channels: trains,
            thresholds: thresholds.to_vec(),
        }
    }

    /// Re-detects channel `c` inside the given sorted, disjoint candidate ranges only, keeping
    /// peaks elsewhere. Equivalent to full re-detection when the signal changed only in
    /// samples whose windows fall inside those ranges.
    pub fn redetect(
        &mut self,
        c: usize,
        signal: &[f32],
        window: usize,
        valid: Range<usize>,
        ranges: &[Range<usize>],
    ) {
        let th = self.thresholds[c];
        if th.degenerate {
            return;
        }
        let old = std::mem::take(&mut self.channels[c]);
        let mut merged = Vec::with_capacity(old.len());
        let mut old_iter = old.into_iter().peekable();
        for r in ranges {
            while let Some(p) = old_iter.next_if(|p| p.t < r.start) {
                merged.push(p);
            }
            while old_iter.next_if(|p| p.t < r.end).is_some() {}
            let lo = r.start.max(valid.start);
            let hi = r.end.min(valid.end);
            if lo < hi {
                merged.extend(
                    detect_peaks_in(signal, th.value, window, false, lo..hi)
                        .into_iter()
                        .map(|(t, value)| to_peak(t, value, th)),
                );
            }
        }
        merged.extend(old_iter);
        self.channels[c] = merged;
    }

    pub fn summed_excursion(&self, c: usize) -> f64 {
        self.channels[c].iter().map(|p| f64::from(p.excursion)).sum()
    }
}

fn to_peak(t: usize, value: f32, th: Threshold) -> Peak {
    Peak {
        t,
        value,
        excursion: (value.abs() - th.value.abs()).max(0.0),
    }
}

fn channel_peaks(signal: &[f32], th: Threshold, window: usize, valid: Range<usize>) -> Vec<Peak> {
    if th.degenerate {
        return Vec::new();
    }
    detect_peaks_in(signal, th.value, window, false, valid)
        .into_iter()
        .map(|(t, value)| to_peak(t, value, th))
        .collect()
}
