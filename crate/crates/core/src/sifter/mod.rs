//! Within-segment detect-and-subtract sorting.
//!
//! Each iteration picks the channel with the largest summed peak excursion, builds a template
//! from its threshold crossings, sweeps every local minimum on that channel against the
//! template, validates the resulting cluster, subtracts it and repeats. Channels whose
//! cluster fails validation are blacklisted for the rest of the segment.

pub mod agglomerate;
pub mod projection;
pub mod split;

use std::ops::Range;

use log::{debug, warn};

use crate::detection::{detect_peaks_in, PeakTrain, Threshold};
use crate::probe_io::ProbeGeometry;

pub use agglomerate::cluster_1d;
pub use projection::{principal_axis, principal_projection};
pub use split::{
    binary_split_cluster, difference_vector, mean_waveform, same_neuron, template_filter,
    SplitMode, WindowShape,
};

/// Channels in a template neighbourhood.
pub const NEIGHBOURHOOD: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiftParams {
    pub lambda: f64,
    pub n_min: usize,
    /// Half-width of waveform windows in samples (1 ms).
    pub half_window: usize,
    /// Local-minimum / refractory window in samples (1 ms).
    pub refractory: usize,
}

impl SiftParams {
    pub fn new(sample_rate: f64, lambda: f64, n_min: usize) -> Self {
        let one_ms = ((sample_rate * 1e-3).round() as usize).max(1);
        Self {
            lambda,
            n_min,
            half_window: one_ms,
            refractory: one_ms,
        }
    }

    pub fn width(&self) -> usize {
        2 * self.half_window + 1
    }
}

/// One accepted unit. Spike times are absolute sample indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub spike_times: Vec<usize>,
    pub reference_channel: usize,
    /// Neighbourhood of the reference channel, reference first.
    pub channels: Vec<usize>,
    /// Mean waveform on `channels`, row-major.
    pub template: Vec<f64>,
    /// Mean waveform on every channel (`C x width`, row-major), used for subtraction.
    pub snippet: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentResult {
    /// Absolute sample range of the segment.
    pub range: Range<usize>,
    /// Units in acceptance order; the local id is the index.
    pub units: Vec<Unit>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rejection {
    TooFewPeaks(usize),
    DegenerateTemplate,
    TooFewSpikes(usize),
    BelowThreshold { mean_peak: f64, threshold: f32 },
}

/// Read access to one segment's residual traces.
pub struct SegmentView<'a> {
    pub traces: &'a [Vec<f32>],
    /// Absolute index of the first sample.
    pub offset: usize,
    /// Relative range where detection is allowed (excludes filter edge effects).
    pub reliable: Range<usize>,
}

impl SegmentView<'_> {
    fn len(&self) -> usize {
        self.traces.first().map_or(0, Vec::len)
    }
}

/// Channel with the largest summed excursion among non-blacklisted channels with peaks;
/// ties go to the lower id.
pub fn select_reference_channel(peaks: &PeakTrain, blacklist: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in 0..peaks.channels.len() {
        if blacklist[c] || peaks.channels[c].is_empty() {
            continue;
        }
        let score = peaks.summed_excursion(c);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((c, score));
        }
    }
    best.map(|(c, _)| c)
}

/// Copies the window `t +- half` of `channels` into `out`, zero-padding outside the trace.
fn extract_window(traces: &[Vec<f32>], channels: &[usize], t: usize, half: usize, out: &mut Vec<f32>) {
    out.clear();
    for &ch in channels {
        let trace = &traces[ch];
        for k in 0..2 * half + 1 {
            let idx = (t + k).checked_sub(half);
            out.push(idx.and_then(|i| trace.get(i)).copied().unwrap_or(0.0));
        }
    }
}

fn windows(traces: &[Vec<f32>], channels: &[usize], times: &[usize], half: usize) -> Vec<Vec<f32>> {
    times
        .iter()
        .map(|&t| {
            let mut w = Vec::with_capacity(channels.len() * (2 * half + 1));
            extract_window(traces, channels, t, half, &mut w);
            w
        })
        .collect()
}

/// Attempts to form, match and validate one unit on reference channel `c`.
/// `peaks` must be current for the segment residual.
pub fn extract_unit(
    view: &SegmentView<'_>,
    peaks: &PeakTrain,
    c: usize,
    neighbourhood: &[usize],
    params: &SiftParams,
) -> Result<Unit, Rejection> {
    let half = params.half_window;
    let len = view.len();
    let threshold = peaks.thresholds[c];
    let shape = WindowShape {
        channels: neighbourhood.len(),
        width: params.width(),
    };

    // 1. Threshold crossings with a full window inside the segment.
    let seeds: Vec<usize> = peaks.channels[c]
        .iter()
        .map(|p| p.t)
        .filter(|&t| t >= half && t + half < len)
        .collect();
    if seeds.len() < params.n_min || threshold.degenerate {
        return Err(Rejection::TooFewPeaks(seeds.len()));
    }

    // 2. Provisional template from the largest-amplitude coherent cluster.
    let seed_waves = windows(view.traces, neighbourhood, &seeds, half);
    let retained = binary_split_cluster(&seed_waves, shape, params.lambda, &SplitMode::LargestAmplitude);
    let provisional = mean_waveform(&seed_waves, &retained);
    let target_peaks = shape.center_column(&provisional);
    let target_d = difference_vector(&provisional, shape);

    // 3. Sweep all local minima on the reference channel and keep template-like ones.
    let minima: Vec<usize> = detect_peaks_in(
        &view.traces[c],
        f32::NEG_INFINITY,
        params.refractory,
        true,
        view.reliable.clone(),
    )
    .into_iter()
    .map(|(t, _)| t)
    .collect();
    let features: Vec<Vec<f64>> = minima
        .iter()
        .map(|&t| {
            neighbourhood
                .iter()
                .map(|&ch| f64::from(view.traces[ch][t]))
                .collect()
        })
        .collect();
    let survivors = template_filter(&features, &target_peaks).map_err(|_| Rejection::DegenerateTemplate)?;
    let candidate_times: Vec<usize> = survivors.iter().map(|&i| minima[i]).collect();
    if candidate_times.is_empty() {
        return Err(Rejection::TooFewSpikes(0));
    }

    // 4. Keep the cluster that best resembles the provisional template.
    let candidate_waves = windows(view.traces, neighbourhood, &candidate_times, half);
    let cluster = binary_split_cluster(
        &candidate_waves,
        shape,
        params.lambda,
        &SplitMode::NearestTemplate(target_d),
    );

    // 5. Validate size and amplitude.
    if cluster.len() < params.n_min {
        return Err(Rejection::TooFewSpikes(cluster.len()));
    }
    let template = mean_waveform(&candidate_waves, &cluster);
    let mean_peak = template[shape.center()];
    if mean_peak > f64::from(threshold.value) {
        return Err(Rejection::BelowThreshold {
            mean_peak,
            threshold: threshold.value,
        });
    }

    let times: Vec<usize> = cluster.iter().map(|&i| candidate_times[i]).collect();
    let all: Vec<usize> = (0..view.traces.len()).collect();
    let snippet = mean_waveform(&windows(view.traces, &all, &times, half), &(0..times.len()).collect::<Vec<_>>())
        .into_iter()
        .map(|v| v as f32)
        .collect();
    Ok(Unit {
        spike_times: times.into_iter().map(|t| t + view.offset).collect(),
        reference_channel: c,
        channels: neighbourhood.to_vec(),
        template,
        snippet,
    })
}

/// Subtracts the unit's full-probe mean snippet at each of its spikes. Windows are clipped at
/// the segment edges; overlapping spikes subtract additively.
pub fn subtract_unit(residual: &mut [Vec<f32>], offset: usize, unit: &Unit, half: usize) {
    let width = 2 * half + 1;
    for (ch, trace) in residual.iter_mut().enumerate() {
        let row = &unit.snippet[ch * width..(ch + 1) * width];
        for &abs_t in &unit.spike_times {
            let t = abs_t - offset;
            for (k, &v) in row.iter().enumerate() {
                if let Some(i) = (t + k).checked_sub(half) {
                    if let Some(x) = trace.get_mut(i) {
                        *x -= v;
                    }
                }
            }
        }
    }
}

/// Merged candidate ranges whose detection outcome may change after subtracting windows of
/// `half` samples at `times`.
fn affected_ranges(times: &[usize], half: usize, window: usize, len: usize) -> Vec<Range<usize>> {
    let reach = half + window;
    let mut ranges: Vec<Range<usize>> = Vec::new();
    for &t in times {
        let r = t.saturating_sub(reach)..(t + reach + 1).min(len);
        match ranges.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => ranges.push(r),
        }
    }
    ranges
}

/// Sorts one segment of filtered traces. `thresholds` are the per-channel detection levels
/// of the whole recording; `reliable` is relative to the segment start.
pub fn sort_segment(
    traces: Vec<Vec<f32>>,
    offset: usize,
    reliable: Range<usize>,
    thresholds: &[Threshold],
    geometry: &ProbeGeometry,
    params: &SiftParams,
) -> SegmentResult {
    let n_channels = traces.len();
    let len = traces.first().map_or(0, Vec::len);
    let mut residual = traces;
    let mut peaks = PeakTrain::detect(&residual, thresholds, params.refractory, reliable.clone());
    let k = NEIGHBOURHOOD.min(n_channels);
    let neighbourhoods: Vec<Vec<usize>> = (0..n_channels)
        .map(|c| geometry.nearest_channels(c, k).expect("channel ids are dense"))
        .collect();

    let initial_peaks: usize = peaks.channels.iter().map(Vec::len).sum();
    let max_iterations = n_channels + initial_peaks / params.n_min.max(1) + 1;
    let mut blacklist = vec![false; n_channels];
    let mut units = Vec::new();

    for _ in 0..max_iterations {
        let Some(c) = select_reference_channel(&peaks, &blacklist) else {
            break;
        };
        let view = SegmentView {
            traces: &residual,
            offset,
            reliable: reliable.clone(),
        };
        match extract_unit(&view, &peaks, c, &neighbourhoods[c], params) {
            Ok(unit) => {
                debug!(
                    "segment @{offset}: unit {} on channel {c} with {} spikes",
                    units.len(),
                    unit.spike_times.len()
                );
                subtract_unit(&mut residual, offset, &unit, params.half_window);
                let rel: Vec<usize> = unit.spike_times.iter().map(|t| t - offset).collect();
                let ranges = affected_ranges(&rel, params.half_window, params.refractory, len);
                for (ch, trace) in residual.iter().enumerate() {
                    peaks.redetect(ch, trace, params.refractory, reliable.clone(), &ranges);
                }
                units.push(unit);
            }
            Err(reason) => {
                debug!("segment @{offset}: channel {c} rejected ({reason:?})");
                blacklist[c] = true;
            }
        }
    }
    if select_reference_channel(&peaks, &blacklist).is_some() {
        warn!("segment @{offset}: stopped after {max_iterations} iterations");
    }

    SegmentResult {
        range: offset..offset + len,
        units,
    }
}
