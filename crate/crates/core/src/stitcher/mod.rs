//! Cross-segment identity tracking.
//!
//! Each unit is reduced to its per-channel peak negative deflection. For every candidate axial
//! displacement on a 5 um grid, the earlier segment's vectors are shifted by `+delta/2` and the
//! later segment's by `-delta/2` (linear interpolation along each probe column, clamped at
//! the column ends), an optimal one-to-one assignment is solved, and the displacement with
//! the lowest total distance wins.

pub mod assignment;

use std::ops::Range;

use crate::probe_io::{LocalUnitRecord, ProbeGeometry, SegmentRecord, SortResult, UnitRecord};
use crate::sifter::SegmentResult;

/// Spacing of the displacement grid.
pub const SHIFT_STEP_UM: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StitchParams {
    pub d_max_um: f64,
    /// Relative distance gate for keeping a matched pair.
    pub mu: f64,
}

/// `A(c) = max_t -W(c, t)` for a row-major `C x width` snippet.
pub fn amplitude_vector(snippet: &[f32], width: usize) -> Vec<f32> {
    snippet
        .chunks_exact(width)
        .map(|row| row.iter().map(|&v| -v).fold(f32::NEG_INFINITY, f32::max))
        .collect()
}

/// Predicted amplitudes after the source moves `delta` um along `+y`: each channel takes its
/// column profile evaluated at `y - delta`, clamped to the column's end channels.
pub fn shift_amplitudes(amplitudes: &[f64], geometry: &ProbeGeometry, delta: f64) -> Vec<f64> {
    let mut out = amplitudes.to_vec();
    if delta == 0.0 {
        return out;
    }
    let chans = geometry.channels();
    for column in geometry.columns() {
        let ys: Vec<f64> = column.iter().map(|&c| chans[c].y).collect();
        let vals: Vec<f64> = column.iter().map(|&c| amplitudes[c]).collect();
        for &c in &column {
            out[c] = interpolate(&ys, &vals, chans[c].y - delta);
        }
    }
    out
}

fn interpolate(ys: &[f64], vals: &[f64], y: f64) -> f64 {
    let last = ys.len() - 1;
    if y <= ys[0] {
        return vals[0];
    }
    if y >= ys[last] {
        return vals[last];
    }
    let k = ys.partition_point(|&v| v <= y) - 1;
    let frac = (y - ys[k]) / (ys[k + 1] - ys[k]);
    vals[k] + frac * (vals[k + 1] - vals[k])
}

/// Candidate displacements `-d_max, ..., -5, 0, 5, ..., d_max`.
pub fn shift_grid(d_max_um: f64) -> Vec<f64> {
    let steps = (d_max_um / SHIFT_STEP_UM).floor() as i64;
    (-steps..=steps).map(|k| k as f64 * SHIFT_STEP_UM).collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub delta: f64,
    /// `(earlier index, later index)`, sorted by earlier index.
    pub pairs: Vec<(usize, usize)>,
    /// Distance of each pair, aligned with `pairs`.
    pub distances: Vec<f64>,
    pub cost: f64,
    /// Shifted vectors, kept for the acceptance gate.
    pub shifted_earlier: Vec<Vec<f64>>,
    pub shifted_later: Vec<Vec<f64>>,
}

pub fn matching_cost(
    earlier: &[Vec<f64>],
    later: &[Vec<f64>],
    geometry: &ProbeGeometry,
    delta: f64,
) -> Matching {
    let shifted_earlier: Vec<Vec<f64>> = earlier
        .iter()
        .map(|a| shift_amplitudes(a, geometry, delta / 2.0))
        .collect();
    let shifted_later: Vec<Vec<f64>> = later
        .iter()
        .map(|a| shift_amplitudes(a, geometry, -delta / 2.0))
        .collect();
    let cost: Vec<Vec<f64>> = shifted_earlier
        .iter()
        .map(|a| shifted_later.iter().map(|b| euclid(a, b)).collect())
        .collect();
    let pairs = assignment::solve(&cost);
    let distances: Vec<f64> = pairs.iter().map(|&(i, j)| cost[i][j]).collect();
    Matching {
        delta,
        cost: distances.iter().sum(),
        pairs,
        distances,
        shifted_earlier,
        shifted_later,
    }
}

/// Lowest-cost displacement; ties prefer smaller `|delta|`, then the negative one.
pub fn best_shift(
    earlier: &[Vec<f64>],
    later: &[Vec<f64>],
    geometry: &ProbeGeometry,
    grid: &[f64],
) -> Matching {
    let mut order = grid.to_vec();
    order.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    let mut best: Option<Matching> = None;
    for delta in order {
        let m = matching_cost(earlier, later, geometry, delta);
        if best.as_ref().is_none_or(|b| m.cost < b.cost) {
            best = Some(m);
        }
    }
    best.expect("shift grid is never empty")
}

/// A segment-local unit in the form stored in result files.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalUnit {
    pub spike_times: Vec<usize>,
    pub reference_channel: usize,
    pub channels: Vec<usize>,
    pub template: Vec<Vec<f32>>,
    pub amplitude: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentUnits {
    pub range: Range<usize>,
    pub units: Vec<LocalUnit>,
}

impl SegmentUnits {
    pub fn from_segment(segment: &SegmentResult, width: usize) -> Self {
        let units = segment
            .units
            .iter()
            .map(|u| LocalUnit {
                spike_times: u.spike_times.clone(),
                reference_channel: u.reference_channel,
                channels: u.channels.clone(),
                template: u
                    .template
                    .chunks_exact(width)
                    .map(|row| row.iter().map(|&v| v as f32).collect())
                    .collect(),
                amplitude: amplitude_vector(&u.snippet, width),
            })
            .collect();
        Self {
            range: segment.range.clone(),
            units,
        }
    }

    fn amplitudes(&self) -> Vec<Vec<f64>> {
        self.units
            .iter()
            .map(|u| u.amplitude.iter().map(|&v| f64::from(v)).collect())
            .collect()
    }
}

/// Recovers the per-segment units recorded in a result so they can be re-stitched.
pub fn segments_from_result(result: &SortResult) -> Vec<SegmentUnits> {
    result
        .segments
        .iter()
        .map(|seg| {
            let units = seg
                .units
                .iter()
                .map(|lu| {
                    let spike_times = result
                        .unit(lu.global_id)
                        .map(|g| {
                            g.spike_times
                                .iter()
                                .copied()
                                .filter(|t| (seg.start..seg.end).contains(t))
                                .collect()
                        })
                        .unwrap_or_default();
                    LocalUnit {
                        spike_times,
                        reference_channel: lu.reference_channel,
                        channels: lu.channels.clone(),
                        template: lu.template.clone(),
                        amplitude: lu.amplitude.clone(),
                    }
                })
                .collect();
            SegmentUnits {
                range: seg.start..seg.end,
                units,
            }
        })
        .collect()
}

fn passes_gate(a: &[f64], b: &[f64], mu: f64) -> bool {
    euclid(a, b) <= mu * norm(a).max(norm(b))
}

/// Chains segments left to right, carrying global ids across matched pairs.
pub fn stitch(
    segments: &[SegmentUnits],
    geometry: &ProbeGeometry,
    params: &StitchParams,
    n_samples: usize,
    sample_rate: f64,
) -> SortResult {
    let grid = shift_grid(params.d_max_um);
    let mut next_id = 0usize;
    let mut records: Vec<SegmentRecord> = Vec::with_capacity(segments.len());
    let mut globals: Vec<UnitRecord> = Vec::new();
    let mut previous_ids: Vec<usize> = Vec::new();

    for (index, seg) in segments.iter().enumerate() {
        let mut ids: Vec<Option<usize>> = vec![None; seg.units.len()];
        let mut shift_um = 0.0;
        if index > 0 && !segments[index - 1].units.is_empty() && !seg.units.is_empty() {
            let m = best_shift(&segments[index - 1].amplitudes(), &seg.amplitudes(), geometry, &grid);
            shift_um = m.delta;
            for &(i, j) in &m.pairs {
                if passes_gate(&m.shifted_earlier[i], &m.shifted_later[j], params.mu) {
                    ids[j] = Some(previous_ids[i]);
                }
            }
        }
        let ids: Vec<usize> = ids
            .into_iter()
            .map(|id| {
                id.unwrap_or_else(|| {
                    next_id += 1;
                    next_id - 1
                })
            })
            .collect();

        let mut locals = Vec::with_capacity(seg.units.len());
        for (local_id, (unit, &global_id)) in seg.units.iter().zip(&ids).enumerate() {
            if global_id == globals.len() {
                globals.push(UnitRecord {
                    id: global_id,
                    reference_channel: unit.reference_channel,
                    channels: unit.channels.clone(),
                    template: unit.template.clone(),
                    amplitude: unit.amplitude.clone(),
                    n_spikes: 0,
                    spike_times: Vec::new(),
                });
            }
            let g = &mut globals[global_id];
            g.spike_times.extend_from_slice(&unit.spike_times);
            g.n_spikes = g.spike_times.len();
            locals.push(LocalUnitRecord {
                local_id,
                global_id,
                reference_channel: unit.reference_channel,
                channels: unit.channels.clone(),
                template: unit.template.clone(),
                amplitude: unit.amplitude.clone(),
                n_spikes: unit.spike_times.len(),
            });
        }
        records.push(SegmentRecord {
            index,
            start: seg.range.start,
            end: seg.range.end,
            shift_um,
            units: locals,
        });
        previous_ids = ids;
    }

    SortResult {
        sample_rate,
        n_samples,
        n_channels: geometry.len(),
        segment_boundaries: segments.iter().skip(1).map(|s| s.range.start).collect(),
        units: globals,
        segments: records,
    }
}
