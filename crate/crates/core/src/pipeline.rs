//! End-to-end sorting: filter, threshold, segment, sort each segment, stitch.

use std::ops::Range;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use crate::config::Config;
use crate::detection::{mad_threshold, PeakTrain, Threshold};
use crate::dog_filter::{apply_dog, design_kernel, DogKernelSpec, FilteredRecording};
use crate::error::{Error, Result};
use crate::probe_io::{ProbeGeometry, Recording, SortResult};
use crate::segmentation::{plan_segments, segments_from_boundaries, SegmentationPlan};
use crate::sifter::{sort_segment, SegmentResult, SiftParams};
use crate::stitcher::{stitch, SegmentUnits};

/// Filtered traces plus the whole-recording quantities every segment shares.
pub struct Prepared {
    pub filtered: FilteredRecording,
    pub kernel: DogKernelSpec,
    pub thresholds: Vec<Threshold>,
    /// Samples unaffected by the filter's zero padding.
    pub reliable: Range<usize>,
}

pub fn prepare(rec: &Recording, config: &Config) -> Result<Prepared> {
    config.validate()?;
    let kernel = design_kernel(config.band_low_hz, config.band_high_hz, rec.sample_rate())?;
    let clock = Instant::now();
    let filtered = apply_dog(rec, &kernel, config.invert_polarity);
    info!("filter: {:.3} s", clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let thresholds = (0..filtered.n_channels())
        .into_par_iter()
        .map(|c| mad_threshold(filtered.channel(c), config.kappa))
        .collect::<Result<Vec<_>>>()?;
    info!("thresholds: {:.3} s", clock.elapsed().as_secs_f64());

    let n = rec.n_samples();
    let edge = kernel.unreliable_edge().min(n / 2);
    Ok(Prepared {
        filtered,
        kernel,
        thresholds,
        reliable: edge..n - edge,
    })
}

/// Detects threshold peaks on the whole recording and places segment boundaries.
pub fn segment(prepared: &Prepared, config: &Config) -> SegmentationPlan {
    let clock = Instant::now();
    let f = &prepared.filtered;
    let traces: Vec<&[f32]> = (0..f.n_channels()).map(|c| f.channel(c)).collect();
    let window = SiftParams::new(f.sample_rate(), config.lambda, config.n_min).refractory;
    let peaks = PeakTrain::detect(&traces, &prepared.thresholds, window, prepared.reliable.clone());
    info!("detect: {:.3} s", clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let plan = plan_segments(&peaks, f.n_samples(), f.sample_rate(), config.l_min_seconds);
    info!(
        "segment: {:.3} s, {} boundaries",
        clock.elapsed().as_secs_f64(),
        plan.boundaries.len()
    );
    plan
}

/// Sorts one absolute sample range of a prepared recording.
pub fn sort_range(
    prepared: &Prepared,
    range: Range<usize>,
    geometry: &ProbeGeometry,
    config: &Config,
) -> SegmentResult {
    let f = &prepared.filtered;
    let traces = f.slice(range.start, range.end);
    let lo = prepared.reliable.start.max(range.start) - range.start;
    let hi = prepared.reliable.end.min(range.end).max(range.start) - range.start;
    let params = config.sift_params(f.sample_rate());
    sort_segment(traces, range.start, lo..hi.max(lo), &prepared.thresholds, geometry, &params)
}

fn to_units(segments: &[SegmentResult], width: usize) -> Vec<SegmentUnits> {
    segments.iter().map(|s| SegmentUnits::from_segment(s, width)).collect()
}

pub struct SortOutput {
    pub result: SortResult,
    pub plan: SegmentationPlan,
}

/// Full pipeline. Segments are sorted on the current rayon pool.
pub fn sort(rec: &Recording, config: &Config) -> Result<SortOutput> {
    let prepared = prepare(rec, config)?;
    let plan = segment(&prepared, config);
    let ranges = segments_from_boundaries(&plan.boundaries, rec.n_samples());

    let clock = Instant::now();
    let segments: Vec<SegmentResult> = ranges
        .par_iter()
        .map(|r| sort_range(&prepared, r.clone(), rec.geometry(), config))
        .collect();
    info!(
        "sort: {:.3} s, {} local units over {} segments",
        clock.elapsed().as_secs_f64(),
        segments.iter().map(|s| s.units.len()).sum::<usize>(),
        segments.len()
    );

    let clock = Instant::now();
    let width = config.sift_params(rec.sample_rate()).width();
    let result = stitch(
        &to_units(&segments, width),
        rec.geometry(),
        &config.stitch_params(),
        rec.n_samples(),
        rec.sample_rate(),
    );
    info!(
        "stitch: {:.3} s, {} global units",
        clock.elapsed().as_secs_f64(),
        result.units.len()
    );
    Ok(SortOutput { result, plan })
}

/// Sorts a single slice of the recording. Filtering and thresholds still use the whole
/// recording, so the slice's units equal those of the same segment in a full run.
pub fn sort_slice(rec: &Recording, range: Range<usize>, config: &Config) -> Result<SortResult> {
    if range.start >= range.end || range.end > rec.n_samples() {
        return Err(Error::InvalidParameter(format!(
            "slice {}..{} outside recording of {} samples",
            range.start,
            range.end,
            rec.n_samples()
        )));
    }
    let prepared = prepare(rec, config)?;
    let clock = Instant::now();
    let segment = sort_range(&prepared, range, rec.geometry(), config);
    info!("sort: {:.3} s, {} units", clock.elapsed().as_secs_f64(), segment.units.len());
    let width = config.sift_params(rec.sample_rate()).width();
    Ok(stitch(
        &to_units(std::slice::from_ref(&segment), width),
        rec.geometry(),
        &config.stitch_params(),
        rec.n_samples(),
        rec.sample_rate(),
    ))
}

/// Re-stitches slice results (in any order) into one result.
pub fn merge(parts: &[SortResult], geometry: &ProbeGeometry, config: &Config) -> Result<SortResult> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidParameter("nothing to merge".into()))?;
    let mut segments: Vec<SegmentUnits> = Vec::new();
    for p in parts {
        if p.sample_rate != first.sample_rate || p.n_samples != first.n_samples || p.n_channels != geometry.len() {
            return Err(Error::MalformedResults(
                "results disagree on sample rate, length or channel count".into(),
            ));
        }
        segments.extend(crate::stitcher::segments_from_result(p));
    }
    segments.sort_by_key(|s| s.range.start);
    if segments.windows(2).any(|w| w[0].range.end > w[1].range.start) {
        return Err(Error::MalformedResults("merged segments overlap".into()));
    }
    let result = stitch(&segments, geometry, &config.stitch_params(), first.n_samples, first.sample_rate);
    result.validate()?;
    Ok(result)
}
