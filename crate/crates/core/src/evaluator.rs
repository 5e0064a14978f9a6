//! Scoring sorted units against ground-truth spike trains.
//!
//! A detected spike matches a true spike within `tol` samples, one-to-one. For a unit paired
//! with a neuron, `FP` is the unmatched fraction of the unit's spikes, `FN` the missed fraction
//! of the neuron's, and `score = 1 - FP - FN`. Units are paired with neurons greedily by
//! descending score.

use std::fmt;

use serde::Serialize;

use crate::probe_io::SortResult;
use crate::synthgen::GroundTruth;

pub const IDENTIFIED_ABOVE: f64 = 0.95;
pub const SPURIOUS_BELOW: f64 = 0.8;

/// Maximum one-to-one matching of two sorted trains under `|a - b| <= tol`.
pub fn match_spike_trains(detected: &[usize], truth: &[usize], tol: usize) -> usize {
    let (mut i, mut j, mut matched) = (0, 0, 0);
    while i < detected.len() && j < truth.len() {
        let (d, g) = (detected[i], truth[j]);
        if d.abs_diff(g) <= tol {
            matched += 1;
            i += 1;
            j += 1;
        } else if d < g {
            i += 1;
        } else {
            j += 1;
        }
    }
    matched
}

/// Tolerance in whole samples.
pub fn tolerance_samples(tol_ms: f64, sample_rate: f64) -> usize {
    (tol_ms * 1e-3 * sample_rate).round() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Identified,
    Unclassified,
    Spurious,
}

impl Classification {
    pub fn from_score(score: f64) -> Self {
        if score > IDENTIFIED_ABOVE {
            Classification::Identified
        } else if score < SPURIOUS_BELOW {
            Classification::Spurious
        } else {
            Classification::Unclassified
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Identified => "identified",
            Classification::Unclassified => "unclassified",
            Classification::Spurious => "spurious",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitScore {
    pub unit: usize,
    pub neuron: Option<usize>,
    pub n_detected: usize,
    pub n_truth: usize,
    pub matched: usize,
    pub fp: f64,
    pub fn_rate: f64,
    pub score: f64,
    pub classification: Classification,
}

fn pair_score(unit: usize, neuron: usize, detected: &[usize], truth: &[usize], tol: usize) -> UnitScore {
    let matched = match_spike_trains(detected, truth, tol);
    let frac = |missing: usize, total: usize| if total == 0 { 0.0 } else { missing as f64 / total as f64 };
    let fp = frac(detected.len() - matched, detected.len());
    let fn_rate = frac(truth.len() - matched, truth.len());
    let score = 1.0 - fp - fn_rate;
    UnitScore {
        unit,
        neuron: Some(neuron),
        n_detected: detected.len(),
        n_truth: truth.len(),
        matched,
        fp,
        fn_rate,
        score,
        classification: Classification::from_score(score),
    }
}

/// Scores every unit. `units` are `(id, sorted spike times)`. Units left without a neuron
/// score 0 (all spikes false positives) and are spurious.
pub fn score_units(units: &[(usize, &[usize])], truth: &[Vec<usize>], tol: usize) -> Vec<UnitScore> {
    let mut candidates: Vec<UnitScore> = Vec::with_capacity(units.len() * truth.len());
    for &(id, det) in units {
        for (n, tr) in truth.iter().enumerate() {
            candidates.push(pair_score(id, n, det, tr, tol));
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.unit.cmp(&b.unit))
            .then(a.neuron.cmp(&b.neuron))
    });
    let mut unit_done = std::collections::BTreeMap::new();
    let mut neuron_taken = vec![false; truth.len()];
    for c in candidates {
        let n = c.neuron.expect("candidates are paired");
        if neuron_taken[n] || unit_done.contains_key(&c.unit) {
            continue;
        }
        neuron_taken[n] = true;
        unit_done.insert(c.unit, c);
    }
    units
        .iter()
        .map(|&(id, det)| {
            unit_done.remove(&id).unwrap_or(UnitScore {
                unit: id,
                neuron: None,
                n_detected: det.len(),
                n_truth: 0,
                matched: 0,
                fp: 1.0,
                fn_rate: 0.0,
                score: 0.0,
                classification: Classification::Spurious,
            })
        })
        .collect()
}

pub fn score_result(result: &SortResult, truth: &GroundTruth, tol_ms: f64) -> Vec<UnitScore> {
    let units: Vec<(usize, &[usize])> = result
        .units
        .iter()
        .map(|u| (u.id, u.spike_times.as_slice()))
        .collect();
    score_units(&units, &truth.spike_trains(), tolerance_samples(tol_ms, result.sample_rate))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub identified: usize,
    pub unclassified: usize,
    pub spurious: usize,
}

impl Summary {
    pub fn of(scores: &[UnitScore]) -> Self {
        let mut s = Summary::default();
        for u in scores {
            match u.classification {
                Classification::Identified => s.identified += 1,
                Classification::Unclassified => s.unclassified += 1,
                Classification::Spurious => s.spurious += 1,
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_matches() {
        assert_eq!(match_spike_trains(&[10], &[10], 10), 1);
        assert_eq!(match_spike_trains(&[10], &[21], 10), 0);
        assert_eq!(match_spike_trains(&[10], &[20], 10), 1);
        assert_eq!(match_spike_trains(&[], &[1, 2], 10), 0);
        // Greedy must not pair 5 with 0 and lose 14.
        assert_eq!(match_spike_trains(&[5, 14], &[0, 10], 5), 2);
    }

    #[test]
    fn tolerance_conversion() {
        assert_eq!(tolerance_samples(0.5, 20_000.0), 10);
        assert_eq!(tolerance_samples(0.5, 30_000.0), 15);
    }

    #[test]
    fn ninety_of_hundred_plus_ten_extras() {
        let truth: Vec<usize> = (0..100).map(|k| 1000 + k * 100).collect();
        let mut det: Vec<usize> = truth[..90].to_vec();
        det.extend((0..10).map(|k| 50_000 + k * 100));
        let s = score_units(&[(0, &det)], &[truth], 10);
        assert!((s[0].fp - 0.1).abs() < 1e-12);
        assert!((s[0].fn_rate - 0.1).abs() < 1e-12);
        assert!((s[0].score - 0.8).abs() < 1e-12);
        assert_eq!(s[0].classification, Classification::Unclassified);
    }

    #[test]
    fn perfect_and_unmatched_units() {
        let a: Vec<usize> = (0..50).map(|k| k * 400).collect();
        let b: Vec<usize> = (0..50).map(|k| 200 + k * 400).collect();
        let s = score_units(&[(3, &a), (7, &a)], std::slice::from_ref(&a), 10);
        assert_eq!(s[0].score, 1.0);
        assert_eq!(s[0].classification, Classification::Identified);
        assert_eq!(s[1].neuron, None);
        assert_eq!(s[1].classification, Classification::Spurious);
        let s = score_units(&[(0, &b)], &[a], 10);
        assert_eq!(s[0].classification, Classification::Spurious);
        assert_eq!(Summary::of(&s).spurious, 1);
    }

    #[test]
    fn classification_thresholds_are_strict() {
        assert_eq!(Classification::from_score(0.95), Classification::Unclassified);
        assert_eq!(Classification::from_score(0.8), Classification::Unclassified);
        assert_eq!(Classification::from_score(0.7999), Classification::Spurious);
        assert_eq!(Classification::from_score(0.9501), Classification::Identified);
    }
}
