use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const SPIKES_FILE: &str = "spikes.csv";
pub const UNITS_FILE: &str = "units.json";
const SPIKES_HEADER: &str = "unit_id,sample_index";

/// A globally identified unit. Spike times live in `spikes.csv`, everything else in `units.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub id: usize,
    pub reference_channel: usize,
    /// Neighbourhood of the reference channel the template is defined on.
    pub channels: Vec<usize>,
    /// One row per neighbourhood channel.
    pub template: Vec<Vec<f32>>,
    /// Full-probe amplitude vector.
    pub amplitude: Vec<f32>,
    pub n_spikes: usize,
    #[serde(skip)]
    pub spike_times: Vec<usize>,
}

/// Provenance of one segment-local unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalUnitRecord {
    pub local_id: usize,
    pub global_id: usize,
    pub reference_channel: usize,
    pub channels: Vec<usize>,
    pub template: Vec<Vec<f32>>,
    pub amplitude: Vec<f32>,
    pub n_spikes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    /// Displacement (um) chosen when aligning this segment to the previous one; 0 for the first.
    pub shift_um: f64,
    pub units: Vec<LocalUnitRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SortResult {
    pub sample_rate: f64,
    pub n_samples: usize,
    pub n_channels: usize,
    /// Interior segment starts, ascending.
    pub segment_boundaries: Vec<usize>,
    pub units: Vec<UnitRecord>,
    pub segments: Vec<SegmentRecord>,
}

impl SortResult {
    pub fn validate(&self) -> Result<()> {
        for unit in &self.units {
            if unit.spike_times.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::MalformedResults(format!(
                    "unit {} spike times not strictly increasing",
                    unit.id
                )));
            }
            if unit.spike_times.last().is_some_and(|&t| t >= self.n_samples) {
                return Err(Error::MalformedResults(format!(
                    "unit {} has a spike past the end of the recording",
                    unit.id
                )));
            }
        }
        if self.segment_boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedResults("segment boundaries not ascending".into()));
        }
        Ok(())
    }

    /// All spikes as `(unit_id, sample_index)` sorted by sample index, then unit id.
    pub fn spike_table(&self) -> Vec<(usize, usize)> {
        let mut rows: Vec<(usize, usize)> = self
            .units
            .iter()
            .flat_map(|u| u.spike_times.iter().map(move |&t| (u.id, t)))
            .collect();
        rows.sort_by_key(|&(id, t)| (t, id));
        rows
    }

    pub fn unit(&self, id: usize) -> Option<&UnitRecord> {
        self.units.iter().find(|u| u.id == id)
    }
}

pub fn write_results(result: &SortResult, dir: impl AsRef<Path>) -> Result<()> {
    result.validate()?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut csv = String::from(SPIKES_HEADER);
    csv.push('\n');
    for (id, t) in result.spike_table() {
        let _ = writeln!(csv, "{id},{t}");
    }
    let spikes = dir.join(SPIKES_FILE);
    std::fs::write(&spikes, csv).map_err(io_err(&spikes))?;

    let units = dir.join(UNITS_FILE);
    let json = serde_json::to_string_pretty(result)
        .map_err(|e| Error::MalformedResults(e.to_string()))?;
    std::fs::write(&units, json + "\n").map_err(io_err(&units))
}

pub fn read_results(dir: impl AsRef<Path>) -> Result<SortResult> {
    let dir = dir.as_ref();
    let units_path = dir.join(UNITS_FILE);
    let json = std::fs::read_to_string(&units_path).map_err(io_err(&units_path))?;
    let mut result: SortResult =
        serde_json::from_str(&json).map_err(|e| Error::MalformedResults(e.to_string()))?;

    let spikes_path = dir.join(SPIKES_FILE);
    let csv = std::fs::read_to_string(&spikes_path).map_err(io_err(&spikes_path))?;
    let mut lines = csv.lines();
    if lines.next() != Some(SPIKES_HEADER) {
        return Err(Error::MalformedResults(format!(
            "{SPIKES_FILE} must start with `{SPIKES_HEADER}`"
        )));
    }
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = || Error::MalformedResults(format!("{SPIKES_FILE} row {}: `{line}`", n + 1));
        let (id, t) = line.split_once(',').ok_or_else(bad)?;
        let id: usize = id.trim().parse().map_err(|_| bad())?;
        let t: usize = t.trim().parse().map_err(|_| bad())?;
        let unit = result
            .units
            .iter_mut()
            .find(|u| u.id == id)
            .ok_or_else(bad)?;
        unit.spike_times.push(t);
    }
    for unit in &result.units {
        if unit.spike_times.len() != unit.n_spikes {
            return Err(Error::MalformedResults(format!(
                "unit {} lists {} spikes but {SPIKES_FILE} has {}",
                unit.id,
                unit.n_spikes,
                unit.spike_times.len()
            )));
        }
    }
    result.validate()?;
    Ok(result)
}
