//! Recording, probe geometry and sort-result files.
//!
//! Signals are little-endian int16, frame-interleaved (`<name>.raw`). Probes are text files
//! with one `channel <id> <x_um> <y_um>` line per site. Results are a `spikes.csv` spike table
//! plus a `units.json` document with templates, amplitude vectors and segment provenance.

mod geometry;
mod recording;
mod results;

pub use geometry::{Channel, ProbeGeometry};
pub use recording::Recording;
pub use results::{
    read_results, write_results, LocalUnitRecord, SegmentRecord, SortResult, UnitRecord,
    SPIKES_FILE, UNITS_FILE,
};

/// Convenience wrapper matching the free-function style of the rest of the pipeline.
pub fn nearest_channels(
    geometry: &ProbeGeometry,
    c: usize,
    k: usize,
) -> crate::Result<Vec<usize>> {
    geometry.nearest_channels(c, k)
}
