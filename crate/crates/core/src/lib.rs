//! Drift-aware spike sorting for dense multi-electrode probes.
//!
//! The recording is band-passed with a difference of Gaussians built from box-filter cascades,
//! thresholded per channel at a multiple of the MAD, and cut into segments wherever the
//! spatial distribution of spike amplitudes changes. Each segment is sorted by repeatedly
//! extracting one unit on the most active channel and subtracting its template; units are then
//! tracked across segments by shifting amplitude profiles along the probe axis and solving an
//! optimal assignment.
//!
//! [`synthgen`] and [`evaluator`] provide ground-truth recordings and scoring.

pub mod config;
pub mod detection;
pub mod dog_filter;
pub mod error;
pub mod evaluator;
pub mod pipeline;
pub mod probe_io;
pub mod segmentation;
pub mod sifter;
pub mod stitcher;
pub mod synthgen;

pub use config::Config;
pub use error::{Error, Result};
pub use probe_io::{ProbeGeometry, Recording, SortResult};
