//! Difference-of-Gaussians bandpass built from two four-stage box-filter cascades.
//!
//! Each Gaussian is approximated by four passes of a centred moving average of odd width `w`,
//! whose impulse response has variance `4(w^2-1)/12`. The bandpass is the narrow cascade minus
//! the wide one, so DC cancels exactly and the response is symmetric (zero phase).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::probe_io::Recording;

/// Number of box passes per Gaussian approximation.
pub const CASCADE_DEPTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DogKernelSpec {
    /// Box width of the narrow (high-cut) cascade.
    pub w_high_cut: usize,
    /// Box width of the wide (low-cut) cascade.
    pub w_low_cut: usize,
    pub sample_rate: f64,
}

impl DogKernelSpec {
    /// Samples at each end of a filtered trace that see the zero padding.
    pub fn unreliable_edge(&self) -> usize {
        2 * self.w_low_cut
    }

    /// Full impulse response, centred on index `len / 2`.
    pub fn impulse_response(&self) -> Vec<f64> {
        let half = CASCADE_DEPTH * (self.w_low_cut / 2);
        let mut impulse = vec![0.0; 2 * half + 1];
        impulse[half] = 1.0;
        dog_series(&impulse, self)
    }
}

/// Gaussian width whose -3 dB point sits at `f_c`.
pub fn sigma_for_cutoff(f_c: f64, f_s: f64) -> f64 {
    f_s * std::f64::consts::LN_2.sqrt() / (2.0 * std::f64::consts::PI * f_c)
}

/// Odd box width (at least 3) whose four-fold cascade best matches `sigma`.
pub fn width_for_sigma(sigma: f64) -> usize {
    let exact = (3.0 * sigma * sigma + 1.0).sqrt();
    let odd = 2.0 * ((exact - 1.0) / 2.0).round() + 1.0;
    (odd as usize).max(3)
}

pub fn design_kernel(f_low: f64, f_high: f64, f_s: f64) -> Result<DogKernelSpec> {
    if !(f_s > 0.0 && f_low > 0.0 && f_low < f_high && f_high < f_s / 2.0) {
        return Err(Error::InvalidBand(format!(
            "need 0 < low < high < fs/2, got low={f_low} high={f_high} fs={f_s}"
        )));
    }
    let w_high_cut = width_for_sigma(sigma_for_cutoff(f_high, f_s));
    let w_low_cut = width_for_sigma(sigma_for_cutoff(f_low, f_s));
    if w_low_cut <= w_high_cut {
        return Err(Error::InvalidBand(format!(
            "band {f_low}-{f_high} Hz collapses to equal box widths at fs={f_s}"
        )));
    }
    Ok(DogKernelSpec {
        w_high_cut,
        w_low_cut,
        sample_rate: f_s,
    })
}

/// Centred moving average of odd width `w`, zero-padded, length preserving.
pub fn box_pass(signal: &[f64], w: usize) -> Vec<f64> {
    let mut out = vec![0.0; signal.len()];
    box_pass_into(signal, &mut out, w);
    out
}

fn box_pass_into(src: &[f64], dst: &mut [f64], w: usize) {
    assert!(w % 2 == 1, "box width must be odd, got {w}");
    let n = src.len();
    let half = w / 2;
    let scale = 1.0 / w as f64;
    let mut acc: f64 = src[..half.min(n)].iter().sum();
    for i in 0..n {
        if i + half < n {
            acc += src[i + half];
        }
        dst[i] = acc * scale;
        if i >= half {
            acc -= src[i - half];
        }
    }
}

fn cascade(buf: &mut Vec<f64>, scratch: &mut Vec<f64>, w: usize) {
    for _ in 0..CASCADE_DEPTH {
        box_pass_into(buf, scratch, w);
        std::mem::swap(buf, scratch);
    }
}

/// DoG of a single series in double precision.
pub fn dog_series(signal: &[f64], spec: &DogKernelSpec) -> Vec<f64> {
    let mut narrow = signal.to_vec();
    let mut wide = signal.to_vec();
    let mut scratch = vec![0.0; signal.len()];
    cascade(&mut narrow, &mut scratch, spec.w_high_cut);
    cascade(&mut wide, &mut scratch, spec.w_low_cut);
    for (n, w) in narrow.iter_mut().zip(&wide) {
        *n -= w;
    }
    narrow
}

/// Band-passed traces in floating voltage, channel-major like [`Recording`].
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredRecording {
    data: Vec<f32>,
    n_channels: usize,
    n_samples: usize,
    sample_rate: f64,
}

impl FilteredRecording {
    pub fn from_channels(channels: Vec<Vec<f32>>, sample_rate: f64) -> Self {
        let n_channels = channels.len();
        let n_samples = channels.first().map_or(0, Vec::len);
        assert!(channels.iter().all(|c| c.len() == n_samples), "ragged channels");
        Self {
            data: channels.concat(),
            n_channels,
            n_samples,
            sample_rate,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    /// Copies `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Vec<Vec<f32>> {
        (0..self.n_channels)
            .map(|c| self.channel(c)[start..end].to_vec())
            .collect()
    }
}

/// Filters every channel; channels are processed in parallel on the current rayon pool.
pub fn apply_dog(rec: &Recording, spec: &DogKernelSpec, invert_polarity: bool) -> FilteredRecording {
    let n = rec.n_samples();
    let mut data = vec![0f32; rec.n_channels() * n];
    data.par_chunks_mut(n).enumerate().for_each(|(c, out)| {
        let input: Vec<f64> = rec.channel(c).iter().map(|&v| f64::from(v)).collect();
        let filtered = dog_series(&input, spec);
        let sign = if invert_polarity { -1.0 } else { 1.0 };
        for (o, v) in out.iter_mut().zip(filtered) {
            *o = (sign * v) as f32;
        }
    });
    FilteredRecording {
        data,
        n_channels: rec.n_channels(),
        n_samples: n,
        sample_rate: rec.sample_rate(),
    }
}
