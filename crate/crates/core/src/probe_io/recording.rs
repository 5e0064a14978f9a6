use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{io_err, Error, Result};
use crate::probe_io::ProbeGeometry;

/// Raw multichannel recording in ADC units, stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    samples: Vec<i16>,
    n_samples: usize,
    sample_rate: f64,
    geometry: ProbeGeometry,
}

impl Recording {
    /// `samples` is channel-major: channel `c` occupies `c*T..(c+1)*T`.
    pub fn new(
        samples: Vec<i16>,
        n_samples: usize,
        sample_rate: f64,
        geometry: ProbeGeometry,
    ) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if n_samples == 0 {
            return Err(Error::InvalidParameter("recording has no samples".into()));
        }
        let c = geometry.len();
        if samples.len() != c * n_samples {
            return Err(Error::ChannelMismatch {
                expected: c * n_samples,
                actual: samples.len(),
            });
        }
        Ok(Self {
            samples,
            n_samples,
            sample_rate,
            geometry,
        })
    }

    pub fn from_channels(
        channels: Vec<Vec<i16>>,
        sample_rate: f64,
        geometry: ProbeGeometry,
    ) -> Result<Self> {
        if channels.len() != geometry.len() {
            return Err(Error::ChannelMismatch {
                expected: geometry.len(),
                actual: channels.len(),
            });
        }
        let n_samples = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|ch| ch.len() != n_samples) {
            return Err(Error::InvalidParameter("ragged channel lengths".into()));
        }
        Self::new(channels.concat(), n_samples, sample_rate, geometry)
    }

    /// Reads a little-endian, frame-interleaved int16 file.
    pub fn load(
        path_signal: impl AsRef<Path>,
        path_probe: impl AsRef<Path>,
        sample_rate: f64,
    ) -> Result<Self> {
        let geometry = ProbeGeometry::load(path_probe)?;
        Self::load_with_geometry(path_signal, geometry, sample_rate)
    }

    pub fn load_with_geometry(
        path_signal: impl AsRef<Path>,
        geometry: ProbeGeometry,
        sample_rate: f64,
    ) -> Result<Self> {
        let path = path_signal.as_ref();
        let file = File::open(path).map_err(io_err(path))?;
        let len = file.metadata().map_err(io_err(path))?.len();
        let c = geometry.len();
        let frame = 2 * c as u64;
        if len % frame != 0 {
            return Err(Error::TruncatedFrame {
                len,
                frame,
                channels: c,
            });
        }
        let n_samples = (len / frame) as usize;
        let mut samples = vec![0i16; c * n_samples];

        // Deinterleave in bounded chunks so the file is never held twice in memory.
        let frames_per_chunk = (1 << 20) / frame as usize + 1;
        let mut buf = vec![0u8; frames_per_chunk * frame as usize];
        let mut reader = file;
        let mut t0 = 0usize;
        while t0 < n_samples {
            let frames = frames_per_chunk.min(n_samples - t0);
            let bytes = &mut buf[..frames * frame as usize];
            reader.read_exact(bytes).map_err(io_err(path))?;
            for (dt, chunk) in bytes.chunks_exact(frame as usize).enumerate() {
                for (ch, pair) in chunk.chunks_exact(2).enumerate() {
                    samples[ch * n_samples + t0 + dt] = i16::from_le_bytes([pair[0], pair[1]]);
                }
            }
            t0 += frames;
        }
        Self::new(samples, n_samples, sample_rate, geometry)
    }

    pub fn write_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        let c = self.n_channels();
        let mut frame = vec![0u8; 2 * c];
        for t in 0..self.n_samples {
            for ch in 0..c {
                let v = self.samples[ch * self.n_samples + t].to_le_bytes();
                frame[2 * ch] = v[0];
                frame[2 * ch + 1] = v[1];
            }
            w.write_all(&frame).map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }

    pub fn n_channels(&self) -> usize {
        self.geometry.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate
    }

    pub fn geometry(&self) -> &ProbeGeometry {
        &self.geometry
    }

    pub fn channel(&self, c: usize) -> &[i16] {
        &self.samples[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }
}
