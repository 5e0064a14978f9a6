//! Synthetic recordings with exact ground truth.
//!
//! Neurons are point sources below the probe plane. Each emits a fixed biphasic waveform whose
//! amplitude on a channel falls off as `peak / (1 + d / 25 um)^2`, fires as a Poisson process
//! with a 2 ms dead time, and moves along `y` with the drift trajectory. White Gaussian noise
//! is added before quantising to int16.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::dog_filter::{dog_series, DogKernelSpec};
use crate::error::{Error, Result};
use crate::probe_io::{ProbeGeometry, Recording};

/// Distance scale of the amplitude decay law.
pub const DECAY_UM: f64 = 25.0;
pub const REFRACTORY_S: f64 = 2e-3;
/// Waveform support around the trough.
pub const PRE_MS: f64 = 1.0;
pub const POST_MS: f64 = 2.0;

const TROUGH_WIDTH_MS: f64 = 0.15;
const REBOUND_WIDTH_MS: f64 = 0.25;
const REBOUND_DELAY_MS: f64 = 0.4;
const REBOUND_HEIGHT: f64 = 0.35;
/// MAD of a unit normal.
const NORMAL_MAD: f64 = 0.674_489_750_196_081_7;

/// Unit-trough waveform sampled at `sample_rate`; index `pre` is the trough.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub pre: usize,
}

impl Waveform {
    pub fn biphasic(sample_rate: f64) -> Self {
        let pre = (PRE_MS * 1e-3 * sample_rate).round() as usize;
        let post = (POST_MS * 1e-3 * sample_rate).round() as usize;
        let gauss = |u: f64, mu: f64, s: f64| (-(u - mu).powi(2) / (2.0 * s * s)).exp();
        let mut samples: Vec<f64> = (0..=pre + post)
            .map(|i| {
                let u = (i as f64 - pre as f64) / sample_rate * 1e3;
                -gauss(u, 0.0, TROUGH_WIDTH_MS)
                    + REBOUND_HEIGHT * gauss(u, REBOUND_DELAY_MS, REBOUND_WIDTH_MS)
            })
            .collect();
        let trough = samples.iter().copied().fold(f64::INFINITY, f64::min);
        samples.iter_mut().for_each(|v| *v /= -trough);
        Self { samples, pre }
    }

    pub fn post(&self) -> usize {
        self.samples.len() - 1 - self.pre
    }
}

/// Axial displacement regime.
#[derive(Clone, Debug, PartialEq)]
pub enum Drift {
    None,
    Linear { um_per_min: f64 },
    Jump { um: f64, at_s: f64 },
    /// Smooth random trajectory with the given peak-to-peak excursion.
    Gp { peak_to_peak_um: f64 },
}

pub const DEFAULT_GP_PEAK_TO_PEAK_UM: f64 = 50.0;

impl FromStr for Drift {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognised drift regime '{s}'"));
        let num = |v: &str| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
        match s.split_once(':') {
            None if s == "none" => Ok(Drift::None),
            None if s == "gp" => Ok(Drift::Gp {
                peak_to_peak_um: DEFAULT_GP_PEAK_TO_PEAK_UM,
            }),
            Some(("linear", v)) => Ok(Drift::Linear { um_per_min: num(v)? }),
            Some(("gp", v)) => Ok(Drift::Gp {
                peak_to_peak_um: num(v)?,
            }),
            Some(("jump", v)) => {
                let (um, at) = v.split_once('@').ok_or_else(bad)?;
                Ok(Drift::Jump {
                    um: num(um)?,
                    at_s: num(at)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::None => write!(f, "none"),
            Drift::Linear { um_per_min } => write!(f, "linear:{um_per_min}"),
            Drift::Jump { um, at_s } => write!(f, "jump:{um}@{at_s}"),
            Drift::Gp { peak_to_peak_um } => write!(f, "gp:{peak_to_peak_um}"),
        }
    }
}

impl Serialize for Drift {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Drift {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One cosine term of a random-feature trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

/// Realised displacement `y_offset(t)`, zero at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub regime: Drift,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub harmonics: Vec<Harmonic>,
}

const GP_FEATURES: usize = 32;
const GP_LENGTH_SCALE_S: f64 = 20.0;

impl Trajectory {
    fn realise<R: Rng>(regime: &Drift, duration_s: f64, rng: &mut R) -> Self {
        let Drift::Gp { peak_to_peak_um } = *regime else {
            return Self {
                regime: regime.clone(),
                harmonics: Vec::new(),
            };
        };
        let freq = Normal::new(0.0, 1.0 / GP_LENGTH_SCALE_S).expect("finite scale");
        let mut harmonics: Vec<Harmonic> = (0..GP_FEATURES)
            .map(|_| Harmonic {
                amplitude: 1.0,
                omega: freq.sample(rng),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        let mut traj = Self {
            regime: regime.clone(),
            harmonics: harmonics.clone(),
        };
        let grid: Vec<f64> = (0..=1000).map(|k| traj.offset(duration_s * k as f64 / 1000.0)).collect();
        let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = if hi > lo { peak_to_peak_um / (hi - lo) } else { 0.0 };
        harmonics.iter_mut().for_each(|h| h.amplitude = scale);
        traj.harmonics = harmonics;
        traj
    }

    pub fn offset(&self, t_s: f64) -> f64 {
        match self.regime {
            Drift::None => 0.0,
            Drift::Linear { um_per_min } => um_per_min * t_s / 60.0,
            Drift::Jump { um, at_s } => {
                if t_s >= at_s {
                    um
                } else {
                    0.0
                }
            }
            Drift::Gp { .. } => {
                let at = |t: f64| {
                    self.harmonics
                        .iter()
                        .map(|h| h.amplitude * (h.omega * t + h.phase).cos())
                        .sum::<f64>()
                };
                at(t_s) - at(0.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_neurons: usize,
    pub duration_s: f64,
    pub sample_rate: f64,
    pub geometry: ProbeGeometry,
    /// Noise standard deviation in ADC units.
    pub noise_sigma: f64,
    /// Range of each neuron's largest single-channel trough at `t = 0`, in ADC units.
    pub amplitude_range: (f64, f64),
    pub rate_range_hz: (f64, f64),
    pub min_separation_um: f64,
    /// Depth range of the sources below the probe plane.
    pub depth_range_um: (f64, f64),
    /// How far beyond the outermost columns sources may sit.
    pub lateral_margin_um: f64,
    pub drift: Drift,
    pub seed: u64,
}

impl SynthSpec {
    /// Default 16-channel two-column probe at 20 kHz.
    pub fn new(n_neurons: usize, duration_s: f64, seed: u64) -> Self {
        Self {
            n_neurons,
            duration_s,
            sample_rate: 20_000.0,
            geometry: ProbeGeometry::two_column(16, 15.0, 32.0),
            noise_sigma: 10.0,
            amplitude_range: (100.0, 200.0),
            rate_range_hz: (1.0, 50.0),
            min_separation_um: 15.0,
            depth_range_um: (0.0, 0.0),
            lateral_margin_um: 8.0,
            drift: Drift::None,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.duration_s > 0.0 && self.sample_rate > 0.0) {
            return bad("duration and sample rate must be positive");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise sigma must be non-negative");
        }
        let (a0, a1) = self.amplitude_range;
        if !(a0 > 0.0 && a0 <= a1) {
            return bad("amplitude range must be positive and ordered");
        }
        let (r0, r1) = self.rate_range_hz;
        if !(r0 > 0.0 && r0 <= r1 && r1 * REFRACTORY_S < 1.0) {
            return bad("firing rates must be positive, ordered and below the refractory limit");
        }
        let (d0, d1) = self.depth_range_um;
        if !(d0 >= 0.0 && d0 <= d1) {
            return bad("depth range must be non-negative and ordered");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub id: usize,
    pub x: f64,
    /// Axial position at `t = 0`.
    pub y: f64,
    pub z: f64,
    /// Trough amplitude at zero distance.
    pub peak_amplitude: f64,
    pub rate_hz: f64,
    pub spike_times: Vec<usize>,
}

impl Neuron {
    /// Trough amplitude on every channel with the source displaced by `y_offset`.
    pub fn channel_amplitudes(&self, geometry: &ProbeGeometry, y_offset: f64) -> Vec<f64> {
        geometry
            .channels()
            .iter()
            .map(|ch| {
                let d = ((ch.x - self.x).powi(2) + (ch.y - self.y - y_offset).powi(2) + self.z.powi(2)).sqrt();
                self.peak_amplitude / (1.0 + d / DECAY_UM).powi(2)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sample_rate: f64,
    pub n_samples: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub trajectory: Trajectory,
    pub neurons: Vec<Neuron>,
}

impl GroundTruth {
    pub fn spike_trains(&self) -> Vec<Vec<usize>> {
        self.neurons.iter().map(|n| n.spike_times.clone()).collect()
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(crate::error::io_err(path))?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedResults(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("ground truth serialises");
        std::fs::write(path, text + "\n").map_err(crate::error::io_err(path))
    }
}

fn place_neurons<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Result<Vec<(f64, f64, f64)>> {
    let chans = spec.geometry.channels();
    let fold = |f: fn(f64, f64) -> f64, init: f64, key: fn(&crate::probe_io::Channel) -> f64| {
        chans.iter().map(key).fold(init, f)
    };
    let x0 = fold(f64::min, f64::INFINITY, |c| c.x) - spec.lateral_margin_um;
    let x1 = fold(f64::max, f64::NEG_INFINITY, |c| c.x) + spec.lateral_margin_um;
    let y0 = fold(f64::min, f64::INFINITY, |c| c.y);
    let y1 = fold(f64::max, f64::NEG_INFINITY, |c| c.y);
    let (z0, z1) = spec.depth_range_um;

    let max_attempts = 10_000 * spec.n_neurons.max(1);
    let mut placed: Vec<(f64, f64, f64)> = Vec::with_capacity(spec.n_neurons);
    let mut attempts = 0;
    while placed.len() < spec.n_neurons {
        if attempts == max_attempts {
            return Err(Error::InfeasiblePlacement {
                requested: spec.n_neurons,
                min_sep_um: spec.min_separation_um,
            });
        }
        attempts += 1;
        let p = (
            rng.random_range(x0..=x1),
            rng.random_range(y0..=y1),
            rng.random_range(z0..=z1),
        );
        let clear = placed.iter().all(|q| {
            ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2) + (p.2 - q.2).powi(2)).sqrt()
                >= spec.min_separation_um
        });
        if clear {
            placed.push(p);
        }
    }
    Ok(placed)
}

/// Poisson spike train with dead time; the exponential part is shortened so the mean rate
/// stays `rate_hz`. Only times whose full waveform fits in the recording are kept.
fn spike_train<R: Rng>(rate_hz: f64, n_samples: usize, sample_rate: f64, lo: usize, hi: usize, rng: &mut R) -> Vec<usize> {
    let exp = Exp::new(1.0 / (1.0 / rate_hz - REFRACTORY_S)).expect("rate below refractory limit");
    let duration = n_samples as f64 / sample_rate;
    let mut times = Vec::new();
    let mut t = exp.sample(rng);
    while t < duration {
        let s = (t * sample_rate).round() as usize;
        if s >= lo && s < hi {
            times.push(s);
        }
        t += REFRACTORY_S + exp.sample(rng);
    }
    times
}

/// Deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<(Recording, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fs = spec.sample_rate;
    let n_samples = (spec.duration_s * fs).round() as usize;
    let waveform = Waveform::biphasic(fs);
    let (pre, post) = (waveform.pre, waveform.post());
    if n_samples <= pre + post {
        return Err(Error::InvalidParameter("recording shorter than one waveform".into()));
    }

    let positions = place_neurons(spec, &mut rng)?;
    let mut neurons = Vec::with_capacity(spec.n_neurons);
    for (id, &(x, y, z)) in positions.iter().enumerate() {
        let target = rng.random_range(spec.amplitude_range.0..=spec.amplitude_range.1);
        let rate_hz = rng.random_range(spec.rate_range_hz.0..=spec.rate_range_hz.1);
        let mut n = Neuron {
            id,
            x,
            y,
            z,
            peak_amplitude: 1.0,
            rate_hz,
            spike_times: Vec::new(),
        };
        let unit_max = n
            .channel_amplitudes(&spec.geometry, 0.0)
            .into_iter()
            .fold(0.0, f64::max);
        n.peak_amplitude = target / unit_max;
        n.spike_times = spike_train(rate_hz, n_samples, fs, pre, n_samples - post, &mut rng);
        neurons.push(n);
    }
    let trajectory = Trajectory::realise(&spec.drift, spec.duration_s, &mut rng);

    let n_channels = spec.geometry.len();
    let mut signal = vec![0.0f64; n_channels * n_samples];
    for n in &neurons {
        for &t in &n.spike_times {
            let amps = n.channel_amplitudes(&spec.geometry, trajectory.offset(t as f64 / fs));
            for (c, a) in amps.iter().enumerate() {
                let row = &mut signal[c * n_samples + t - pre..c * n_samples + t + post + 1];
                for (s, w) in row.iter_mut().zip(&waveform.samples) {
                    *s += a * w;
                }
            }
        }
    }
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).expect("finite sigma");
        for s in signal.iter_mut() {
            *s += noise.sample(&mut rng);
        }
    }
    let samples: Vec<i16> = signal
        .into_iter()
        .map(|v| v.round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16)
        .collect();

    let recording = Recording::new(samples, n_samples, fs, spec.geometry.clone())?;
    let truth = GroundTruth {
        sample_rate: fs,
        n_samples,
        noise_sigma: spec.noise_sigma,
        seed: spec.seed,
        trajectory,
        neurons,
    };
    Ok((recording, truth))
}

/// Magnitude of the filtered trough of a unit-amplitude waveform.
pub fn filtered_trough_gain(filter: &DogKernelSpec) -> f64 {
    let w = Waveform::biphasic(filter.sample_rate);
    let pad = filter.impulse_response().len();
    let mut x = vec![0.0; pad];
    x.extend(&w.samples);
    x.extend(vec![0.0; pad]);
    -dog_series(&x, filter).into_iter().fold(f64::INFINITY, f64::min)
}

/// Expected MAD of white noise of standard deviation `sigma` after filtering.
pub fn filtered_noise_mad(sigma: f64, filter: &DogKernelSpec) -> f64 {
    let energy: f64 = filter.impulse_response().iter().map(|h| h * h).sum();
    NORMAL_MAD * sigma * energy.sqrt()
}

/// MAD of the raw noise, `0.6745 sigma`.
pub fn noise_mad(sigma: f64) -> f64 {
    NORMAL_MAD * sigma
}

/// Raw trough amplitude of `multiple` raw-noise MADs.
pub fn amplitude_for_mad_multiple(multiple: f64, sigma: f64) -> f64 {
    multiple * noise_mad(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waveform_shape() {
        let w = Waveform::biphasic(20_000.0);
        assert_eq!(w.pre, 20);
        assert_eq!(w.post(), 40);
        assert_eq!(w.samples[w.pre], -1.0);
        let max = w.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(max > 0.1 && max < 0.5, "rebound {max}");
    }

    #[test]
    fn drift_parsing_round_trips() {
        for s in ["none", "linear:15", "jump:20@60", "gp:40"] {
            let d: Drift = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert_eq!(
            "gp".parse::<Drift>().unwrap(),
            Drift::Gp {
                peak_to_peak_um: DEFAULT_GP_PEAK_TO_PEAK_UM
            }
        );
        for bad in ["", "linear", "jump:20", "jump:x@3", "wobble:3", "linear:nan"] {
            assert!(bad.parse::<Drift>().is_err(), "{bad}");
        }
    }

    #[test]
    fn trajectories() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let jump = Trajectory::realise(&Drift::Jump { um: 20.0, at_s: 60.0 }, 120.0, &mut rng);
        assert_eq!(jump.offset(59.999), 0.0);
        assert_eq!(jump.offset(60.0), 20.0);
        let lin = Trajectory::realise(&Drift::Linear { um_per_min: 15.0 }, 60.0, &mut rng);
        assert!((lin.offset(30.0) - 7.5).abs() < 1e-12);
        let gp = Trajectory::realise(&Drift::Gp { peak_to_peak_um: 50.0 }, 100.0, &mut rng);
        assert_eq!(gp.offset(0.0), 0.0);
        let values: Vec<f64> = (0..=1000).map(|k| gp.offset(k as f64 * 0.1)).collect();
        let span = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((span - 50.0).abs() < 1e-9, "span {span}");
    }

    #[test]
    fn placement_respects_separation_and_fails_when_crowded() {
        let spec = SynthSpec::new(12, 1.0, 9);
        let (_, truth) = generate(&spec).unwrap();
        for a in &truth.neurons {
            for b in &truth.neurons[a.id + 1..] {
                let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
                assert!(d >= 15.0);
            }
        }
        let crowded = SynthSpec::new(500, 1.0, 9);
        assert!(matches!(generate(&crowded), Err(Error::InfeasiblePlacement { requested: 500, .. })));
    }

    #[test]
    fn amplitude_target_is_met_on_best_channel() {
        let mut spec = SynthSpec::new(3, 0.5, 4);
        spec.amplitude_range = (150.0, 150.0);
        let (_, truth) = generate(&spec).unwrap();
        for n in &truth.neurons {
            let best = n.channel_amplitudes(&spec.geometry, 0.0).into_iter().fold(0.0, f64::max);
            assert!((best - 150.0).abs() < 1e-9);
        }
    }

    #[test]
    fn spikes_respect_dead_time() {
        let mut spec = SynthSpec::new(4, 10.0, 2);
        spec.rate_range_hz = (40.0, 50.0);
        let (_, truth) = generate(&spec).unwrap();
        for n in &truth.neurons {
            assert!(n.spike_times.windows(2).all(|w| w[1] - w[0] >= 39));
        }
    }
}
