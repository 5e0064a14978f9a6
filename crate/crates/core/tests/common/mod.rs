#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use peelsort::synthgen::{amplitude_for_mad_multiple, generate, Drift, GroundTruth, SynthSpec};
use peelsort::Recording;

pub const BASELINE_SEED: u64 = 0;

/// Ten neurons, 60 s, 16 channels, troughs of 8 to 15 raw-noise MADs.
pub fn baseline_spec(duration_s: f64, drift: Drift) -> SynthSpec {
    let mut spec = SynthSpec::new(10, duration_s, BASELINE_SEED);
    let sigma = spec.noise_sigma;
    spec.amplitude_range = (
        amplitude_for_mad_multiple(8.0, sigma),
        amplitude_for_mad_multiple(15.0, sigma),
    );
    spec.drift = drift;
    spec
}

pub fn baseline(duration_s: f64, drift: Drift) -> (Recording, GroundTruth) {
    generate(&baseline_spec(duration_s, drift)).expect("baseline generates")
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_peelsort"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "peelsort {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Files in `dir` and its subdirectories, relative and sorted.
pub fn list_files(dir: &Path) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                found.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    found.sort();
    found
}

/// Renders hand-placed neurons (no drift) onto `geometry`, with rounded Gaussian noise.
pub fn render(
    neurons: &[peelsort::synthgen::Neuron],
    geometry: &peelsort::ProbeGeometry,
    n_samples: usize,
    sigma: f64,
    seed: u64,
) -> Recording {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    let fs = 20_000.0;
    let w = peelsort::synthgen::Waveform::biphasic(fs);
    let mut channels = vec![vec![0.0f64; n_samples]; geometry.len()];
    for n in neurons {
        let amps = n.channel_amplitudes(geometry, 0.0);
        for &t in &n.spike_times {
            for (ch, a) in channels.iter_mut().zip(&amps) {
                for (k, v) in w.samples.iter().enumerate() {
                    ch[t - w.pre + k] += a * v;
                }
            }
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
    let channels = channels
        .into_iter()
        .map(|ch| {
            ch.into_iter()
                .map(|v| {
                    let v = if sigma > 0.0 { v + noise.sample(&mut rng) } else { v };
                    v.round() as i16
                })
                .collect()
        })
        .collect();
    Recording::from_channels(channels, fs, geometry.clone()).unwrap()
}

/// Regular-ish train: one spike every `period` samples with a deterministic jitter.
pub fn train(first: usize, period: usize, count: usize, seed: u64) -> Vec<usize> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| first + i * period + rng.random_range(0..period / 4))
        .collect()
}

pub fn neuron(id: usize, x: f64, y: f64, peak: f64, spike_times: Vec<usize>) -> peelsort::synthgen::Neuron {
    peelsort::synthgen::Neuron {
        id,
        x,
        y,
        z: 0.0,
        peak_amplitude: peak,
        rate_hz: 0.0,
        spike_times,
    }
}
