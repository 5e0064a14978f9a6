mod common;

use peelsort::synthgen::{generate, Drift, SynthSpec, Waveform};

#[test]
fn fixed_seed_is_byte_identical() {
    let spec = common::baseline_spec(5.0, Drift::Gp { peak_to_peak_um: 30.0 });
    let (a, ta) = generate(&spec).unwrap();
    let (b, tb) = generate(&spec).unwrap();
    assert_eq!(a.samples(), b.samples());
    assert_eq!(ta, tb);
    let (c, _) = generate(&SynthSpec { seed: 99, ..spec }).unwrap();
    assert_ne!(a.samples(), c.samples());
}

#[test]
fn noiseless_recording_is_sum_of_templates() {
    let mut spec = SynthSpec::new(1, 3.0, 11);
    spec.noise_sigma = 0.0;
    let (rec, truth) = generate(&spec).unwrap();
    let w = Waveform::biphasic(rec.sample_rate());
    let n = &truth.neurons[0];
    let amps = n.channel_amplitudes(rec.geometry(), 0.0);
    for (c, a) in amps.iter().enumerate() {
        let mut expect = vec![0.0f64; rec.n_samples()];
        for &t in &n.spike_times {
            for (k, v) in w.samples.iter().enumerate() {
                expect[t - w.pre + k] += a * v;
            }
        }
        let expect: Vec<i16> = expect.iter().map(|v| v.round() as i16).collect();
        assert_eq!(rec.channel(c), expect.as_slice(), "channel {c}");
    }
}

/// Lower and upper 0.5% quantiles of Poisson(`mean`).
fn poisson_99(mean: f64) -> (usize, usize) {
    let mut cdf = 0.0;
    let mut log_p = -mean;
    let (mut lo, mut k) = (None, 0usize);
    loop {
        cdf += log_p.exp();
        if lo.is_none() && cdf >= 0.005 {
            lo = Some(k);
        }
        if cdf >= 0.995 {
            return (lo.unwrap(), k);
        }
        k += 1;
        log_p += mean.ln() - (k as f64).ln();
    }
}

#[test]
fn ten_hz_count_in_poisson_interval() {
    let (lo, hi) = poisson_99(600.0);
    assert!((535..=545).contains(&lo) && (655..=665).contains(&hi), "{lo}..{hi}");
    for seed in 0..5 {
        let mut spec = SynthSpec::new(1, 60.0, seed);
        spec.rate_range_hz = (10.0, 10.0);
        let (_, truth) = generate(&spec).unwrap();
        let count = truth.neurons[0].spike_times.len();
        assert!((lo..=hi).contains(&count), "seed {seed}: {count} outside {lo}..{hi}");
    }
}

#[test]
fn refractory_and_separation_hold() {
    let (_, truth) = generate(&common::baseline_spec(20.0, Drift::None)).unwrap();
    for n in &truth.neurons {
        assert!(n.spike_times.windows(2).all(|w| w[1] - w[0] >= 40));
    }
    for (i, a) in truth.neurons.iter().enumerate() {
        for b in &truth.neurons[i + 1..] {
            let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
            assert!(d >= 15.0);
        }
    }
}

#[test]
fn jump_changes_amplitudes_only_at_the_jump() {
    let (_, truth) = generate(&common::baseline_spec(10.0, Drift::Jump { um: 20.0, at_s: 4.0 })).unwrap();
    let tr = &truth.trajectory;
    assert_eq!(tr.offset(0.0), 0.0);
    assert_eq!(tr.offset(3.9999), 0.0);
    assert_eq!(tr.offset(4.0), 20.0);
    assert_eq!(tr.offset(9.0), 20.0);
}

#[test]
fn truth_round_trips_through_json() {
    let (_, truth) = generate(&common::baseline_spec(2.0, Drift::Gp { peak_to_peak_um: 40.0 })).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("truth.json");
    truth.save(&p).unwrap();
    assert_eq!(peelsort::synthgen::GroundTruth::load(&p).unwrap(), truth);
}
