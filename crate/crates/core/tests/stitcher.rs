mod common;

use proptest::prelude::*;

use peelsort::stitcher::assignment::{solve, total_cost};
use peelsort::stitcher::{stitch, LocalUnit, SegmentUnits, StitchParams};
use peelsort::synthgen::{generate, Drift};
use peelsort::ProbeGeometry;

use common::oracles;

fn matrix(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0.0f64..50.0, c), r))
}

proptest! {
    #[test]
    fn hungarian_matches_exhaustive(cost in matrix(6)) {
        let pairs = solve(&cost);
        prop_assert_eq!(pairs.len(), cost.len().min(cost[0].len()));
        let (best, _) = oracles::exhaustive_assignment(&cost);
        prop_assert!((total_cost(&cost, &pairs) - best).abs() <= 1e-9 * best.max(1.0));
    }

    #[test]
    fn integer_costs_exact(cost in (1..=5usize, 1..=5usize).prop_flat_map(|(r, c)|
        prop::collection::vec(prop::collection::vec((0u8..20).prop_map(f64::from), c), r))) {
        let (best, _) = oracles::exhaustive_assignment(&cost);
        prop_assert_eq!(total_cost(&cost, &solve(&cost)), best);
    }
}

/// Local units built straight from ground truth: amplitude vectors before and after a
/// 20 um jump.
#[test]
fn jump_keeps_identities() {
    let mut spec = common::baseline_spec(40.0, Drift::Jump { um: 20.0, at_s: 20.0 });
    spec.n_neurons = 8;
    let (rec, truth) = generate(&spec).unwrap();
    let geometry = rec.geometry();
    let half = rec.n_samples() / 2;
    let local = |offset: f64, range: std::ops::Range<usize>| SegmentUnits {
        units: truth
            .neurons
            .iter()
            .map(|n| LocalUnit {
                spike_times: n.spike_times.iter().copied().filter(|t| range.contains(t)).collect(),
                reference_channel: 0,
                channels: vec![0],
                template: vec![vec![0.0]],
                amplitude: n.channel_amplitudes(geometry, offset).iter().map(|&a| a as f32).collect(),
            })
            .collect(),
        range,
    };
    let segments = [local(0.0, 0..half), local(20.0, half..rec.n_samples())];
    let params = StitchParams { d_max_um: 30.0, mu: 0.6 };
    let result = stitch(&segments, geometry, &params, rec.n_samples(), rec.sample_rate());
    assert_eq!(result.segments[1].shift_um, 20.0);
    let kept = result.segments[1]
        .units
        .iter()
        .filter(|u| result.segments[0].units[u.local_id].global_id == u.global_id)
        .count();
    assert!(kept * 10 >= 8 * truth.neurons.len(), "{kept} of {}", truth.neurons.len());
}

#[test]
fn unmatched_units_get_fresh_ids() {
    let geometry = ProbeGeometry::two_column(4, 15.0, 32.0);
    let unit = |amp: [f32; 4], t: usize| LocalUnit {
        spike_times: vec![t],
        reference_channel: 0,
        channels: vec![0],
        template: vec![vec![0.0]],
        amplitude: amp.to_vec(),
    };
    let a = SegmentUnits {
        range: 0..100,
        units: vec![unit([100.0, 10.0, 5.0, 1.0], 10)],
    };
    // A unit on the far end of the probe shares nothing with the first.
    let b = SegmentUnits {
        range: 100..200,
        units: vec![unit([100.0, 10.0, 5.0, 1.0], 110), unit([0.0, 0.0, 3.0, 90.0], 120)],
    };
    let params = StitchParams { d_max_um: 30.0, mu: 0.6 };
    let r = stitch(&[a, b], &geometry, &params, 200, 20_000.0);
    assert_eq!(r.units.len(), 2);
    assert_eq!(r.units[0].spike_times, vec![10, 110]);
    assert_eq!(r.units[1].spike_times, vec![120]);
}
