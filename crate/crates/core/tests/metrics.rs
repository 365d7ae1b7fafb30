use ctlab_core::metrics::{classify, count_transmitters, estimate_rfo, BatchTally, ErrorHistogram, RfoConfig};
use ctlab_core::receiver::ReceptionOutcome;
use ctlab_core::rng::stream_rng;
use proptest::prelude::*;
use rand::Rng;

const BIT_RATE: f64 = 500e3;

/// Errors that follow beating nulls of period `1/rfo`, plus uniform clutter.
fn beating_histogram(len: usize, rfos: &[f64], seed: u64) -> ErrorHistogram {
    let mut rng = stream_rng(seed, 0);
    let mut h = ErrorHistogram::new(len, BIT_RATE);
    let phases: Vec<f64> = rfos.iter().map(|_| rng.random::<f64>()).collect();
    for (k, c) in h.counts.iter_mut().enumerate() {
        let t = k as f64 / BIT_RATE;
        let depth: f64 = rfos
            .iter()
            .zip(&phases)
            .map(|(&f, &p)| (1.0 - (std::f64::consts::PI * (f * t + p)).cos().abs()).powi(4))
            .sum();
        *c = (400.0 * depth + 20.0 * rng.random::<f64>()) as u64;
    }
    h.n_received = 5000;
    h.n_errored = 2000;
    h
}

fn outcome(detected: bool, errors: Vec<usize>, bits: usize) -> ReceptionOutcome {
    ReceptionOutcome { preamble_detected: detected, error_positions: errors, payload_bits: bits, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_beating_frequency_is_recovered(rfo in 400.0..20e3f64, seed in any::<u64>()) {
        let h = beating_histogram(2000, &[rfo], seed);
        let est = estimate_rfo(&h, &RfoConfig::default()).unwrap();
        let got = est.dominant().unwrap();
        prop_assert!((got - rfo).abs() <= est.resolution_hz, "{got} vs {rfo}");
    }

    #[test]
    fn rates_partition_the_batch(
        kinds in prop::collection::vec(0u8..3, 1..200),
    ) {
        let traces: Vec<ReceptionOutcome> = kinds
            .iter()
            .map(|&k| match k {
                0 => outcome(true, vec![], 16),
                1 => outcome(true, vec![3, 7], 16),
                _ => outcome(false, vec![], 16),
            })
            .collect();
        let m = classify(&traces).unwrap();
        prop_assert!((m.prr + m.per + m.plr - 1.0).abs() < 1e-12);
        let n = kinds.len() as f64;
        prop_assert!((m.prr - kinds.iter().filter(|&&k| k == 0).count() as f64 / n).abs() < 1e-12);
        prop_assert!((m.plr - kinds.iter().filter(|&&k| k == 2).count() as f64 / n).abs() < 1e-12);
    }

    #[test]
    fn merging_tallies_matches_one_pass(split in 0usize..100, kinds in prop::collection::vec(0u8..3, 100)) {
        let traces: Vec<ReceptionOutcome> =
            kinds.iter().map(|&k| outcome(k != 2, if k == 1 { vec![1] } else { vec![] }, 8)).collect();
        let mut whole = BatchTally::default();
        traces.iter().for_each(|o| whole.add(o));
        let (mut a, mut b) = (BatchTally::default(), BatchTally::default());
        traces[..split].iter().for_each(|o| a.add(o));
        traces[split..].iter().for_each(|o| b.add(o));
        b.merge(&a);
        prop_assert_eq!(b, whole);
    }
}

#[test]
fn three_transmitters_give_two_significant_peaks() {
    // pairwise offsets of {0, 248, 3968} Hz; the 248 Hz beat dominates the
    // error pattern and the two large ones sit 248 Hz apart
    let h = beating_histogram(2000, &[248.0, 3720.0], 11);
    let est = estimate_rfo(&h, &RfoConfig::default()).unwrap();
    let c = count_transmitters(&est);
    assert_eq!(c.estimate, 3, "{:?}", est.peaks);
    assert!(c.confident);
}
