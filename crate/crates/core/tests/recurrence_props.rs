mod common;

use enerviz::recurrence::{self, embed, recurrence_matrix, solve_epsilon, EmbeddingSpec, ThresholdPolicy};
use proptest::prelude::*;
use rand::Rng;

fn random_case(seed: u64) -> (Vec<f64>, EmbeddingSpec, f64) {
    let mut rng = common::rng(seed);
    let spec = EmbeddingSpec { dimension: rng.random_range(1..=4), delay: rng.random_range(1..=3) };
    let n = rng.random_range(spec.span() + 2..=128 + spec.span() - 1);
    let x = common::random_signal(&mut rng, n);
    (x, spec, rng.random_range(0.05..1.5))
}

#[test]
fn matches_brute_force_on_fifty_instances() {
    for seed in 0..50 {
        let (x, spec, eps) = random_case(seed);
        let oracle = common::brute_force_rp(&x, spec.dimension, spec.delay, eps);
        let states = embed(&x, &spec).unwrap();
        assert!(states.len() <= 128);
        let m = recurrence_matrix(&states, ThresholdPolicy::Fixed(eps)).unwrap();
        assert_eq!(m.size(), oracle.len());
        for (i, row) in oracle.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                assert_eq!(m.get(i, j), b, "seed {seed} ({i},{j})");
            }
        }
    }
}

#[test]
fn target_rate_within_two_over_n() {
    for seed in 100..150 {
        let (x, spec, _) = random_case(seed);
        let states = embed(&x, &spec).unwrap();
        let n = states.len() as f64;
        for target in [0.05, 0.1, 0.25, 0.5] {
            let m = recurrence_matrix(&states, ThresholdPolicy::TargetRate(target)).unwrap();
            assert!((m.recurrence_rate - target).abs() <= 2.0 / n, "seed {seed} target {target}: {}", m.recurrence_rate);
        }
    }
}

#[test]
fn solved_epsilon_is_minimal() {
    for seed in 200..220 {
        let (x, spec, _) = random_case(seed);
        let states = embed(&x, &spec).unwrap();
        let eps = solve_epsilon(&states, 0.2).unwrap();
        let at = recurrence_matrix(&states, ThresholdPolicy::Fixed(eps)).unwrap();
        assert!(at.recurrence_rate >= 0.2);
        let below = recurrence_matrix(&states, ThresholdPolicy::Fixed(eps.next_down())).unwrap();
        assert!(below.recurrence_rate < 0.2);
    }
}

#[test]
fn dump_round_trip_on_random_instances() {
    for seed in 300..310 {
        let (x, spec, _) = random_case(seed);
        let m = recurrence::recurrence_plot(
            &enerviz::Window {
                parent_channel: "x".into(),
                start_index: 0,
                start_time: chrono::DateTime::UNIX_EPOCH,
                sample_period_secs: 60,
                samples: x,
                normalized: true,
            },
            &spec,
            ThresholdPolicy::TargetRate(0.1),
        )
        .unwrap();
        let mut buf = Vec::new();
        recurrence::write_dump(&m, &mut buf).unwrap();
        assert_eq!(recurrence::read_dump(buf.as_slice()).unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_with_unit_diagonal(seed in any::<u64>(), eps in 0.0f64..2.0) {
        let (x, spec, _) = random_case(seed);
        let m = recurrence_matrix(&embed(&x, &spec).unwrap(), ThresholdPolicy::Fixed(eps)).unwrap();
        for i in 0..m.size() {
            prop_assert!(m.get(i, i));
            for j in 0..i {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn monotone_in_epsilon(seed in any::<u64>(), e1 in 0.0f64..2.0, e2 in 0.0f64..2.0) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let (x, spec, _) = random_case(seed);
        let states = embed(&x, &spec).unwrap();
        let a = recurrence_matrix(&states, ThresholdPolicy::Fixed(lo)).unwrap();
        let b = recurrence_matrix(&states, ThresholdPolicy::Fixed(hi)).unwrap();
        for (p, q) in a.bits().iter().zip(b.bits()) {
            prop_assert!(!p || *q);
        }
    }

    #[test]
    fn invariant_under_power_of_two_scaling(seed in any::<u64>(), k in -8i32..8, eps in 0.0f64..1.5) {
        // Scaling by 2^k is exact in floating point, so bits must agree exactly.
        let (x, spec, _) = random_case(seed);
        let s = 2f64.powi(k);
        let y: Vec<f64> = x.iter().map(|v| v * s).collect();
        let a = recurrence_matrix(&embed(&x, &spec).unwrap(), ThresholdPolicy::Fixed(eps)).unwrap();
        let b = recurrence_matrix(&embed(&y, &spec).unwrap(), ThresholdPolicy::Fixed(eps * s)).unwrap();
        prop_assert_eq!(a.bits(), b.bits());
    }

    #[test]
    fn rate_counts_ones(seed in any::<u64>(), eps in 0.0f64..2.0) {
        let (x, spec, _) = random_case(seed);
        let m = recurrence_matrix(&embed(&x, &spec).unwrap(), ThresholdPolicy::Fixed(eps)).unwrap();
        prop_assert_eq!(m.recurrence_rate, m.count_ones() as f64 / (m.size() * m.size()) as f64);
    }
}
