use enerviz::schedule::{self, lr_at, lr_at_continuous, AccumulationConfig, ScheduleConfig};
use proptest::prelude::*;

#[test]
fn landmarks_with_default_floor() {
    let cfg = ScheduleConfig::default();
    assert_eq!(lr_at(0, &cfg).unwrap(), 0.0);
    assert_eq!(lr_at(50, &cfg).unwrap(), 1e-4);
    assert_eq!(lr_at(800, &cfg).unwrap(), 0.0);
    assert!((lr_at(425, &cfg).unwrap() - 5e-5).abs() < 1e-18);
}

#[test]
fn warmup_joins_the_cosine() {
    for eta_min in [0.0, 1e-6, 3e-5] {
        let cfg = ScheduleConfig { eta_min, warmup_floor: 1e-6, ..ScheduleConfig::default() };
        let left = lr_at_continuous(50.0 - 1e-9, &cfg).unwrap();
        let right = lr_at_continuous(50.0, &cfg).unwrap();
        assert!((left - right).abs() < 1e-12);
        let end = lr_at_continuous(800.0 - 1e-9, &cfg).unwrap();
        assert!((end - eta_min).abs() < 1e-12);
    }
}

#[test]
fn trace_matches_pointwise_and_csv() {
    let cfg = ScheduleConfig::default();
    let trace = schedule::schedule_trace(&cfg).unwrap();
    assert_eq!(trace.len(), 801);
    let mut csv = Vec::new();
    schedule::write_schedule_csv(&cfg, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    for ((t, lr), line) in trace.iter().zip(text.lines().skip(1)) {
        assert_eq!(lr_at(*t, &cfg).unwrap(), *lr);
        let (step, rate) = line.split_once(',').unwrap();
        assert_eq!(step.parse::<u32>().unwrap(), *t);
        assert_eq!(rate.parse::<f64>().unwrap(), *lr);
    }
}

#[test]
fn effective_batch_is_product() {
    assert_eq!(schedule::effective_batch(&AccumulationConfig::default()), 48);
}

proptest! {
    #[test]
    fn warmup_rises_and_cosine_falls(
        eta_max in 1e-6f64..1e-2,
        min_frac in 0.0f64..1.0,
        floor_frac in 0.0f64..1.0,
        t_warm in 1u32..200,
        extra in 1u32..2000,
    ) {
        let cfg = ScheduleConfig {
            eta_max,
            eta_min: eta_max * min_frac,
            warmup_floor: eta_max * floor_frac,
            t_warm,
            t_max: t_warm + extra,
        };
        let trace = schedule::schedule_trace(&cfg).unwrap();
        for w in trace.windows(2) {
            let (t, a) = w[0];
            let b = w[1].1;
            if t < t_warm {
                prop_assert!(b >= a);
            } else {
                prop_assert!(b <= a);
            }
        }
        for &(_, lr) in &trace {
            prop_assert!(lr >= cfg.eta_min.min(cfg.warmup_floor) - 1e-18 && lr <= eta_max + 1e-18);
        }
        let mid = lr_at_continuous((t_warm + cfg.t_max) as f64 / 2.0, &cfg).unwrap();
        prop_assert!((mid - (eta_max + cfg.eta_min) / 2.0).abs() <= 1e-12 * eta_max);
    }

    #[test]
    fn batch_scales_linearly(b in 1u32..64, g in 1u32..64) {
        prop_assert_eq!(schedule::effective_batch(&AccumulationConfig { micro_batch: b, accumulation_steps: g }), b * g);
    }
}
