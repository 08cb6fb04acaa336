mod common;

use std::f64::consts::PI;

use enerviz::wavelet::{
    self, cwt_complex, cwt_real, CwtMethod, FrequencyMode, MorletParams, ScaleGrid, Scalogram,
};
use num_complex::Complex64;
use proptest::prelude::*;

const FS: f64 = 1.0 / 60.0;

fn coeffs(s: &Scalogram) -> Vec<Complex64> {
    (0..s.num_scales()).flat_map(|r| (0..s.num_times()).map(move |c| s.coefficient(r, c))).collect()
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn direct_matches_naive_definition() {
    let mut rng = common::rng(11);
    let x = common::random_signal(&mut rng, 96);
    let grid = ScaleGrid::log(2.0, 40.0, 9).unwrap();
    let s = cwt_real(&x, FS, &grid, &MorletParams::default(), CwtMethod::Direct).unwrap();
    let oracle = common::naive_cwt(&x, FS, grid.scales(), 6.0);
    for (r, row) in oracle.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            let d = (s.coefficient(r, c) - z).norm();
            assert!(d <= 1e-12 * (1.0 + z.norm()), "row {r} col {c}: {d}");
        }
    }
}

#[test]
fn fft_matches_direct_inside_cone() {
    let mut rng = common::rng(12);
    let params = MorletParams::default();
    for trial in 0..5 {
        let x = common::random_signal(&mut rng, 300 + 17 * trial);
        let grid = ScaleGrid::default_for(x.len(), 32).unwrap();
        let f = cwt_real(&x, FS, &grid, &params, CwtMethod::Fft).unwrap();
        let d = cwt_real(&x, FS, &grid, &params, CwtMethod::Direct).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for r in 0..f.num_scales() {
            for c in 0..f.num_times() {
                if f.is_valid(r, c) {
                    a.push(f.coefficient(r, c));
                    b.push(d.coefficient(r, c));
                }
            }
        }
        assert!(!a.is_empty());
        assert!(common::rel_l2(&a, &b) < 1e-10, "trial {trial}");
    }
}

#[test]
fn admissibility_correction_changes_only_the_offset() {
    let p = MorletParams { admissibility_correction: true, ..MorletParams::default() };
    // mean of the corrected wavelet is zero to quadrature accuracy
    let mean: Complex64 = (-4000..=4000).map(|k| wavelet::morlet(k as f64 * 0.005, &p) * 0.005).sum();
    assert!(mean.norm() < 1e-12, "{mean}");
    let plain = MorletParams::default();
    let d = wavelet::morlet(0.7, &plain) - wavelet::morlet(0.7, &p);
    let expected = (-18.0f64).exp() * (-0.245f64).exp() * PI.powf(-0.25);
    assert!((d.re - expected).abs() < 1e-15 && d.im.abs() < 1e-15, "{d} vs {expected}");
}

#[test]
fn sinusoids_land_in_their_bin() {
    let n = 1440;
    let params = MorletParams::default();
    let grid = ScaleGrid::default_for(n, 64).unwrap();
    for row in [8usize, 16, 24, 32, 40] {
        let f = wavelet::scale_to_frequency(grid.scales()[row], FS, &params, FrequencyMode::CenterCorrected);
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / FS + 0.3).cos()).collect();
        let s = cwt_real(&x, FS, &grid, &params, CwtMethod::Fft).unwrap();
        assert_eq!(s.peak_row(), row);
        let nominal = s.frequencies(FrequencyMode::Nominal)[s.peak_row()];
        assert!((nominal / f - 2.0 * PI / 6.0).abs() < 1e-9);
    }
}

#[test]
fn frequency_scale_round_trip() {
    let p = MorletParams::default();
    for mode in [FrequencyMode::Nominal, FrequencyMode::CenterCorrected] {
        for a in [1.5, 4.0, 37.25, 720.0] {
            let f = wavelet::scale_to_frequency(a, FS, &p, mode);
            assert!((wavelet::frequency_to_scale(f, FS, &p, mode) - a).abs() < 1e-9 * a);
        }
    }
}

#[test]
fn dump_round_trip_on_random_window() {
    let mut rng = common::rng(3);
    let x = common::random_signal(&mut rng, 128);
    let s = cwt_real(&x, FS, &ScaleGrid::default_for(128, 16).unwrap(), &MorletParams::default(), CwtMethod::Fft)
        .unwrap();
    let mut buf = Vec::new();
    wavelet::write_dump(&s, &mut buf).unwrap();
    let d = wavelet::read_dump(buf.as_slice()).unwrap();
    assert_eq!(d.scales, s.scale_grid.scales());
    for r in 0..16 {
        for c in 0..128 {
            assert_eq!(d.power[r * 128 + c], s.power.get(r, c) as f32);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linearity(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, direct in any::<bool>()) {
        let method = if direct { CwtMethod::Direct } else { CwtMethod::Fft };
        let mut rng = common::rng(seed);
        let x = common::random_signal(&mut rng, 128);
        let y = common::random_signal(&mut rng, 128);
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let grid = ScaleGrid::default_for(128, 16).unwrap();
        let p = MorletParams::default();
        let cx = coeffs(&cwt_real(&x, FS, &grid, &p, method).unwrap());
        let cy = coeffs(&cwt_real(&y, FS, &grid, &p, method).unwrap());
        let cz = coeffs(&cwt_real(&z, FS, &grid, &p, method).unwrap());
        let combo: Vec<Complex64> = cx.iter().zip(&cy).map(|(a, b)| a * alpha + b * beta).collect();
        let scale = max_abs(&cz).max(1e-300);
        let err = cz.iter().zip(&combo).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-9 * scale, "err {err} scale {scale}");
    }

    #[test]
    fn time_shift_covariance(seed in any::<u64>(), shift in 1usize..40) {
        // A compact pulse train surrounded by zeros, so the shift loses nothing.
        let n = 256;
        let mut rng = common::rng(seed);
        let core = common::random_signal(&mut rng, 48);
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        x[100..148].copy_from_slice(&core);
        y[100 + shift..148 + shift].copy_from_slice(&core);
        let grid = ScaleGrid::log(2.0, 12.0, 8).unwrap();
        let p = MorletParams::default();
        let sx = cwt_real(&x, FS, &grid, &p, CwtMethod::Fft).unwrap();
        let sy = cwt_real(&y, FS, &grid, &p, CwtMethod::Fft).unwrap();
        let scale = max_abs(&coeffs(&sx));
        for r in 0..grid.count() {
            for m in 0..n - shift {
                let d = (sy.coefficient(r, m + shift) - sx.coefficient(r, m)).norm();
                prop_assert!(d <= 1e-6 * scale, "row {r} col {m}: {d}");
            }
        }
    }

    #[test]
    fn global_phase_leaves_power_unchanged(seed in any::<u64>(), phi in 0.0f64..(2.0 * PI)) {
        let mut rng = common::rng(seed);
        let x: Vec<Complex64> =
            common::random_signal(&mut rng, 64).chunks(1).map(|c| Complex64::new(c[0], c[0] * 0.5)).collect();
        let rot: Vec<Complex64> = x.iter().map(|z| z * Complex64::from_polar(1.0, phi)).collect();
        let grid = ScaleGrid::default_for(64, 8).unwrap();
        let p = MorletParams::default();
        let a = cwt_complex(&x, FS, &grid, &p, CwtMethod::Fft).unwrap();
        let b = cwt_complex(&rot, FS, &grid, &p, CwtMethod::Fft).unwrap();
        let top = a.power.min_max().unwrap().1;
        for (u, v) in a.power.as_slice().iter().zip(b.power.as_slice()) {
            prop_assert!((u - v).abs() <= 1e-12 * top);
        }
    }

    #[test]
    fn power_is_nonnegative_and_finite(seed in any::<u64>(), n in 8usize..200) {
        let mut rng = common::rng(seed);
        let x = common::random_signal(&mut rng, n);
        let s = cwt_real(&x, FS, &ScaleGrid::default_for(n, 12).unwrap(), &MorletParams::default(), CwtMethod::Fft).unwrap();
        prop_assert!(s.power.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}
