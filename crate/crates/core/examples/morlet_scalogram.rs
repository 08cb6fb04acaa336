//! Transform a pure tone and read its frequency back off the scalogram.
//!
//! ```text
//! cargo run --example morlet_scalogram
//! ```

use std::f64::consts::PI;

use enerviz::wavelet::{self, CwtMethod, FrequencyMode, MorletParams, ScaleGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fs = 1.0 / 60.0; // one sample per minute
    let n = 1440;
    let params = MorletParams::default();
    let grid = ScaleGrid::default_for(n, 64)?;

    // A tone sitting exactly on grid row 30, in corrected frequency.
    let f = wavelet::scale_to_frequency(grid.scales()[30], fs, &params, FrequencyMode::CenterCorrected);
    let signal: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();

    let s = wavelet::cwt_real(&signal, fs, &grid, &params, CwtMethod::Fft)?;
    let row = s.peak_row();
    let nominal = s.frequencies(FrequencyMode::Nominal)[row];
    let corrected = s.frequencies(FrequencyMode::CenterCorrected)[row];

    println!("tone:        {:.3e} Hz (period {:.1} min)", f, 1.0 / f / 60.0);
    println!("peak row:    {row} (scale {:.2} samples)", grid.scales()[row]);
    println!("nominal:     {nominal:.3e} Hz  (fs/a, high by 2π/ω₀ ≈ {:.3})", 2.0 * PI / params.omega0);
    println!("corrected:   {corrected:.3e} Hz");

    let direct = wavelet::cwt_real(&signal, fs, &grid, &params, CwtMethod::Direct)?;
    let (mut num, mut den) = (0.0, 0.0);
    for r in 0..s.num_scales() {
        for c in 0..s.num_times() {
            if s.is_valid(r, c) {
                num += (s.coefficient(r, c) - direct.coefficient(r, c)).norm_sqr();
                den += direct.coefficient(r, c).norm_sqr();
            }
        }
    }
    println!("fft vs direct, relative L2 inside the cone: {:.2e}", (num / den).sqrt());
    Ok(())
}
