//! Render one scalogram as a heatmap and as a 3D surface.
//!
//! ```text
//! cargo run --example render_images -- /tmp/enerviz-render
//! ```

use std::f64::consts::PI;
use std::path::PathBuf;

use enerviz::render::{self, RenderConfig, RenderMode, ValueScale};
use enerviz::wavelet::{self, CwtMethod, MorletParams, ScaleGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("enerviz-render"), Into::into);
    std::fs::create_dir_all(&out)?;

    // A chirp-like load with a burst at two thirds of the day.
    let n = 1440;
    let signal: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let burst = if (950..960).contains(&i) { 3.0 } else { 0.0 };
            (2.0 * PI * (4.0 + 40.0 * t) * t).sin() + burst
        })
        .collect();
    let s = wavelet::cwt_real(&signal, 1.0 / 60.0, &ScaleGrid::default_for(n, 64)?, &MorletParams::default(), CwtMethod::Fft)?;

    let configs = [
        ("heatmap", RenderConfig::default()),
        ("heatmap_log", RenderConfig { value_scale: ValueScale::Log, annotate_axes: true, ..RenderConfig::default() }),
        ("surface", RenderConfig { mode: RenderMode::Surface3d, ..RenderConfig::default() }),
    ];
    for (name, cfg) in configs {
        let img = render::render(&s.power, &cfg)?;
        let path = out.join(format!("{name}.png"));
        std::fs::write(&path, render::encode_png(&img)?)?;
        println!("{} ({}×{})", path.display(), img.width, img.height);
    }
    Ok(())
}
