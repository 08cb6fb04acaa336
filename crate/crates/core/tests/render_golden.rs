//! Frozen digests for the renderers. Set `ENERVIZ_BLESS=1` to write a
//! missing golden file; an existing one is never overwritten.

use std::path::PathBuf;

use enerviz::render::{self, RenderConfig, RenderMode, SurfaceCamera, ValueScale};
use enerviz::Grid;
use proptest::prelude::*;
use sha2::{Digest, Sha256};

/// Fixed 64×64 scalogram-like grid: a Gaussian blob over a ripple.
fn synthetic_scalogram() -> Grid {
    let mut g = Grid::zeros(64, 64);
    for r in 0..64 {
        for c in 0..64 {
            let (dr, dc) = (r as f64 - 20.0, c as f64 - 41.0);
            let blob = (-(dr * dr + dc * dc) / 60.0).exp();
            let ripple = 0.25 * ((c as f64) / 5.0).sin().powi(2) * (r as f64 / 63.0);
            g.set(r, c, blob + ripple);
        }
    }
    g
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.sha256"))
}

fn check_golden(name: &str, pixels: &[u8]) {
    let digest = hex::encode(Sha256::digest(pixels));
    let path = golden_path(name);
    match std::fs::read_to_string(&path) {
        Ok(expected) => assert_eq!(digest, expected.trim(), "{name} digest changed"),
        Err(_) if std::env::var_os("ENERVIZ_BLESS").is_some() => {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, format!("{digest}\n")).unwrap();
        }
        Err(e) => panic!("missing golden {}: {e}", path.display()),
    }
}

#[test]
fn heatmap_golden() {
    let img = render::render_heatmap(&synthetic_scalogram(), &RenderConfig::default()).unwrap();
    assert_eq!((img.width, img.height), (512, 512));
    check_golden("heatmap_64x64_default", &img.pixels);
}

#[test]
fn heatmap_log_axes_golden() {
    let cfg = RenderConfig { value_scale: ValueScale::Log, annotate_axes: true, ..RenderConfig::default() };
    check_golden("heatmap_64x64_log_axes", &render::render_heatmap(&synthetic_scalogram(), &cfg).unwrap().pixels);
}

#[test]
fn surface_golden() {
    let cfg = RenderConfig { mode: RenderMode::Surface3d, ..RenderConfig::default() };
    check_golden("surface_64x64_default", &render::render(&synthetic_scalogram(), &cfg).unwrap().pixels);
}

#[test]
fn png_bytes_are_stable() {
    let img = render::render_heatmap(&synthetic_scalogram(), &RenderConfig::default()).unwrap();
    let a = render::encode_png(&img).unwrap();
    let b = render::encode_png(&render::render_heatmap(&synthetic_scalogram(), &RenderConfig::default()).unwrap()).unwrap();
    assert_eq!(a, b);
    let (w, h, pixels) = render::decode_png(&a).unwrap();
    assert_eq!((w, h), (512, 512));
    assert_eq!(pixels, img.pixels);
}

#[test]
fn surface_peak_lands_at_projected_vertex() {
    let cfg = RenderConfig { mode: RenderMode::Surface3d, ..RenderConfig::default() };
    let camera = SurfaceCamera::new(cfg.width, cfg.height);
    for (r, c) in [(32usize, 32usize), (20, 40), (40, 25)] {
        let mut g = Grid::zeros(64, 64);
        g.set(r, c, 1.0);
        let img = render::render_surface3d(&g, &cfg).unwrap();
        let (px, py, _) = camera.project_vertex(r, c, 64, 64, 1.0);
        let top = (0..img.height)
            .find_map(|y| (0..img.width).find(|&x| img.pixel(x, y) != [255, 255, 255]).map(|x| (x, y)))
            .unwrap();
        assert!((top.0 as f64 + 0.5 - px).abs() <= 1.0, "spike ({r},{c}): column {} vs {px}", top.0);
        // The apex itself is thinner than a pixel, so the first covered row
        // sits a little below it, but well above the flat plane's far corner.
        let (_, far_y, _) = camera.project(-0.5, -0.5, 0.0);
        let far_y = far_y.min(camera.project(0.5, -0.5, 0.0).1).min(camera.project(-0.5, 0.5, 0.0).1);
        assert!(top.1 as f64 >= py - 1.0 && (top.1 as f64) < far_y - 20.0, "spike ({r},{c}): row {} vs {py}", top.1);
    }
}

#[test]
fn heatmap_orientation() {
    // Row 0 of the grid is drawn at the bottom, column 0 at the left.
    let mut g = Grid::zeros(4, 4);
    g.set(0, 0, 1.0);
    let img = render::render_heatmap(&g, &RenderConfig::default()).unwrap();
    let cmap = enerviz::Colormap::viridis();
    assert_eq!(img.pixel(0, 511), cmap.last());
    assert_eq!(img.pixel(511, 0), cmap.first());
    assert_eq!(img.pixel(0, 0), cmap.first());
}

proptest! {
    #[test]
    fn heatmap_colormap_index_is_monotone(values in proptest::collection::vec(0.0f64..1e3, 2..40)) {
        let g = Grid::from_vec(1, values.len(), values.clone()).unwrap();
        let norm = render::normalize_grid(&g, ValueScale::Linear).unwrap();
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(
                        enerviz::Colormap::index_of(norm.get(0, i)) <= enerviz::Colormap::index_of(norm.get(0, j))
                    );
                }
            }
        }
    }

    #[test]
    fn output_matches_configured_size(w in 1u32..96, h in 1u32..96, rows in 1usize..12, cols in 1usize..12, surface in any::<bool>()) {
        let g = Grid::from_vec(rows, cols, (0..rows * cols).map(|v| (v * 7 % 5) as f64).collect()).unwrap();
        let mode = if surface { RenderMode::Surface3d } else { RenderMode::Heatmap };
        let img = render::render(&g, &RenderConfig { width: w, height: h, mode, ..RenderConfig::default() }).unwrap();
        prop_assert_eq!((img.width, img.height), (w, h));
        prop_assert_eq!(img.pixels.len(), (w * h * 3) as usize);
    }
}
