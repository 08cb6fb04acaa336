//! Deterministic rasterization of scalograms and recurrence matrices.
//!
//! Two modes are supported. Heatmaps map each grid cell through a 256-entry
//! colormap with nearest-neighbour resampling; row 0 of the grid is drawn at
//! the bottom of the image. Surfaces project `z = value` orthographically
//! (azimuth 45°, elevation 30°) and paint the mesh quads back to front.
//! Both are pure functions of `(grid, config)`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;

pub const DEFAULT_SIZE: u32 = 512;
pub const COLORMAP_LEN: usize = 256;
/// Lower clamp applied before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

pub const SURFACE_AZIMUTH_DEG: f64 = 45.0;
pub const SURFACE_ELEVATION_DEG: f64 = 30.0;
/// Height of a normalized value of 1 relative to the unit-square footprint.
pub const SURFACE_Z_SCALE: f64 = 0.6;

const BACKGROUND: [u8; 3] = [255, 255, 255];
const AXIS_COLOR: [u8; 3] = [0, 0, 0];

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid contains non-finite values")]
    NonFinite,
    #[error("invalid render configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown colormap {0:?}")]
    UnknownColormap(String),
    #[error("colormap must have exactly {COLORMAP_LEN} entries, got {0}")]
    ColormapSize(usize),
    #[error("png: {0}")]
    Png(String),
}

/// 256-entry RGB lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Colormap {
    name: String,
    table: Vec<[u8; 3]>,
}

static VIRIDIS: OnceLock<Colormap> = OnceLock::new();

impl Colormap {
    pub fn new(name: impl Into<String>, table: Vec<[u8; 3]>) -> Result<Self, RenderError> {
        if table.len() != COLORMAP_LEN {
            return Err(RenderError::ColormapSize(table.len()));
        }
        Ok(Self { name: name.into(), table })
    }

    /// The shipped perceptually uniform map, parsed from `data/viridis.txt`.
    pub fn viridis() -> &'static Colormap {
        VIRIDIS.get_or_init(|| {
            Self::parse_hex_table("viridis", include_str!("../data/viridis.txt"))
                .expect("bundled viridis table is valid")
        })
    }

    pub fn gray() -> Colormap {
        Self { name: "gray".into(), table: (0..=255u8).map(|v| [v, v, v]).collect() }
    }

    pub fn named(name: &str) -> Result<Colormap, RenderError> {
        match name {
            "viridis" => Ok(Self::viridis().clone()),
            "gray" | "grey" => Ok(Self::gray()),
            other => Err(RenderError::UnknownColormap(other.to_string())),
        }
    }

    /// One `rrggbb` entry per line; `#` starts a comment.
    pub fn parse_hex_table(name: &str, text: &str) -> Result<Colormap, RenderError> {
        let table = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| {
                let v = u32::from_str_radix(l, 16)
                    .map_err(|_| RenderError::InvalidConfig(format!("bad colormap entry {l:?}")))?;
                Ok([(v >> 16) as u8, (v >> 8) as u8, v as u8])
            })
            .collect::<Result<Vec<_>, RenderError>>()?;
        Self::new(name, table)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entry(&self, index: usize) -> [u8; 3] {
        self.table[index]
    }

    pub fn first(&self) -> [u8; 3] {
        self.table[0]
    }

    pub fn last(&self) -> [u8; 3] {
        self.table[COLORMAP_LEN - 1]
    }

    /// Table index for a value in [0, 1].
    pub fn index_of(t: f64) -> usize {
        (t.clamp(0.0, 1.0) * (COLORMAP_LEN - 1) as f64).round() as usize
    }

    pub fn color(&self, t: f64) -> [u8; 3] {
        self.table[Self::index_of(t)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    #[default]
    Heatmap,
    Surface3d,
}

impl FromStr for RenderMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heatmap" => Ok(RenderMode::Heatmap),
            "surface3d" | "surface" => Ok(RenderMode::Surface3d),
            other => Err(format!("unknown render mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    pub mode: RenderMode,
    pub colormap: String,
    pub value_scale: ValueScale,
    pub annotate_axes: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: DEFAULT_SIZE,
            height: DEFAULT_SIZE,
            mode: RenderMode::Heatmap,
            colormap: "viridis".into(),
            value_scale: ValueScale::Linear,
            annotate_axes: false,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<Colormap, RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::InvalidConfig(format!(
                "image size must be positive, got {}×{}",
                self.width, self.height
            )));
        }
        Colormap::named(&self.colormap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Cwt,
    Rp,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Cwt => "cwt",
            SourceKind::Rp => "rp",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cwt" => Ok(SourceKind::Cwt),
            "rp" => Ok(SourceKind::Rp),
            other => Err(format!("unknown encoding {other:?}")),
        }
    }
}

/// Where a raster came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: SourceKind,
    pub channel: String,
    /// Compact UTC window start, e.g. `20230701T000000Z`.
    pub window_start: String,
}

impl Provenance {
    /// `{channel}_{windowstart}_{cwt|rp}.png`
    pub fn file_name(&self) -> String {
        format!("{}_{}_{}.png", self.channel, self.window_start, self.kind)
    }
}

/// RGB8 raster plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub config: RenderConfig,
    pub provenance: Option<Provenance>,
}

impl RenderedImage {
    fn blank(cfg: &RenderConfig, fill: [u8; 3]) -> Self {
        let count = cfg.width as usize * cfg.height as usize;
        Self {
            width: cfg.width,
            height: cfg.height,
            pixels: fill.repeat(count),
            config: cfg.clone(),
            provenance: None,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Applies the value scale and min-max normalizes; constant grids map to 0.5.
pub fn normalize_grid(grid: &Grid, scale: ValueScale) -> Result<Grid, RenderError> {
    if grid.is_empty() {
        return Err(RenderError::EmptyGrid);
    }
    if grid.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(RenderError::NonFinite);
    }
    let scaled = match scale {
        ValueScale::Linear => grid.clone(),
        ValueScale::Log => grid.map(|v| v.max(LOG_FLOOR).ln()),
    };
    let (lo, hi) = scaled.min_max().ok_or(RenderError::EmptyGrid)?;
    let range = hi - lo;
    Ok(if range > 0.0 {
        scaled.map(|v| ((v - lo) / range).clamp(0.0, 1.0))
    } else {
        scaled.map(|_| 0.5)
    })
}

/// Pixel rectangle the data occupies: `(x0, y0, width, height)`.
fn plot_area(cfg: &RenderConfig) -> (u32, u32, u32, u32) {
    if !cfg.annotate_axes || cfg.width < 16 || cfg.height < 16 {
        return (0, 0, cfg.width, cfg.height);
    }
    let left = (cfg.width / 12).max(4);
    let bottom = (cfg.height / 12).max(4);
    let pad = (cfg.width / 64).max(1);
    (left, pad, cfg.width - left - pad, cfg.height - bottom - pad)
}

fn draw_axes(img: &mut RenderedImage, area: (u32, u32, u32, u32)) {
    let (x0, y0, w, h) = (area.0 as i64, area.1 as i64, area.2 as i64, area.3 as i64);
    let base = y0 + h;
    let tick = (img.width as i64 / 80).max(2);
    for x in x0 - 1..x0 + w {
        img.put(x, base, AXIS_COLOR);
    }
    for y in y0..=base {
        img.put(x0 - 1, y, AXIS_COLOR);
    }
    for q in 0..=4 {
        let tx = x0 + (w - 1) * q / 4;
        let ty = base - (h - 1) * q / 4;
        for d in 1..=tick {
            img.put(tx, base + d, AXIS_COLOR);
            img.put(x0 - 1 - d, ty, AXIS_COLOR);
        }
    }
}

pub fn render_heatmap(grid: &Grid, cfg: &RenderConfig) -> Result<RenderedImage, RenderError> {
    let cmap = cfg.validate()?;
    let norm = normalize_grid(grid, cfg.value_scale)?;
    let (rows, cols) = (norm.rows() as u64, norm.cols() as u64);
    let mut img = RenderedImage::blank(cfg, BACKGROUND);
    let area = plot_area(cfg);
    let (x0, y0, pw, ph) = area;

    let col_of: Vec<usize> = (0..pw as u64).map(|x| (x * cols / pw as u64) as usize).collect();
    for py in 0..ph {
        let row = ((ph - 1 - py) as u64 * rows / ph as u64) as usize;
        let values = norm.row(row);
        for (px, &col) in col_of.iter().enumerate() {
            img.put((x0 + px as u32) as i64, (y0 + py) as i64, cmap.color(values[col]));
        }
    }
    if cfg.annotate_axes && area != (0, 0, cfg.width, cfg.height) {
        draw_axes(&mut img, area);
    }
    Ok(img)
}

/// Orthographic camera for the surface mode.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceCamera {
    cos_az: f64,
    sin_az: f64,
    cos_el: f64,
    sin_el: f64,
    scale: f64,
    center_x: f64,
    center_y: f64,
    v_mid: f64,
}

impl SurfaceCamera {
    pub fn new(width: u32, height: u32) -> Self {
        let (sin_az, cos_az) = SURFACE_AZIMUTH_DEG.to_radians().sin_cos();
        let (sin_el, cos_el) = SURFACE_ELEVATION_DEG.to_radians().sin_cos();
        // footprint is [-0.5, 0.5]², heights are [0, SURFACE_Z_SCALE]
        let half_u = 0.5 * (cos_az.abs() + sin_az.abs());
        let v_lo = -half_u * sin_el;
        let v_hi = half_u * sin_el + SURFACE_Z_SCALE * cos_el;
        let margin = 0.04;
        let usable_w = width as f64 * (1.0 - 2.0 * margin);
        let usable_h = height as f64 * (1.0 - 2.0 * margin);
        let scale = (usable_w / (2.0 * half_u)).min(usable_h / (v_hi - v_lo));
        Self {
            cos_az,
            sin_az,
            cos_el,
            sin_el,
            scale,
            center_x: width as f64 / 2.0,
            center_y: height as f64 / 2.0,
            v_mid: 0.5 * (v_lo + v_hi),
        }
    }

    /// Projects a point of the unit footprint (`x` along columns, `y` along
    /// rows, both in [-0.5, 0.5]) at height `z` to `(px, py, depth)`;
    /// larger depth is farther from the viewer.
    pub fn project(&self, x: f64, y: f64, z: f64) -> (f64, f64, f64) {
        let u = x * self.cos_az - y * self.sin_az;
        let w = x * self.sin_az + y * self.cos_az;
        let v = z * self.cos_el + w * self.sin_el;
        let depth = w * self.cos_el - z * self.sin_el;
        (self.center_x + u * self.scale, self.center_y - (v - self.v_mid) * self.scale, depth)
    }

    /// Projection of grid vertex `(row, col)` with normalized value `t`.
    pub fn project_vertex(&self, row: usize, col: usize, rows: usize, cols: usize, t: f64) -> (f64, f64, f64) {
        let x = if cols > 1 { col as f64 / (cols - 1) as f64 - 0.5 } else { 0.0 };
        let y = if rows > 1 { row as f64 / (rows - 1) as f64 - 0.5 } else { 0.0 };
        self.project(x, y, t * SURFACE_Z_SCALE)
    }
}

fn fill_triangle(img: &mut RenderedImage, p: [(f64, f64); 3], rgb: [u8; 3]) {
    let edge = |a: (f64, f64), b: (f64, f64), x: f64, y: f64| (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
    let area = edge(p[0], p[1], p[2].0, p[2].1);
    if area == 0.0 {
        return;
    }
    let min_x = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as i64;
    let max_x = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(img.width as f64) as i64;
    let min_y = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as i64;
    let max_y = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(img.height as f64) as i64;
    let sign = area.signum();
    for y in min_y..max_y {
        let cy = y as f64 + 0.5;
        for x in min_x..max_x {
            let cx = x as f64 + 0.5;
            let w0 = sign * edge(p[1], p[2], cx, cy);
            let w1 = sign * edge(p[2], p[0], cx, cy);
            let w2 = sign * edge(p[0], p[1], cx, cy);
            if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
                img.put(x, y, rgb);
            }
        }
    }
}

fn draw_line(img: &mut RenderedImage, a: (f64, f64), b: (f64, f64), rgb: [u8; 3]) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as i64;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        img.put((a.0 + (b.0 - a.0) * t).floor() as i64, (a.1 + (b.1 - a.1) * t).floor() as i64, rgb);
    }
}

pub fn render_surface3d(grid: &Grid, cfg: &RenderConfig) -> Result<RenderedImage, RenderError> {
    let cmap = cfg.validate()?;
    let mut norm = normalize_grid(grid, cfg.value_scale)?;
    // a single row or column still needs a quad to draw
    if norm.rows() == 1 || norm.cols() == 1 {
        let rows = norm.rows().max(2);
        let cols = norm.cols().max(2);
        let src = norm.clone();
        norm = Grid::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                norm.set(r, c, src.get(r.min(src.rows() - 1), c.min(src.cols() - 1)));
            }
        }
    }
    let (rows, cols) = (norm.rows(), norm.cols());
    let camera = SurfaceCamera::new(cfg.width, cfg.height);
    let projected: Vec<(f64, f64, f64)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| camera.project_vertex(r, c, rows, cols, norm.get(r, c)))
        .collect();
    let at = |r: usize, c: usize| projected[r * cols + c];

    let mut quads: Vec<(f64, usize, usize)> = Vec::with_capacity((rows - 1) * (cols - 1));
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let depth = (at(r, c).2 + at(r, c + 1).2 + at(r + 1, c).2 + at(r + 1, c + 1).2) / 4.0;
            quads.push((depth, r, c));
        }
    }
    // back to front; ties broken by position so the order is total
    quads.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut img = RenderedImage::blank(cfg, BACKGROUND);
    for &(_, r, c) in &quads {
        let t = (norm.get(r, c) + norm.get(r, c + 1) + norm.get(r + 1, c) + norm.get(r + 1, c + 1)) / 4.0;
        let rgb = cmap.color(t);
        let v = [at(r, c), at(r, c + 1), at(r + 1, c + 1), at(r + 1, c)].map(|p| (p.0, p.1));
        fill_triangle(&mut img, [v[0], v[1], v[2]], rgb);
        fill_triangle(&mut img, [v[0], v[2], v[3]], rgb);
    }
    if cfg.annotate_axes {
        let floor = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)]
            .map(|(x, y)| camera.project(x, y, 0.0))
            .map(|p| (p.0, p.1));
        for i in 0..4 {
            draw_line(&mut img, floor[i], floor[(i + 1) % 4], AXIS_COLOR);
        }
    }
    Ok(img)
}

pub fn render(grid: &Grid, cfg: &RenderConfig) -> Result<RenderedImage, RenderError> {
    match cfg.mode {
        RenderMode::Heatmap => render_heatmap(grid, cfg),
        RenderMode::Surface3d => render_surface3d(grid, cfg),
    }
}

/// RGB8 PNG with fixed filter and compression settings.
pub fn encode_png(img: &RenderedImage) -> Result<Vec<u8>, RenderError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width, img.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        enc.set_filter(png::Filter::Sub);
        let mut writer = enc.write_header().map_err(|e| RenderError::Png(e.to_string()))?;
        writer.write_image_data(&img.pixels).map_err(|e| RenderError::Png(e.to_string()))?;
        writer.finish().map_err(|e| RenderError::Png(e.to_string()))?;
    }
    Ok(out)
}

/// Decodes an RGB8 PNG into `(width, height, pixels)`.
pub fn decode_png(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>), RenderError> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| RenderError::Png(e.to_string()))?;
    let size = reader.output_buffer_size().ok_or_else(|| RenderError::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| RenderError::Png(e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(RenderError::Png(format!("expected RGB8, got {:?}/{:?}", info.color_type, info.bit_depth)));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, buf))
}
