//! Continuous wavelet transform with the complex Morlet wavelet.
//!
//! Scales are expressed in samples. For a window `x[0..N]` sampled at `fs`
//! the coefficient at scale `a` and translation `m` is the Riemann sum
//!
//! ```text
//! C(a, m) = (1 / sqrt(a·dt)) · Σₙ x[n] · ψ*((n − m) / a) · dt,   dt = 1 / fs
//! ```
//!
//! i.e. the `1/sqrt(|a|)` normalized integral with the scale converted to
//! seconds. [`CwtMethod::Direct`] evaluates that sum literally and is the
//! reference; [`CwtMethod::Fft`] computes the same linear correlation by
//! zero-padded frequency-domain multiplication.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::ingest::Window;

/// Kernel truncation for the FFT path, in envelope standard deviations.
/// The Gaussian factor there is `exp(-32)`.
pub const KERNEL_HALF_WIDTH_SIGMAS: f64 = 8.0;

/// Half width of the cone of influence, in envelope standard deviations.
pub const SUPPORT_SIGMAS: f64 = 6.0;

/// Shortest window the transform accepts.
pub const MIN_WINDOW_LEN: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum WaveletError {
    #[error("window is empty")]
    EmptyWindow,
    #[error("window has {0} samples, at least {MIN_WINDOW_LEN} are required")]
    WindowTooShort(usize),
    #[error("scale {0} is smaller than one sample")]
    DegenerateScale(f64),
    #[error("invalid scale grid: {0}")]
    InvalidGrid(String),
    #[error("invalid wavelet parameters: {0}")]
    InvalidParams(String),
    #[error("window contains non-finite samples")]
    NonFinite,
    #[error("malformed scalogram dump: {0}")]
    MalformedDump(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MorletParams {
    /// Central angular frequency of the mother wavelet, in radians.
    pub omega0: f64,
    /// Subtract the `exp(-ω₀²/2)` term that makes the wavelet exactly zero-mean.
    pub admissibility_correction: bool,
}

impl Default for MorletParams {
    fn default() -> Self {
        Self { omega0: 6.0, admissibility_correction: false }
    }
}

impl MorletParams {
    pub fn validate(&self) -> Result<(), WaveletError> {
        if self.omega0 > 0.0 && self.omega0.is_finite() {
            Ok(())
        } else {
            Err(WaveletError::InvalidParams(format!("omega0 must be positive, got {}", self.omega0)))
        }
    }
}

/// ψ(t) = π^(−1/4) · e^(iω₀t) · e^(−t²/2)
pub fn morlet(t: f64, params: &MorletParams) -> Complex64 {
    let envelope = PI.powf(-0.25) * (-0.5 * t * t).exp();
    let carrier = Complex64::from_polar(1.0, params.omega0 * t);
    if params.admissibility_correction {
        (carrier - (-0.5 * params.omega0 * params.omega0).exp()) * envelope
    } else {
        carrier * envelope
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Log,
    Linear,
}

/// Strictly increasing list of positive scales, in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    scales: Vec<f64>,
    spacing: Spacing,
}

impl ScaleGrid {
    pub fn new(scales: Vec<f64>, spacing: Spacing) -> Result<Self, WaveletError> {
        if scales.is_empty() {
            return Err(WaveletError::InvalidGrid("no scales".into()));
        }
        if scales.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(WaveletError::InvalidGrid("scales must be positive and finite".into()));
        }
        if scales.windows(2).any(|p| p[1] <= p[0]) {
            return Err(WaveletError::InvalidGrid("scales must be strictly increasing".into()));
        }
        Ok(Self { scales, spacing })
    }

    pub fn log(min: f64, max: f64, count: usize) -> Result<Self, WaveletError> {
        Self::spaced(min, max, count, Spacing::Log)
    }

    pub fn linear(min: f64, max: f64, count: usize) -> Result<Self, WaveletError> {
        Self::spaced(min, max, count, Spacing::Linear)
    }

    fn spaced(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Self, WaveletError> {
        if count == 0 {
            return Err(WaveletError::InvalidGrid("count must be positive".into()));
        }
        if count == 1 {
            return Self::new(vec![min], spacing);
        }
        let step = (count - 1) as f64;
        let scales = (0..count)
            .map(|i| {
                let frac = i as f64 / step;
                match spacing {
                    Spacing::Log => (min.ln() + frac * (max.ln() - min.ln())).exp(),
                    Spacing::Linear => min + frac * (max - min),
                }
            })
            .collect();
        Self::new(scales, spacing)
    }

    /// Default grid for a window of `len` samples: `count` log-spaced scales
    /// whose `fs/a` pseudo-frequencies run from `fs/4` down to `2/(window duration)`,
    /// i.e. scales 4 through `len/2`.
    pub fn default_for(len: usize, count: usize) -> Result<Self, WaveletError> {
        let min = 4.0;
        let max = (len as f64 / 2.0).max(2.0 * min);
        Self::log(min, max, count)
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn count(&self) -> usize {
        self.scales.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMode {
    /// `fs / a`
    #[default]
    Nominal,
    /// `(ω₀ / 2π) · fs / a`, the Morlet centre frequency at scale `a`.
    CenterCorrected,
}

/// Pseudo-frequency in Hz of scale `a` (in samples) at sample rate `fs`.
pub fn scale_to_frequency(a: f64, fs: f64, params: &MorletParams, mode: FrequencyMode) -> f64 {
    match mode {
        FrequencyMode::Nominal => fs / a,
        FrequencyMode::CenterCorrected => params.omega0 / (2.0 * PI) * fs / a,
    }
}

/// Inverse of [`scale_to_frequency`].
pub fn frequency_to_scale(f: f64, fs: f64, params: &MorletParams, mode: FrequencyMode) -> f64 {
    match mode {
        FrequencyMode::Nominal => fs / f,
        FrequencyMode::CenterCorrected => params.omega0 / (2.0 * PI) * fs / f,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CwtMethod {
    #[default]
    Fft,
    Direct,
}

/// CWT coefficients and their power, rows indexed by scale (ascending),
/// columns by sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalogram {
    pub power: Grid,
    pub coeffs_real: Grid,
    pub coeffs_imag: Grid,
    pub scale_grid: ScaleGrid,
    pub sample_rate: f64,
    pub frequency_mode: FrequencyMode,
    pub frequency_map: Vec<f64>,
    pub params: MorletParams,
}

impl Scalogram {
    pub fn num_scales(&self) -> usize {
        self.power.rows()
    }

    pub fn num_times(&self) -> usize {
        self.power.cols()
    }

    /// Samples on either side of the window edge that fall inside the cone
    /// of influence at scale row `row`.
    pub fn support_half_width(&self, row: usize) -> usize {
        support_half_width(self.scale_grid.scales()[row])
    }

    /// Whether column `col` of scale row `row` lies outside the cone of influence.
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        let w = self.support_half_width(row);
        col >= w && col + w < self.num_times()
    }

    pub fn coefficient(&self, row: usize, col: usize) -> Complex64 {
        Complex64::new(self.coeffs_real.get(row, col), self.coeffs_imag.get(row, col))
    }

    /// Pseudo-frequencies under `mode`, one per scale row.
    pub fn frequencies(&self, mode: FrequencyMode) -> Vec<f64> {
        self.scale_grid
            .scales()
            .iter()
            .map(|&a| scale_to_frequency(a, self.sample_rate, &self.params, mode))
            .collect()
    }

    /// Row with the largest summed power.
    pub fn peak_row(&self) -> usize {
        (0..self.num_scales())
            .map(|r| (r, self.power.row(r).iter().sum::<f64>()))
            .fold((0, f64::NEG_INFINITY), |best, (r, s)| if s > best.1 { (r, s) } else { best })
            .0
    }
}

pub fn support_half_width(scale: f64) -> usize {
    (SUPPORT_SIGMAS * scale).ceil() as usize
}

/// Transforms a window; the sample rate comes from the window's period.
pub fn cwt(
    w: &Window,
    grid: &ScaleGrid,
    params: &MorletParams,
    method: CwtMethod,
) -> Result<Scalogram, WaveletError> {
    cwt_real(&w.samples, w.sample_rate_hz(), grid, params, method)
}

pub fn cwt_real(
    samples: &[f64],
    sample_rate: f64,
    grid: &ScaleGrid,
    params: &MorletParams,
    method: CwtMethod,
) -> Result<Scalogram, WaveletError> {
    let signal: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    cwt_complex(&signal, sample_rate, grid, params, method)
}

/// Transforms a complex-valued signal.
pub fn cwt_complex(
    signal: &[Complex64],
    sample_rate: f64,
    grid: &ScaleGrid,
    params: &MorletParams,
    method: CwtMethod,
) -> Result<Scalogram, WaveletError> {
    params.validate()?;
    if signal.is_empty() {
        return Err(WaveletError::EmptyWindow);
    }
    if signal.len() < MIN_WINDOW_LEN {
        return Err(WaveletError::WindowTooShort(signal.len()));
    }
    if signal.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(WaveletError::NonFinite);
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(WaveletError::InvalidParams(format!("sample rate must be positive, got {sample_rate}")));
    }
    if let Some(&a) = grid.scales().iter().find(|&&a| a < 1.0) {
        return Err(WaveletError::DegenerateScale(a));
    }

    let n = signal.len();
    let rows = grid.count();
    let mut re = Grid::zeros(rows, n);
    let mut im = Grid::zeros(rows, n);
    let dt = 1.0 / sample_rate;

    let mut fft_cache = FftCache::new(signal);
    for (row, &a) in grid.scales().iter().enumerate() {
        let norm = (dt / a).sqrt();
        let coeffs = match method {
            CwtMethod::Direct => direct_row(signal, a, params),
            CwtMethod::Fft => fft_cache.row(a, params),
        };
        for (m, c) in coeffs.into_iter().enumerate() {
            re.set(row, m, norm * c.re);
            im.set(row, m, norm * c.im);
        }
    }

    let frequency_mode = FrequencyMode::default();
    let scalogram = Scalogram {
        power: Grid::zeros(rows, n),
        coeffs_real: re,
        coeffs_imag: im,
        frequency_map: grid
            .scales()
            .iter()
            .map(|&a| scale_to_frequency(a, sample_rate, params, frequency_mode))
            .collect(),
        scale_grid: grid.clone(),
        sample_rate,
        frequency_mode,
        params: *params,
    };
    Ok(scalogram_power(scalogram))
}

/// Σₙ x[n]·ψ*((n − m)/a) for every m, summed in ascending n.
fn direct_row(signal: &[Complex64], a: f64, params: &MorletParams) -> Vec<Complex64> {
    let n = signal.len() as isize;
    // conj ψ(k / a) for lags k = -(n-1) ..= n-1
    let kernel: Vec<Complex64> = (-(n - 1)..n).map(|k| morlet(k as f64 / a, params).conj()).collect();
    (0..n)
        .map(|m| {
            signal
                .iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (i, &x)| {
                    acc + x * kernel[(i as isize - m + n - 1) as usize]
                })
        })
        .collect()
}

struct FftCache<'a> {
    signal: &'a [Complex64],
    planner: FftPlanner<f64>,
    spectra: BTreeMap<usize, Vec<Complex64>>,
}

impl<'a> FftCache<'a> {
    fn new(signal: &'a [Complex64]) -> Self {
        Self { signal, planner: FftPlanner::new(), spectra: BTreeMap::new() }
    }

    fn row(&mut self, a: f64, params: &MorletParams) -> Vec<Complex64> {
        let n = self.signal.len();
        let half = ((KERNEL_HALF_WIDTH_SIGMAS * a).ceil() as usize).min(n - 1);
        let size = (n + 2 * half).next_power_of_two();

        let forward = self.planner.plan_fft_forward(size);
        let inverse = self.planner.plan_fft_inverse(size);

        let signal = self.signal;
        let spectrum = self.spectra.entry(size).or_insert_with(|| {
            let mut buf = vec![Complex64::new(0.0, 0.0); size];
            buf[..n].copy_from_slice(signal);
            forward.process(&mut buf);
            buf
        });

        // h[j] = conj ψ(-j / a) stored at offset j + half, so that
        // (x * h)[m + half] = Σₙ x[n]·conj ψ((n − m)/a)
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        for j in -(half as isize)..=half as isize {
            kernel[(j + half as isize) as usize] = morlet(-j as f64 / a, params).conj();
        }
        forward.process(&mut kernel);
        for (k, s) in kernel.iter_mut().zip(spectrum.iter()) {
            *k *= s;
        }
        inverse.process(&mut kernel);
        let scale = 1.0 / size as f64;
        kernel[half..half + n].iter().map(|z| z * scale).collect()
    }
}

/// Fills `power` with `re² + im²` of the stored coefficients.
pub fn scalogram_power(mut c: Scalogram) -> Scalogram {
    let data: Vec<f64> = c
        .coeffs_real
        .as_slice()
        .iter()
        .zip(c.coeffs_imag.as_slice())
        .map(|(re, im)| re * re + im * im)
        .collect();
    c.power = Grid::from_vec(c.coeffs_real.rows(), c.coeffs_real.cols(), data)
        .expect("coefficient grids share a shape");
    c
}

const DUMP_MAGIC: &[u8; 8] = b"ENVZSCL1";

/// Contents of a scalogram dump file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalogramDump {
    pub num_scales: u32,
    pub num_times: u32,
    pub sample_rate: f64,
    pub omega0: f64,
    pub scales: Vec<f64>,
    pub power: Vec<f32>,
}

/// Writes the power grid as a little-endian binary dump.
///
/// Layout: 8-byte magic `ENVZSCL1`, `u32` scale count, `u32` time count,
/// `f64` sample rate, `f64` ω₀, `f64` per scale, then `f32` power values
/// row-major (scale-major).
pub fn write_dump<W: Write>(s: &Scalogram, mut out: W) -> std::io::Result<()> {
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&(s.num_scales() as u32).to_le_bytes())?;
    out.write_all(&(s.num_times() as u32).to_le_bytes())?;
    out.write_all(&s.sample_rate.to_le_bytes())?;
    out.write_all(&s.params.omega0.to_le_bytes())?;
    for a in s.scale_grid.scales() {
        out.write_all(&a.to_le_bytes())?;
    }
    for &p in s.power.as_slice() {
        out.write_all(&(p as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dump<R: Read>(mut input: R) -> Result<ScalogramDump, WaveletError> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| WaveletError::MalformedDump(e.to_string()))?;
    let mut reader = ByteReader { bytes: &bytes, pos: 0 };
    if reader.take(8)? != DUMP_MAGIC {
        return Err(WaveletError::MalformedDump("bad magic".into()));
    }
    let num_scales = u32::from_le_bytes(reader.array()?);
    let num_times = u32::from_le_bytes(reader.array()?);
    let sample_rate = f64::from_le_bytes(reader.array()?);
    let omega0 = f64::from_le_bytes(reader.array()?);
    let scales = (0..num_scales)
        .map(|_| reader.array().map(f64::from_le_bytes))
        .collect::<Result<Vec<_>, _>>()?;
    let power = (0..num_scales as usize * num_times as usize)
        .map(|_| reader.array().map(f32::from_le_bytes))
        .collect::<Result<Vec<_>, _>>()?;
    if reader.pos != bytes.len() {
        return Err(WaveletError::MalformedDump("trailing bytes".into()));
    }
    Ok(ScalogramDump { num_scales, num_times, sample_rate, omega0, scales, power })
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl ByteReader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8], WaveletError> {
        let end = self.pos + len;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| WaveletError::MalformedDump("truncated".into()))?;
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], WaveletError> {
        Ok(self.take(N)?.try_into().expect("slice has length N"))
    }
}
