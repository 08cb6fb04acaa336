//! Batch runs behind the command-line tool.
//!
//! A run directory holds `images/` (PNG plus one JSON sidecar per image),
//! `manifest.jsonl`, `report.json` and `config.toml`, the resolved
//! [`RunConfig`] echoed by every command that writes into it.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    self, assemble_records, cap_per_class, emit_manifest, load_manifest, read_answers, split_dataset, AnalysisType,
    DatasetError, ImageEntry, Manifest, WindowMeta, DEFAULT_TRAIN_FRACTION,
};
use crate::fixtures::{self, GroundTruthAnomaly};
use crate::ingest::{self, IngestConfig, IngestError, Window};
use crate::metrics::{self, BleuConfig, MetricsError, Report, Tokenizer};
use crate::recurrence::{self, EmbeddingSpec, RecurrenceError, ThresholdPolicy};
use crate::render::{self, Provenance, RenderConfig, RenderError, SourceKind};
use crate::schedule::{self, ScheduleError, TrainingConstants};
use crate::wavelet::{self, CwtMethod, FrequencyMode, MorletParams, ScaleGrid, Spacing, WaveletError};

pub const IMAGES_DIR: &str = "images";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.toml";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no complete windows in the input")]
    NoWindows,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Recurrence(#[from] RecurrenceError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

impl PipelineError {
    /// 3 for filesystem failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. }
            | PipelineError::Ingest(IngestError::Io(_))
            | PipelineError::Dataset(DatasetError::Io(_))
            | PipelineError::Metrics(MetricsError::Io(_)) => EXIT_IO,
            _ => EXIT_DATA,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveletSettings {
    pub scale_count: usize,
    /// Smallest scale in samples; defaults to 4.
    pub min_scale: Option<f64>,
    /// Largest scale in samples; defaults to half the window.
    pub max_scale: Option<f64>,
    pub spacing: Spacing,
    pub morlet: MorletParams,
    pub method: CwtMethod,
    pub frequency_mode: FrequencyMode,
}

impl Default for WaveletSettings {
    fn default() -> Self {
        Self {
            scale_count: 64,
            min_scale: None,
            max_scale: None,
            spacing: Spacing::Log,
            morlet: MorletParams::default(),
            method: CwtMethod::default(),
            frequency_mode: FrequencyMode::default(),
        }
    }
}

impl WaveletSettings {
    pub fn grid_for(&self, len: usize) -> Result<ScaleGrid, WaveletError> {
        let default = ScaleGrid::default_for(len, self.scale_count)?;
        let min = self.min_scale.unwrap_or(default.scales()[0]);
        let max = self.max_scale.unwrap_or(*default.scales().last().expect("non-empty grid"));
        match self.spacing {
            Spacing::Log => ScaleGrid::log(min, max, self.scale_count),
            Spacing::Linear => ScaleGrid::linear(min, max, self.scale_count),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RecurrenceSettings {
    pub embedding: EmbeddingSpec,
    pub threshold: ThresholdPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSettings {
    pub split_seed: u64,
    pub train_fraction: f64,
    pub tasks: Vec<AnalysisType>,
    /// Maximum records kept per channel before splitting.
    pub per_class_cap: Option<usize>,
    /// Drop records without an answer instead of failing.
    pub skip_unanswered: bool,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        Self {
            split_seed: 42,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            tasks: AnalysisType::ALL.to_vec(),
            per_class_cap: None,
            skip_unanswered: false,
        }
    }
}

/// Everything a run depends on besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub encodings: Vec<SourceKind>,
    /// Also write raw scalogram / recurrence dumps next to the images.
    pub write_dumps: bool,
    pub ingest: IngestConfig,
    pub wavelet: WaveletSettings,
    pub recurrence: RecurrenceSettings,
    pub render: RenderConfig,
    pub dataset: DatasetSettings,
    pub training: TrainingConstants,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            encodings: vec![SourceKind::Cwt, SourceKind::Rp],
            write_dumps: false,
            ingest: IngestConfig::default(),
            wavelet: WaveletSettings::default(),
            recurrence: RecurrenceSettings::default(),
            render: RenderConfig::default(),
            dataset: DatasetSettings::default(),
            training: TrainingConstants::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::from_toml(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.encodings.is_empty() {
            return Err(PipelineError::Config("at least one encoding is required".into()));
        }
        if self.wavelet.scale_count < 2 {
            return Err(PipelineError::Config("scale_count must be at least 2".into()));
        }
        if self.dataset.tasks.is_empty() {
            return Err(PipelineError::Config("at least one task is required".into()));
        }
        self.wavelet.morlet.validate()?;
        self.render.validate()?;
        self.training.schedule.validate()?;
        Ok(())
    }

    /// Writes `config.toml` into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<(), PipelineError> {
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, self.to_toml()).map_err(io_err(&path))
    }
}

/// Metadata written next to every image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSidecar {
    /// Path relative to the run directory.
    pub image: String,
    pub channel: String,
    pub window_start: String,
    pub encoding: SourceKind,
    pub start_time: DateTime<Utc>,
    pub end_time: DateTime<Utc>,
    pub sample_period_secs: u64,
    pub samples: usize,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recurrence_rate: Option<f64>,
}

impl ImageSidecar {
    pub fn meta(&self) -> WindowMeta {
        WindowMeta { channel: self.channel.clone(), window_start: self.window_start.clone(), encoding: self.encoding }
    }

    /// Last covered instant is the final sample, not the window end.
    pub fn image_entry(&self) -> ImageEntry {
        let last = self.end_time - TimeDelta::seconds(self.sample_period_secs as i64);
        ImageEntry {
            image_path: self.image.clone(),
            meta: self.meta(),
            start_day: self.start_time.format("%Y-%m-%d").to_string(),
            end_day: last.format("%Y-%m-%d").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertSummary {
    pub windows: usize,
    /// Image paths relative to the run directory, in write order.
    pub images: Vec<String>,
}

fn encode_window(
    w: &Window,
    kind: SourceKind,
    cfg: &RunConfig,
    images_dir: &Path,
) -> Result<ImageSidecar, PipelineError> {
    let provenance = Provenance { kind, channel: w.parent_channel.clone(), window_start: w.start_stamp() };
    let file_name = provenance.file_name();
    let stem = file_name.trim_end_matches(".png").to_string();
    let mut scales = None;
    let mut epsilon = None;
    let mut recurrence_rate = None;
    let grid = match kind {
        SourceKind::Cwt => {
            let sg = cfg.wavelet.grid_for(w.len())?;
            let s = wavelet::cwt(w, &sg, &cfg.wavelet.morlet, cfg.wavelet.method)?;
            if cfg.write_dumps {
                let path = images_dir.join(format!("{stem}.scl"));
                let file = fs::File::create(&path).map_err(io_err(&path))?;
                wavelet::write_dump(&s, BufWriter::new(file)).map_err(io_err(&path))?;
            }
            scales = Some(sg.scales().to_vec());
            s.power
        }
        SourceKind::Rp => {
            let m = recurrence::recurrence_plot(w, &cfg.recurrence.embedding, cfg.recurrence.threshold)?;
            if cfg.write_dumps {
                let path = images_dir.join(format!("{stem}.rpm"));
                let file = fs::File::create(&path).map_err(io_err(&path))?;
                recurrence::write_dump(&m, BufWriter::new(file)).map_err(io_err(&path))?;
            }
            epsilon = Some(m.epsilon);
            recurrence_rate = Some(m.recurrence_rate);
            m.to_grid()
        }
    };
    let img = render::render(&grid, &cfg.render)?.with_provenance(provenance.clone());
    let png = render::encode_png(&img)?;
    let png_path = images_dir.join(&file_name);
    fs::write(&png_path, png).map_err(io_err(&png_path))?;

    let sidecar = ImageSidecar {
        image: format!("{IMAGES_DIR}/{file_name}"),
        channel: provenance.channel,
        window_start: provenance.window_start,
        encoding: kind,
        start_time: w.start_time,
        end_time: w.start_time + TimeDelta::seconds((w.len() as u64 * w.sample_period_secs) as i64),
        sample_period_secs: w.sample_period_secs,
        samples: w.len(),
        width: img.width,
        height: img.height,
        scales,
        epsilon,
        recurrence_rate,
    };
    let json_path = images_dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&json_path, json + "\n").map_err(io_err(&json_path))?;
    Ok(sidecar)
}

/// Encodes every window of `input` into `out_dir/images`.
///
/// Nothing is written unless the input yields at least one window.
pub fn convert(input: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<ConvertSummary, PipelineError> {
    cfg.validate()?;
    let file = fs::File::open(input).map_err(io_err(input))?;
    let windows = ingest::ingest_windows(file, &cfg.ingest)?;
    if windows.is_empty() {
        return Err(PipelineError::NoWindows);
    }
    let images_dir = out_dir.join(IMAGES_DIR);
    fs::create_dir_all(&images_dir).map_err(io_err(&images_dir))?;
    let mut images = Vec::new();
    for w in &windows {
        for &kind in &cfg.encodings {
            images.push(encode_window(w, kind, cfg, &images_dir)?.image);
        }
    }
    cfg.echo(out_dir)?;
    Ok(ConvertSummary { windows: windows.len(), images })
}

/// Reads every sidecar under `run_dir/images`, sorted by file name.
pub fn read_sidecars(run_dir: &Path) -> Result<Vec<ImageSidecar>, PipelineError> {
    let images_dir = run_dir.join(IMAGES_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&images_dir)
        .map_err(io_err(&images_dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_err(&images_dir))?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Image entries for the encodings selected in `cfg`.
pub fn image_entries(run_dir: &Path, cfg: &RunConfig) -> Result<Vec<ImageEntry>, PipelineError> {
    Ok(read_sidecars(run_dir)?
        .iter()
        .filter(|s| cfg.encodings.contains(&s.encoding))
        .map(ImageSidecar::image_entry)
        .collect())
}

/// Builds `run_dir/manifest.jsonl` from the converted images and an answers file.
pub fn build_dataset(run_dir: &Path, answers: &Path, cfg: &RunConfig) -> Result<Manifest, PipelineError> {
    cfg.validate()?;
    let images = image_entries(run_dir, cfg)?;
    let answers = read_answers(fs::File::open(answers).map_err(io_err(answers))?)?;
    let ds = &cfg.dataset;
    let mut records = assemble_records(&images, &ds.tasks, &answers, ds.skip_unanswered)?;
    if let Some(cap) = ds.per_class_cap {
        records = cap_per_class(records, cap);
    }
    let manifest = split_dataset(records, ds.split_seed, ds.train_fraction)?;
    emit_manifest(&manifest, &run_dir.join(MANIFEST_FILE))?;
    cfg.echo(run_dir)?;
    Ok(manifest)
}

/// Scores a generations file against a manifest and writes `report`.
pub fn evaluate(
    manifest: &Path,
    generations: &Path,
    report: &Path,
    tokenizer: &Tokenizer,
    bleu_cfg: &BleuConfig,
) -> Result<Report, PipelineError> {
    let gens = metrics::read_generations(fs::File::open(generations).map_err(io_err(generations))?)?;
    let manifest = load_manifest(manifest)?;
    let r = metrics::evaluate_manifest(&manifest, &gens, tokenizer, bleu_cfg)?;
    let json = serde_json::to_string_pretty(&r).expect("report serializes");
    fs::write(report, json + "\n").map_err(io_err(report))?;
    Ok(r)
}

/// Writes the learning-rate trace as `step,lr` CSV.
pub fn write_schedule(cfg: &RunConfig, out: &Path) -> Result<(), PipelineError> {
    cfg.training.schedule.validate()?;
    let file = fs::File::create(out).map_err(io_err(out))?;
    schedule::write_schedule_csv(&cfg.training.schedule, BufWriter::new(file))
        .map_err(|e| PipelineError::Io { path: out.to_path_buf(), source: std::io::Error::other(e.to_string()) })
}

/// Writes `corpus.csv` and `ground_truth.jsonl` for the seven-appliance
/// synthetic corpus into `out_dir`.
pub fn write_synthetic_corpus(
    out_dir: &Path,
    start: DateTime<Utc>,
    days: usize,
    seed: u64,
) -> Result<Vec<GroundTruthAnomaly>, PipelineError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let (series, truth): (Vec<_>, Vec<_>) = fixtures::office_corpus(start, days, seed).iter().map(fixtures::generate).unzip();
    let truth: Vec<GroundTruthAnomaly> = truth.into_iter().flatten().collect();
    let csv_path = out_dir.join("corpus.csv");
    ingest::write_csv(&series, fs::File::create(&csv_path).map_err(io_err(&csv_path))?)?;
    let gt_path = out_dir.join("ground_truth.jsonl");
    fixtures::write_ground_truth(&truth, fs::File::create(&gt_path).map_err(io_err(&gt_path))?)
        .map_err(io_err(&gt_path))?;
    Ok(truth)
}

/// Writes templated answers for every converted image to `out`.
pub fn write_synthetic_answers(
    run_dir: &Path,
    ground_truth: &Path,
    out: &Path,
    cfg: &RunConfig,
) -> Result<usize, PipelineError> {
    let truth = fixtures::read_ground_truth(fs::File::open(ground_truth).map_err(io_err(ground_truth))?)
        .map_err(io_err(ground_truth))?;
    let images = image_entries(run_dir, cfg)?;
    let answers =
        fixtures::synthetic_answers(&images, &truth, cfg.ingest.window_length_secs, &cfg.dataset.tasks);
    dataset::write_answers(&answers, fs::File::create(out).map_err(io_err(out))?)?;
    Ok(answers.len())
}
