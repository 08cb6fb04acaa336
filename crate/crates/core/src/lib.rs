//! Visual encodings of building-energy time series for vision-language models.
//!
//! The crate turns raw appliance/weather CSV streams into the two image
//! encodings used for fine-tuning (complex-Morlet CWT scalograms and
//! recurrence plots), renders them into deterministic PNG rasters, assembles
//! instruction-tuning manifests around them, and provides the training
//! schedule arithmetic and text-generation metrics used to evaluate the
//! resulting models.
//!
//! Module map:
//!
//! - [`ingest`]: CSV parsing, gap filling, windowing, min-max normalization
//! - [`wavelet`]: Morlet wavelet, CWT (FFT and direct quadrature), scalograms
//! - [`recurrence`]: delay embedding and thresholded recurrence matrices
//! - [`render`]: heatmap and 3D surface rasters, PNG encoding
//! - [`dataset`]: prompt template, stratified 75/25 split, JSONL manifests
//! - [`metrics`]: loss, perplexity, ROUGE-L, BLEU and manifest evaluation
//! - [`schedule`]: warmup + cosine learning rate, accumulation, cross-entropy
//! - [`fixtures`]: synthetic appliance signals with injected anomalies
//! - [`pipeline`]: the `convert` / `build-dataset` / `eval` / `schedule` runs
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod dataset;
pub mod fixtures;
pub mod grid;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod recurrence;
pub mod render;
pub mod schedule;
pub mod wavelet;

pub use grid::Grid;
pub use dataset::{AnalysisType, DatasetRecord, Manifest, Split};
pub use ingest::{TimeSeries, Unit, Window};
pub use recurrence::{EmbeddingSpec, RecurrenceMatrix, ThresholdPolicy};
pub use render::{Colormap, RenderConfig, RenderedImage};
pub use schedule::{AccumulationConfig, ScheduleConfig};
pub use wavelet::{MorletParams, ScaleGrid, Scalogram};
