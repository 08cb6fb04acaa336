//! Instruction-tuning records and JSONL manifests.
//!
//! Every record pairs a rendered image with a task token and a question. The
//! text fed to the decoder is `<TASK> Query: {question}`, followed by the
//! image. Records are split 75/25 into train and validation sets by a seeded,
//! stratified shuffle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::SourceKind;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.75;
pub const QUERY_PREFIX: &str = "Query: ";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least 4 records to split, got {0}")]
    TooFewRecords(usize),
    #[error("missing image {0}")]
    MissingImage(PathBuf),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("malformed prompt {0:?}")]
    MalformedPrompt(String),
    #[error("unknown analysis type {0:?}")]
    UnknownAnalysisType(String),
    #[error("malformed manifest line {line}: {reason}")]
    MalformedManifest { line: usize, reason: String },
    #[error("unsupported manifest schema version {0}")]
    SchemaVersion(u32),
    #[error("no answer for records: {}", .0.join(", "))]
    MissingAnswers(Vec<String>),
    #[error("invalid dataset configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Task token conditioning the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnalysisType {
    Monitoring,
    AnomalyDetection,
    Recommendation,
}

impl AnalysisType {
    pub const ALL: [AnalysisType; 3] =
        [AnalysisType::Monitoring, AnalysisType::AnomalyDetection, AnalysisType::Recommendation];

    pub fn name(self) -> &'static str {
        match self {
            AnalysisType::Monitoring => "Monitoring",
            AnalysisType::AnomalyDetection => "AnomalyDetection",
            AnalysisType::Recommendation => "Recommendation",
        }
    }

    /// `<Monitoring>` etc.
    pub fn token(self) -> String {
        format!("<{}>", self.name())
    }

    pub fn slug(self) -> &'static str {
        match self {
            AnalysisType::Monitoring => "monitoring",
            AnalysisType::AnomalyDetection => "anomaly_detection",
            AnalysisType::Recommendation => "recommendation",
        }
    }
}

impl fmt::Display for AnalysisType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnalysisType {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnalysisType::ALL
            .into_iter()
            .find(|t| t.name() == s || t.slug() == s)
            .ok_or_else(|| DatasetError::UnknownAnalysisType(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Val,
}

/// Which window an image was rendered from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowMeta {
    pub channel: String,
    pub window_start: String,
    pub encoding: SourceKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    /// Image path relative to the manifest's directory, `/`-separated.
    pub image_path: String,
    pub analysis_type: AnalysisType,
    pub question: String,
    pub answer: String,
    pub split: Split,
    pub window_meta: WindowMeta,
}

impl DatasetRecord {
    pub fn prompt(&self) -> String {
        build_prompt(self)
    }
}

/// Stable id for the record asking `analysis_type` about one image.
pub fn record_id(meta: &WindowMeta, analysis_type: AnalysisType) -> String {
    format!("{}_{}_{}_{}", meta.channel, meta.window_start, meta.encoding, analysis_type.slug())
}

pub fn prompt_for(analysis_type: AnalysisType, question: &str) -> String {
    format!("{} {QUERY_PREFIX}{question}", analysis_type.token())
}

pub fn build_prompt(rec: &DatasetRecord) -> String {
    prompt_for(rec.analysis_type, &rec.question)
}

/// Inverse of [`build_prompt`].
pub fn parse_prompt(prompt: &str) -> Result<(AnalysisType, String), DatasetError> {
    let malformed = || DatasetError::MalformedPrompt(prompt.to_string());
    let rest = prompt.strip_prefix('<').ok_or_else(malformed)?;
    let (name, rest) = rest.split_once('>').ok_or_else(malformed)?;
    let analysis_type = name.parse::<AnalysisType>().map_err(|_| malformed())?;
    if name != analysis_type.name() {
        return Err(malformed());
    }
    let question = rest
        .strip_prefix(' ')
        .and_then(|r| r.strip_prefix(QUERY_PREFIX))
        .ok_or_else(malformed)?;
    Ok((analysis_type, question.to_string()))
}

/// Default natural-language question for a window.
pub fn default_question(analysis_type: AnalysisType, channel: &str, start_day: &str, end_day: &str) -> String {
    match analysis_type {
        AnalysisType::Monitoring => {
            format!("Describe the consumption pattern of the {channel} between {start_day} and {end_day}")
        }
        AnalysisType::AnomalyDetection => format!("Identify anomalies between {start_day} and {end_day}"),
        AnalysisType::Recommendation => {
            format!("Recommend energy-saving actions for the {channel} based on usage between {start_day} and {end_day}")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<DatasetRecord>,
    pub split_seed: u64,
}

impl Manifest {
    /// `(train, val)` record counts.
    pub fn counts(&self) -> (usize, usize) {
        let val = self.records.iter().filter(|r| r.split == Split::Val).count();
        (self.records.len() - val, val)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

fn validation_count(n: usize, train_fraction: f64) -> usize {
    ((n as f64) * (1.0 - train_fraction) + 1e-9).floor() as usize
}

/// Assigns train/val splits by a seeded shuffle stratified on analysis type.
///
/// The validation count is `floor(n · (1 − train_fraction))`; it is shared
/// out across analysis types proportionally, remainders going to the
/// largest fractional shares. Records are ordered by id before shuffling, so
/// the result depends only on the record set and the seed.
pub fn split_dataset(
    mut records: Vec<DatasetRecord>,
    seed: u64,
    train_fraction: f64,
) -> Result<Manifest, DatasetError> {
    if records.len() < 4 {
        return Err(DatasetError::TooFewRecords(records.len()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(pair) = records.windows(2).find(|p| p[0].id == p[1].id) {
        return Err(DatasetError::DuplicateId(pair[0].id.clone()));
    }

    let n = records.len();
    let n_val = validation_count(n, train_fraction);
    let mut strata: BTreeMap<AnalysisType, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        strata.entry(r.analysis_type).or_default().push(i);
    }

    let mut quotas: Vec<(AnalysisType, usize, usize)> = strata
        .iter()
        .map(|(&t, members)| (t, n_val * members.len() / n, n_val * members.len() % n))
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.cmp(&quotas[a].2).then(a.cmp(&b)));
    for &k in order.iter().take(n_val - assigned) {
        quotas[k].1 += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (t, quota, _) in quotas {
        let members = strata.get_mut(&t).expect("stratum exists");
        members.shuffle(&mut rng);
        for (rank, &i) in members.iter().enumerate() {
            records[i].split = if rank < quota { Split::Val } else { Split::Train };
        }
    }
    Ok(Manifest { records, split_seed: seed })
}

/// Keeps at most `cap` records per channel, lowest ids first.
pub fn cap_per_class(mut records: Vec<DatasetRecord>, cap: usize) -> Vec<DatasetRecord> {
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    records.retain(|r| {
        let count = seen.entry(r.window_meta.channel.clone()).or_default();
        *count += 1;
        *count <= cap
    });
    records
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestLine {
    schema_version: u32,
    id: String,
    image: String,
    analysis_type: AnalysisType,
    question: String,
    answer: String,
    split: Split,
    split_seed: u64,
    meta: WindowMeta,
}

/// Checks that every image exists under `base_dir`.
pub fn check_images(m: &Manifest, base_dir: &Path) -> Result<(), DatasetError> {
    for r in &m.records {
        let path = base_dir.join(&r.image_path);
        if !path.is_file() {
            return Err(DatasetError::MissingImage(path));
        }
    }
    Ok(())
}

/// Serializes a manifest as JSONL, one record per line in id order.
pub fn write_manifest<W: Write>(m: &Manifest, out: W) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(out);
    let mut records: Vec<&DatasetRecord> = m.records.iter().collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    for r in records {
        let line = ManifestLine {
            schema_version: MANIFEST_SCHEMA_VERSION,
            id: r.id.clone(),
            image: r.image_path.clone(),
            analysis_type: r.analysis_type,
            question: r.question.clone(),
            answer: r.answer.clone(),
            split: r.split,
            split_seed: m.split_seed,
            meta: r.window_meta.clone(),
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the manifest to `path`, requiring every image to exist relative to
/// the manifest's directory.
pub fn emit_manifest(m: &Manifest, path: &Path) -> Result<(), DatasetError> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    check_images(m, base)?;
    let mut bytes = Vec::new();
    write_manifest(m, &mut bytes)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_manifest<R: Read>(input: R) -> Result<Manifest, DatasetError> {
    let mut records = Vec::new();
    let mut seed = None;
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ManifestLine = serde_json::from_str(&line)
            .map_err(|e| DatasetError::MalformedManifest { line: idx + 1, reason: e.to_string() })?;
        if parsed.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(DatasetError::SchemaVersion(parsed.schema_version));
        }
        if *seed.get_or_insert(parsed.split_seed) != parsed.split_seed {
            return Err(DatasetError::MalformedManifest {
                line: idx + 1,
                reason: "split_seed differs from earlier lines".into(),
            });
        }
        records.push(DatasetRecord {
            id: parsed.id,
            image_path: parsed.image,
            analysis_type: parsed.analysis_type,
            question: parsed.question,
            answer: parsed.answer,
            split: parsed.split,
            window_meta: parsed.meta,
        });
    }
    Ok(Manifest { records, split_seed: seed.unwrap_or(0) })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    read_manifest(fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerLine {
    pub id: String,
    pub answer: String,
}

/// Reads an answers file (`{"id": …, "answer": …}` per line).
pub fn read_answers<R: Read>(input: R) -> Result<BTreeMap<String, String>, DatasetError> {
    let mut out = BTreeMap::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let a: AnswerLine = serde_json::from_str(&line)
            .map_err(|e| DatasetError::MalformedManifest { line: idx + 1, reason: e.to_string() })?;
        if out.insert(a.id.clone(), a.answer).is_some() {
            return Err(DatasetError::DuplicateId(a.id));
        }
    }
    Ok(out)
}

pub fn write_answers<W: Write>(answers: &BTreeMap<String, String>, out: W) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(out);
    for (id, answer) in answers {
        serde_json::to_writer(&mut out, &AnswerLine { id: id.clone(), answer: answer.clone() })
            .map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Image available for record construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageEntry {
    pub image_path: String,
    pub meta: WindowMeta,
    /// Calendar days covered, `YYYY-MM-DD`, used in questions.
    pub start_day: String,
    pub end_day: String,
}

/// Builds one record per (image, task) and attaches answers.
///
/// Records whose id has no answer are reported together in
/// [`DatasetError::MissingAnswers`] unless `skip_unanswered` is set.
pub fn assemble_records(
    images: &[ImageEntry],
    tasks: &[AnalysisType],
    answers: &BTreeMap<String, String>,
    skip_unanswered: bool,
) -> Result<Vec<DatasetRecord>, DatasetError> {
    let tasks: BTreeSet<AnalysisType> = tasks.iter().copied().collect();
    let mut records = Vec::new();
    let mut missing = Vec::new();
    for image in images {
        for &t in &tasks {
            let id = record_id(&image.meta, t);
            match answers.get(&id) {
                Some(answer) => records.push(DatasetRecord {
                    question: default_question(t, &image.meta.channel, &image.start_day, &image.end_day),
                    id,
                    image_path: image.image_path.clone(),
                    analysis_type: t,
                    answer: answer.clone(),
                    split: Split::Train,
                    window_meta: image.meta.clone(),
                }),
                None if skip_unanswered => {}
                None => missing.push(id),
            }
        }
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(DatasetError::MissingAnswers(missing));
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(records)
}
