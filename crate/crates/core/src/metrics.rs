//! Loss, perplexity, ROUGE-L and BLEU.
//!
//! Loss is the mean negative natural-log likelihood over answer tokens;
//! perplexity is its exponential. ROUGE-L is corpus-level LCS recall,
//! `Σ LCS(r, c) / Σ |r|`. BLEU is corpus-level with clipped n-gram precision
//! up to 4-grams, uniform weights and the usual brevity penalty; any zero
//! precision makes the score 0 unless add-one smoothing is requested.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AnalysisType, Manifest, Split};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no tokens in the {0:?} split")]
    EmptySplit(Split),
    #[error("log-probability {value} for {example_id:?} is positive")]
    InvalidLogprob { example_id: String, value: f64 },
    #[error("no generation for validation record {0:?}")]
    MissingGeneration(String),
    #[error("duplicate generation id {0:?}")]
    DuplicateGeneration(String),
    #[error("malformed generations line {line}: {reason}")]
    MalformedGenerations { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-token natural-log probabilities of one reference answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogRecord {
    pub example_id: String,
    pub token_logprobs: Vec<f64>,
    pub split: Split,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Negative mean log-probability over every token in `split`.
///
/// Records are summed in `example_id` order so the result does not depend on
/// the order they are passed in.
pub fn mean_nll(records: &[TokenLogRecord], split: Split) -> Result<f64, MetricsError> {
    let mut selected: Vec<&TokenLogRecord> = records.iter().filter(|r| r.split == split).collect();
    selected.sort_by(|a, b| a.example_id.cmp(&b.example_id));
    let mut sum = CompensatedSum::default();
    let mut count = 0usize;
    for r in selected {
        for &lp in &r.token_logprobs {
            if lp > 0.0 || lp.is_nan() {
                return Err(MetricsError::InvalidLogprob { example_id: r.example_id.clone(), value: lp });
            }
            sum.add(lp);
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::EmptySplit(split));
    }
    Ok(-sum.value() / count as f64)
}

pub fn perplexity(records: &[TokenLogRecord], split: Split) -> Result<f64, MetricsError> {
    mean_nll(records, split).map(f64::exp)
}

/// Lowercasing word tokenizer used for the text metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tokenizer {
    pub lowercase: bool,
    /// Emit punctuation characters as their own tokens instead of dropping them.
    pub keep_punctuation: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self { lowercase: true, keep_punctuation: false }
    }
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut current = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                if self.lowercase {
                    current.extend(ch.to_lowercase());
                } else {
                    current.push(ch);
                }
                continue;
            }
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if self.keep_punctuation && !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
        tokens
    }
}

/// A candidate and its references, already tokenized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPair {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl TextPair {
    pub fn new(candidate: Vec<String>, reference: Vec<String>) -> Self {
        Self { candidate, references: vec![reference] }
    }

    /// Whitespace-split convenience constructor.
    pub fn from_text(candidate: &str, reference: &str) -> Self {
        let split = |s: &str| s.split_whitespace().map(str::to_string).collect();
        Self::new(split(candidate), split(reference))
    }
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Corpus-level LCS recall. With several references the one with the
/// longest LCS is used (first on ties). Pairs without references are skipped.
pub fn rouge_l(pairs: &[TextPair]) -> f64 {
    let mut matched = 0usize;
    let mut total = 0usize;
    for p in pairs {
        let best = p
            .references
            .iter()
            .map(|r| (lcs_len(r, &p.candidate), r.len()))
            .fold(None, |best: Option<(usize, usize)>, cur| match best {
                Some(b) if b.0 >= cur.0 => Some(b),
                _ => Some(cur),
            });
        if let Some((lcs, len)) = best {
            matched += lcs;
            total += len;
        }
    }
    if total == 0 {
        0.0
    } else {
        matched as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BleuConfig {
    pub max_n: usize,
    /// Add one to numerator and denominator of every n-gram precision.
    pub add_one_smoothing: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self { max_n: 4, add_one_smoothing: false }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Corpus-level clipped n-gram matches and candidate n-gram total.
pub fn modified_precision(pairs: &[TextPair], n: usize) -> (usize, usize) {
    let mut matched = 0;
    let mut total = 0;
    for p in pairs {
        let cand = ngram_counts(&p.candidate, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in &p.references {
            for (gram, c) in ngram_counts(r, n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        for (gram, c) in cand {
            matched += c.min(max_ref.get(gram).copied().unwrap_or(0));
            total += c;
        }
    }
    (matched, total)
}

/// Sum over pairs of the reference length closest to the candidate length
/// (shorter reference on ties).
pub fn effective_reference_length(pairs: &[TextPair]) -> usize {
    pairs
        .iter()
        .filter_map(|p| {
            let c = p.candidate.len() as i64;
            p.references
                .iter()
                .map(|r| r.len() as i64)
                .min_by_key(|&r| ((r - c).abs(), r))
        })
        .sum::<i64>() as usize
}

pub fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len == 0 {
        0.0
    } else if candidate_len > reference_len {
        1.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

pub fn bleu(pairs: &[TextPair], cfg: &BleuConfig) -> f64 {
    if cfg.max_n == 0 {
        return 0.0;
    }
    let c: usize = pairs.iter().map(|p| p.candidate.len()).sum();
    let r = effective_reference_length(pairs);
    let bp = brevity_penalty(c, r);
    if bp == 0.0 {
        return 0.0;
    }
    let weight = 1.0 / cfg.max_n as f64;
    let mut log_sum = 0.0;
    for n in 1..=cfg.max_n {
        let (m, t) = modified_precision(pairs, n);
        let (m, t) = if cfg.add_one_smoothing { (m + 1, t + 1) } else { (m, t) };
        if m == 0 || t == 0 {
            return 0.0;
        }
        log_sum += weight * (m as f64 / t as f64).ln();
    }
    (bp * log_sum.exp()).clamp(0.0, 1.0)
}

/// One line of a generations file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
}

pub fn read_generations<R: Read>(input: R) -> Result<Vec<Generation>, MetricsError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let g: Generation = serde_json::from_str(&line)
            .map_err(|e| MetricsError::MalformedGenerations { line: idx + 1, reason: e.to_string() })?;
        out.push(g);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub count: usize,
    pub rouge_l: f64,
    pub bleu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_nll: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub split: Split,
    pub overall: MetricSet,
    pub per_task: BTreeMap<AnalysisType, MetricSet>,
}

impl Report {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(out, "{:<18} {:>6} {:>9} {:>9} {:>9}", "task", "n", "PPL", "ROUGE-L", "BLEU");
        let mut row = |name: &str, m: &MetricSet| {
            let _ = writeln!(
                out,
                "{:<18} {:>6} {:>9} {:>9.4} {:>9.4}",
                name,
                m.count,
                fmt_opt(m.perplexity),
                m.rouge_l,
                m.bleu
            );
        };
        for (t, m) in &self.per_task {
            row(t.name(), m);
        }
        row("overall", &self.overall);
        out
    }
}

struct Scored {
    task: AnalysisType,
    pair: TextPair,
    log: Option<TokenLogRecord>,
}

fn metric_set(items: &[&Scored], bleu_cfg: &BleuConfig) -> Result<MetricSet, MetricsError> {
    let pairs: Vec<TextPair> = items.iter().map(|s| s.pair.clone()).collect();
    let logs: Option<Vec<TokenLogRecord>> = items.iter().map(|s| s.log.clone()).collect();
    let mean = match logs {
        Some(logs) if logs.iter().any(|l| !l.token_logprobs.is_empty()) => Some(mean_nll(&logs, Split::Val)?),
        _ => None,
    };
    Ok(MetricSet {
        count: items.len(),
        rouge_l: rouge_l(&pairs),
        bleu: bleu(&pairs, bleu_cfg),
        mean_nll: mean,
        perplexity: mean.map(f64::exp),
    })
}

/// Scores generations against the validation records of a manifest.
///
/// Perplexity is reported for a group only when every generation in it
/// carries token log-probabilities. The report does not depend on the
/// order of `generations`.
pub fn evaluate_manifest(
    manifest: &Manifest,
    generations: &[Generation],
    tokenizer: &Tokenizer,
    bleu_cfg: &BleuConfig,
) -> Result<Report, MetricsError> {
    let mut by_id: HashMap<&str, &Generation> = HashMap::new();
    for g in generations {
        if by_id.insert(g.id.as_str(), g).is_some() {
            return Err(MetricsError::DuplicateGeneration(g.id.clone()));
        }
    }
    let mut val: Vec<_> = manifest.split(Split::Val).collect();
    if val.is_empty() {
        return Err(MetricsError::EmptySplit(Split::Val));
    }
    val.sort_by(|a, b| a.id.cmp(&b.id));

    let mut scored = Vec::with_capacity(val.len());
    for rec in val {
        let g = by_id.get(rec.id.as_str()).ok_or_else(|| MetricsError::MissingGeneration(rec.id.clone()))?;
        scored.push(Scored {
            task: rec.analysis_type,
            pair: TextPair::new(tokenizer.tokenize(&g.text), tokenizer.tokenize(&rec.answer)),
            log: g.token_logprobs.as_ref().map(|lp| TokenLogRecord {
                example_id: rec.id.clone(),
                token_logprobs: lp.clone(),
                split: Split::Val,
            }),
        });
    }

    let all: Vec<&Scored> = scored.iter().collect();
    let mut per_task = BTreeMap::new();
    for t in AnalysisType::ALL {
        let group: Vec<&Scored> = scored.iter().filter(|s| s.task == t).collect();
        if !group.is_empty() {
            per_task.insert(t, metric_set(&group, bleu_cfg)?);
        }
    }
    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        split: Split::Val,
        overall: metric_set(&all, bleu_cfg)?,
        per_task,
    })
}
