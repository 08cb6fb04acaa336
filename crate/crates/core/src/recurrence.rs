//! Recurrence plots: `R[i][j] = 1` iff `‖sᵢ − sⱼ‖ ≤ ε` over delay-embedded states.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::ingest::Window;

#[derive(Debug, Error, PartialEq)]
pub enum RecurrenceError {
    #[error("embedding needs {needed} samples but the window has {available}")]
    EmbeddingTooLong { needed: usize, available: usize },
    #[error("embedding dimension and delay must be at least 1")]
    InvalidEmbedding,
    #[error("degenerate threshold: {0}")]
    DegenerateThreshold(String),
    #[error("need at least 2 state vectors, got {0}")]
    TooFewStates(usize),
    #[error("state vectors have inconsistent dimensions")]
    RaggedStates,
    #[error("malformed recurrence dump: {0}")]
    MalformedDump(String),
}

/// Delay embedding `(x[k], x[k+τ], …, x[k+(m−1)τ])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSpec {
    pub dimension: usize,
    pub delay: usize,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        Self { dimension: 1, delay: 1 }
    }
}

impl EmbeddingSpec {
    /// Samples spanned by one state vector.
    pub fn span(&self) -> usize {
        (self.dimension - 1) * self.delay + 1
    }
}

/// How ε is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// A fixed distance threshold.
    Fixed(f64),
    /// The smallest pairwise distance whose recurrence rate reaches the target.
    TargetRate(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::TargetRate(0.10)
    }
}

pub fn embed(samples: &[f64], spec: &EmbeddingSpec) -> Result<Vec<Vec<f64>>, RecurrenceError> {
    if spec.dimension == 0 || spec.delay == 0 {
        return Err(RecurrenceError::InvalidEmbedding);
    }
    let span = spec.span();
    if span > samples.len() {
        return Err(RecurrenceError::EmbeddingTooLong { needed: span, available: samples.len() });
    }
    Ok((0..=samples.len() - span)
        .map(|k| (0..spec.dimension).map(|d| samples[k + d * spec.delay]).collect())
        .collect())
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_states(states: &[Vec<f64>]) -> Result<(), RecurrenceError> {
    if states.len() < 2 {
        return Err(RecurrenceError::TooFewStates(states.len()));
    }
    let dim = states[0].len();
    if states.iter().any(|s| s.len() != dim) {
        return Err(RecurrenceError::RaggedStates);
    }
    Ok(())
}

/// Distances over all pairs `i < j`, unordered.
fn pair_distances(states: &[Vec<f64>]) -> Vec<f64> {
    let n = states.len();
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(distance(&states[i], &states[j]));
        }
    }
    d
}

fn rate_for(n: usize, off_diagonal_pairs: usize) -> f64 {
    (n + 2 * off_diagonal_pairs) as f64 / (n * n) as f64
}

/// Smallest ε in the pairwise-distance set (including 0 for the diagonal)
/// whose recurrence rate is at least `target_rate`.
pub fn solve_epsilon(states: &[Vec<f64>], target_rate: f64) -> Result<f64, RecurrenceError> {
    check_states(states)?;
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(RecurrenceError::DegenerateThreshold(format!(
            "target rate must lie in (0, 1), got {target_rate}"
        )));
    }
    let n = states.len();
    let mut distances = pair_distances(states);
    // smallest count of off-diagonal pairs k with rate_for(n, k) >= target
    let needed = ((target_rate * (n * n) as f64 - n as f64) / 2.0).ceil().max(0.0) as usize;
    let mut k = needed.min(distances.len());
    while k > 0 && rate_for(n, k - 1) >= target_rate {
        k -= 1;
    }
    while k < distances.len() && rate_for(n, k) < target_rate {
        k += 1;
    }
    if k == 0 {
        return Ok(0.0);
    }
    // k-th smallest distance
    Ok(*distances.select_nth_unstable_by(k - 1, f64::total_cmp).1)
}

/// Binary recurrence matrix with the threshold that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceMatrix {
    n: usize,
    bits: Vec<bool>,
    pub epsilon: f64,
    pub recurrence_rate: f64,
    pub embedding: EmbeddingSpec,
}

impl RecurrenceMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_grid(&self) -> Grid {
        let data = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Grid::from_vec(self.n, self.n, data).expect("square matrix")
    }
}

pub fn recurrence_matrix(
    states: &[Vec<f64>],
    threshold: ThresholdPolicy,
) -> Result<RecurrenceMatrix, RecurrenceError> {
    check_states(states)?;
    let epsilon = match threshold {
        ThresholdPolicy::Fixed(eps) if eps >= 0.0 && eps.is_finite() => eps,
        ThresholdPolicy::Fixed(eps) => {
            return Err(RecurrenceError::DegenerateThreshold(format!("epsilon must be >= 0, got {eps}")))
        }
        ThresholdPolicy::TargetRate(rate) => solve_epsilon(states, rate)?,
    };
    let n = states.len();
    let mut bits = vec![false; n * n];
    for i in 0..n {
        bits[i * n + i] = true;
        for j in i + 1..n {
            let hit = distance(&states[i], &states[j]) <= epsilon;
            bits[i * n + j] = hit;
            bits[j * n + i] = hit;
        }
    }
    let ones = bits.iter().filter(|&&b| b).count();
    Ok(RecurrenceMatrix {
        n,
        bits,
        epsilon,
        recurrence_rate: ones as f64 / (n * n) as f64,
        embedding: EmbeddingSpec::default(),
    })
}

/// Embeds a window and thresholds it.
pub fn recurrence_plot(
    w: &Window,
    embedding: &EmbeddingSpec,
    threshold: ThresholdPolicy,
) -> Result<RecurrenceMatrix, RecurrenceError> {
    let states = embed(&w.samples, embedding)?;
    let mut m = recurrence_matrix(&states, threshold)?;
    m.embedding = *embedding;
    Ok(m)
}

const DUMP_MAGIC: &[u8; 8] = b"ENVZRPM1";

/// Writes a run-length-encoded bitmap.
///
/// Layout (little-endian): magic `ENVZRPM1`, `u32` N, `f64` ε, `f64` rate,
/// `u32` embedding dimension, `u32` delay, `u32` run count, then `u32` run
/// lengths over the row-major bits, alternating 0-runs and 1-runs and
/// starting with a (possibly empty) 0-run.
pub fn write_dump<W: Write>(m: &RecurrenceMatrix, mut out: W) -> std::io::Result<()> {
    let mut runs: Vec<u32> = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for &b in &m.bits {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&(m.n as u32).to_le_bytes())?;
    out.write_all(&m.epsilon.to_le_bytes())?;
    out.write_all(&m.recurrence_rate.to_le_bytes())?;
    out.write_all(&(m.embedding.dimension as u32).to_le_bytes())?;
    out.write_all(&(m.embedding.delay as u32).to_le_bytes())?;
    out.write_all(&(runs.len() as u32).to_le_bytes())?;
    for r in runs {
        out.write_all(&r.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dump<R: Read>(mut input: R) -> Result<RecurrenceMatrix, RecurrenceError> {
    let bad = |msg: &str| RecurrenceError::MalformedDump(msg.to_string());
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| bad(&e.to_string()))?;
    if bytes.len() < 40 || &bytes[..8] != DUMP_MAGIC {
        return Err(bad("bad header"));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let f64_at = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let n = u32_at(8) as usize;
    let epsilon = f64_at(12);
    let recurrence_rate = f64_at(20);
    let embedding = EmbeddingSpec { dimension: u32_at(28) as usize, delay: u32_at(32) as usize };
    let run_count = u32_at(36) as usize;
    if bytes.len() != 40 + 4 * run_count {
        return Err(bad("run table length mismatch"));
    }
    let mut bits = Vec::with_capacity(n * n);
    for r in 0..run_count {
        let len = u32_at(40 + 4 * r) as usize;
        bits.extend(std::iter::repeat_n(r % 2 == 1, len));
    }
    if bits.len() != n * n {
        return Err(bad("runs do not cover N×N cells"));
    }
    Ok(RecurrenceMatrix { n, bits, epsilon, recurrence_rate, embedding })
}
