//! Learning-rate schedule, gradient accumulation and the token cross-entropy.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::CompensatedSum;

pub const PEAK_LEARNING_RATE: f64 = 1e-4;
pub const WARMUP_STEPS: u32 = 50;
pub const MAX_STEPS: u32 = 800;
pub const MICRO_BATCH: u32 = 6;
pub const ACCUMULATION_STEPS: u32 = 8;
pub const WEIGHT_DECAY: f64 = 0.01;
pub const BEAM_WIDTH: u32 = 3;
pub const MAX_NEW_TOKENS: u32 = 1024;
pub const LOG_EVERY_STEPS: u32 = 25;

/// Tolerance on each probability row summing to one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("step {step} is outside [0, {max}]")]
    StepOutOfRange { step: u32, max: u32 },
    #[error("invalid schedule: {0}")]
    InvalidConfig(String),
    #[error("probabilities at example {example}, position {position} sum to {sum}")]
    NonNormalizedDistribution { example: usize, position: usize, sum: f64 },
    #[error("probability grid shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub eta_max: f64,
    pub eta_min: f64,
    /// Rate at step 0; warmup rises linearly from here to `eta_max`.
    pub warmup_floor: f64,
    pub t_warm: u32,
    pub t_max: u32,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { eta_max: PEAK_LEARNING_RATE, eta_min: 0.0, warmup_floor: 0.0, t_warm: WARMUP_STEPS, t_max: MAX_STEPS }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(0.0 <= self.eta_min && self.eta_min <= self.eta_max && self.eta_max.is_finite()) {
            return Err(ScheduleError::InvalidConfig(format!(
                "need 0 <= eta_min <= eta_max, got {} and {}",
                self.eta_min, self.eta_max
            )));
        }
        if !(0.0 <= self.warmup_floor && self.warmup_floor <= self.eta_max) {
            return Err(ScheduleError::InvalidConfig(format!("warmup floor {} out of range", self.warmup_floor)));
        }
        if !(0 < self.t_warm && self.t_warm < self.t_max) {
            return Err(ScheduleError::InvalidConfig(format!(
                "need 0 < t_warm < t_max, got {} and {}",
                self.t_warm, self.t_max
            )));
        }
        Ok(())
    }
}

/// Linear warmup to `eta_max` over `t_warm` steps, then cosine decay to
/// `eta_min` at `t_max`.
pub fn lr_at(t: u32, cfg: &ScheduleConfig) -> Result<f64, ScheduleError> {
    if t > cfg.t_max {
        cfg.validate()?;
        return Err(ScheduleError::StepOutOfRange { step: t, max: cfg.t_max });
    }
    lr_at_continuous(t as f64, cfg)
}

/// The same schedule at a fractional step in `[0, t_max]`.
pub fn lr_at_continuous(t: f64, cfg: &ScheduleConfig) -> Result<f64, ScheduleError> {
    cfg.validate()?;
    let (t_warm, t_max) = (cfg.t_warm as f64, cfg.t_max as f64);
    if !(0.0..=t_max).contains(&t) {
        return Err(ScheduleError::InvalidConfig(format!("step {t} outside [0, {t_max}]")));
    }
    if t < t_warm {
        return Ok(cfg.warmup_floor + (cfg.eta_max - cfg.warmup_floor) * (t / t_warm));
    }
    let progress = (t - t_warm) / (t_max - t_warm);
    Ok(cfg.eta_min + 0.5 * (cfg.eta_max - cfg.eta_min) * (1.0 + (progress * PI).cos()))
}

/// `(step, lr)` for every step in `0..=t_max`.
pub fn schedule_trace(cfg: &ScheduleConfig) -> Result<Vec<(u32, f64)>, ScheduleError> {
    (0..=cfg.t_max).map(|t| lr_at(t, cfg).map(|lr| (t, lr))).collect()
}

/// Writes the trace as `step,lr` CSV with shortest round-trip floats.
pub fn write_schedule_csv<W: Write>(cfg: &ScheduleConfig, mut out: W) -> Result<(), Box<dyn std::error::Error>> {
    writeln!(out, "step,lr")?;
    for (t, lr) in schedule_trace(cfg)? {
        writeln!(out, "{t},{lr:?}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccumulationConfig {
    pub micro_batch: u32,
    pub accumulation_steps: u32,
}

impl Default for AccumulationConfig {
    fn default() -> Self {
        Self { micro_batch: MICRO_BATCH, accumulation_steps: ACCUMULATION_STEPS }
    }
}

/// `Γ × B`.
pub fn effective_batch(cfg: &AccumulationConfig) -> u32 {
    cfg.accumulation_steps * cfg.micro_batch
}

/// Dense `N × T × V` probability grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityGrid {
    examples: usize,
    positions: usize,
    vocab: usize,
    data: Vec<f64>,
}

impl ProbabilityGrid {
    pub fn new(examples: usize, positions: usize, vocab: usize, data: Vec<f64>) -> Result<Self, ScheduleError> {
        if examples == 0 || positions == 0 || vocab == 0 {
            return Err(ScheduleError::Shape("all dimensions must be at least 1".into()));
        }
        if data.len() != examples * positions * vocab {
            return Err(ScheduleError::Shape(format!(
                "expected {} values, got {}",
                examples * positions * vocab,
                data.len()
            )));
        }
        Ok(Self { examples, positions, vocab, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.examples, self.positions, self.vocab)
    }

    pub fn distribution(&self, example: usize, position: usize) -> &[f64] {
        let start = (example * self.positions + position) * self.vocab;
        &self.data[start..start + self.vocab]
    }
}

/// `−(1/(N·T)) Σᵢ Σⱼ ln P(targetᵢⱼ)`, natural log.
///
/// `targets[i][j]` is the vocabulary index of the reference token.
pub fn cross_entropy(probs: &ProbabilityGrid, targets: &[Vec<usize>]) -> Result<f64, ScheduleError> {
    let (n, t, v) = probs.dims();
    if targets.len() != n || targets.iter().any(|row| row.len() != t) {
        return Err(ScheduleError::Shape(format!("targets must be {n}×{t}")));
    }
    let mut sum = CompensatedSum::default();
    for (i, row) in targets.iter().enumerate() {
        for (j, &target) in row.iter().enumerate() {
            let dist = probs.distribution(i, j);
            let total: f64 = dist.iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOLERANCE || dist.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(ScheduleError::NonNormalizedDistribution { example: i, position: j, sum: total });
            }
            if target >= v {
                return Err(ScheduleError::Shape(format!("target {target} outside vocabulary of {v}")));
            }
            sum.add(dist[target].ln());
        }
    }
    Ok(-sum.value() / (n * t) as f64)
}

/// Training constants handed to the fine-tuning harness alongside a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConstants {
    pub schedule: ScheduleConfig,
    pub accumulation: AccumulationConfig,
    pub weight_decay: f64,
    pub beam_width: u32,
    pub max_new_tokens: u32,
    pub log_every_steps: u32,
    /// Parameter groups kept frozen during fine-tuning.
    pub frozen: Vec<String>,
    /// Parameter groups updated during fine-tuning.
    pub trainable: Vec<String>,
}

impl Default for TrainingConstants {
    fn default() -> Self {
        Self {
            schedule: ScheduleConfig::default(),
            accumulation: AccumulationConfig::default(),
            weight_decay: WEIGHT_DECAY,
            beam_width: BEAM_WIDTH,
            max_new_tokens: MAX_NEW_TOKENS,
            log_every_steps: LOG_EVERY_STEPS,
            frozen: vec!["vision_encoder".into()],
            trainable: vec!["language_decoder".into(), "cross_attention".into()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_landmarks() {
        let cfg = ScheduleConfig { eta_min: 1e-6, ..ScheduleConfig::default() };
        assert_eq!(lr_at(0, &cfg).unwrap(), 0.0);
        assert_eq!(lr_at(50, &cfg).unwrap(), 1e-4);
        assert_eq!(lr_at(800, &cfg).unwrap(), 1e-6);
        let mid = lr_at(425, &cfg).unwrap();
        assert!((mid - (1e-4 + 1e-6) / 2.0).abs() < 1e-18);
        assert_eq!(lr_at(801, &cfg).unwrap_err(), ScheduleError::StepOutOfRange { step: 801, max: 800 });
    }

    #[test]
    fn warmup_floor() {
        let cfg = ScheduleConfig { warmup_floor: 1e-5, ..ScheduleConfig::default() };
        assert_eq!(lr_at(0, &cfg).unwrap(), 1e-5);
        assert!(lr_at(49, &cfg).unwrap() < 1e-4);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            ScheduleConfig { t_warm: 0, ..ScheduleConfig::default() },
            ScheduleConfig { t_warm: 800, ..ScheduleConfig::default() },
            ScheduleConfig { eta_min: 1.0, ..ScheduleConfig::default() },
        ] {
            assert!(matches!(lr_at(10, &cfg), Err(ScheduleError::InvalidConfig(_))));
        }
    }

    #[test]
    fn batches() {
        assert_eq!(effective_batch(&AccumulationConfig::default()), 48);
        assert_eq!(effective_batch(&AccumulationConfig { micro_batch: 5, accumulation_steps: 1 }), 5);
        assert_eq!(effective_batch(&AccumulationConfig { micro_batch: 2, accumulation_steps: 3 }), 6);
    }

    #[test]
    fn cross_entropy_extremes() {
        let certain = ProbabilityGrid::new(1, 2, 3, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(cross_entropy(&certain, &[vec![0, 2]]).unwrap(), 0.0);
        let v = 7;
        let uniform = ProbabilityGrid::new(2, 3, v, vec![1.0 / v as f64; 2 * 3 * v]).unwrap();
        let loss = cross_entropy(&uniform, &[vec![0, 1, 2], vec![6, 5, 4]]).unwrap();
        assert!((loss - (v as f64).ln()).abs() < 1e-12);
        let bad = ProbabilityGrid::new(1, 1, 2, vec![0.5, 0.6]).unwrap();
        assert!(matches!(cross_entropy(&bad, &[vec![0]]), Err(ScheduleError::NonNormalizedDistribution { .. })));
        assert!(matches!(cross_entropy(&certain, &[vec![0]]), Err(ScheduleError::Shape(_))));
    }

    #[test]
    fn csv_trace() {
        let mut buf = Vec::new();
        write_schedule_csv(&ScheduleConfig::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 802);
        assert_eq!(text.lines().nth(51).unwrap(), "50,0.0001");
        assert_eq!(text.lines().last().unwrap(), "800,0.0");
    }
}
