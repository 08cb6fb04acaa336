//! Synthetic appliance signals with known anomalies.
//!
//! Each channel is a daily sinusoid plus a duty-cycle square wave, with
//! optional Gaussian noise and injected anomalies. Generation is a pure
//! function of the [`SyntheticSpec`], seed included.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use chrono::{DateTime, NaiveDateTime, TimeDelta, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{record_id, AnalysisType, ImageEntry};
use crate::ingest::{TimeSeries, Unit};
use crate::wavelet::Scalogram;

/// Required ratio of high-frequency power at a spike to the off-anomaly median.
pub const DEFAULT_LOCALIZATION_FACTOR: f64 = 10.0;

/// Deterministic base pattern of one appliance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePattern {
    pub baseline: f64,
    pub daily_amplitude: f64,
    /// Hour of day (UTC) at which the daily sinusoid peaks.
    pub daily_peak_hour: f64,
    pub duty_period_secs: f64,
    /// Fraction of each duty period spent in the "on" state.
    pub duty_fraction: f64,
    pub duty_level: f64,
}

impl BasePattern {
    pub fn value_at(&self, seconds_since_midnight_epoch: f64) -> f64 {
        let hours = seconds_since_midnight_epoch / 3600.0;
        let daily = 0.5 + 0.5 * (2.0 * PI * (hours - self.daily_peak_hour) / 24.0).cos();
        let duty = if self.duty_period_secs > 0.0
            && seconds_since_midnight_epoch.rem_euclid(self.duty_period_secs)
                < self.duty_fraction * self.duty_period_secs
        {
            self.duty_level
        } else {
            0.0
        };
        self.baseline + self.daily_amplitude * daily + duty
    }
}

/// Appliance types found in a small office building.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Desktop,
    Microwave,
    Refrigerator,
    WaterDispenser,
    CoffeeMachine,
    Kettle,
    Printer,
}

impl Archetype {
    pub const ALL: [Archetype; 7] = [
        Archetype::Desktop,
        Archetype::Microwave,
        Archetype::Refrigerator,
        Archetype::WaterDispenser,
        Archetype::CoffeeMachine,
        Archetype::Kettle,
        Archetype::Printer,
    ];

    pub fn channel_name(self) -> &'static str {
        match self {
            Archetype::Desktop => "desktop",
            Archetype::Microwave => "microwave",
            Archetype::Refrigerator => "refrigerator",
            Archetype::WaterDispenser => "water_dispenser",
            Archetype::CoffeeMachine => "coffee_machine",
            Archetype::Kettle => "kettle",
            Archetype::Printer => "printer",
        }
    }

    /// Amplitudes in kW.
    pub fn pattern(self) -> BasePattern {
        let p = |baseline, daily_amplitude, daily_peak_hour, duty_period_secs, duty_fraction, duty_level| BasePattern {
            baseline,
            daily_amplitude,
            daily_peak_hour,
            duty_period_secs,
            duty_fraction,
            duty_level,
        };
        match self {
            Archetype::Desktop => p(0.03, 0.12, 13.0, 0.0, 0.0, 0.0),
            Archetype::Microwave => p(0.002, 0.05, 12.5, 4.0 * 3600.0, 0.02, 1.1),
            Archetype::Refrigerator => p(0.01, 0.02, 15.0, 45.0 * 60.0, 0.4, 0.12),
            Archetype::WaterDispenser => p(0.02, 0.03, 14.0, 30.0 * 60.0, 0.15, 0.45),
            Archetype::CoffeeMachine => p(0.005, 0.08, 9.0, 3.0 * 3600.0, 0.03, 1.3),
            Archetype::Kettle => p(0.0, 0.02, 10.0, 2.0 * 3600.0, 0.025, 2.0),
            Archetype::Printer => p(0.015, 0.04, 11.0, 90.0 * 60.0, 0.05, 0.35),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Short additive surge.
    Spike,
    /// Sustained additive offset.
    LevelShift,
    /// Samples missing from the record.
    Dropout,
}

impl AnomalyKind {
    fn describe(self) -> &'static str {
        match self {
            AnomalyKind::Spike => "power spike",
            AnomalyKind::LevelShift => "sustained consumption increase",
            AnomalyKind::Dropout => "data dropout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub start_index: usize,
    pub duration: usize,
    /// Added kW for spikes and level shifts; ignored for dropouts.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub channel: String,
    pub unit: Unit,
    pub pattern: BasePattern,
    pub start_time: DateTime<Utc>,
    pub sample_period_secs: u64,
    pub num_samples: usize,
    pub noise_std: f64,
    pub anomalies: Vec<AnomalySpec>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn for_archetype(archetype: Archetype, start_time: DateTime<Utc>, days: usize, seed: u64) -> Self {
        Self {
            channel: archetype.channel_name().to_string(),
            unit: Unit::Kw,
            pattern: archetype.pattern(),
            start_time,
            sample_period_secs: 60,
            num_samples: days * 1440,
            noise_std: 0.0,
            anomalies: Vec::new(),
            seed,
        }
    }
}

/// An injected anomaly, with exact sample range `[start_index, end_index)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthAnomaly {
    pub channel: String,
    pub kind: AnomalyKind,
    pub start_index: usize,
    pub end_index: usize,
    pub start_time: DateTime<Utc>,
    pub end_time: DateTime<Utc>,
    pub magnitude: f64,
}

/// Generates the series and its ground-truth anomaly list.
pub fn generate(spec: &SyntheticSpec) -> (TimeSeries, Vec<GroundTruthAnomaly>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise_std > 0.0).then(|| Normal::new(0.0, spec.noise_std).expect("finite std"));
    let epoch = spec.start_time.timestamp() as f64;
    let mut values: Vec<f64> = (0..spec.num_samples)
        .map(|i| {
            let t = epoch + (i as u64 * spec.sample_period_secs) as f64;
            let base = spec.pattern.value_at(t);
            match &noise {
                Some(n) => (base + n.sample(&mut rng)).max(0.0),
                None => base,
            }
        })
        .collect();

    let mut truth = Vec::new();
    for a in &spec.anomalies {
        let end = (a.start_index + a.duration).min(values.len());
        if a.start_index >= end {
            continue;
        }
        for v in &mut values[a.start_index..end] {
            match a.kind {
                AnomalyKind::Spike | AnomalyKind::LevelShift => *v += a.magnitude,
                AnomalyKind::Dropout => *v = f64::NAN,
            }
        }
        let at = |i: usize| spec.start_time + TimeDelta::seconds((i as u64 * spec.sample_period_secs) as i64);
        truth.push(GroundTruthAnomaly {
            channel: spec.channel.clone(),
            kind: a.kind,
            start_index: a.start_index,
            end_index: end,
            start_time: at(a.start_index),
            end_time: at(end),
            magnitude: if a.kind == AnomalyKind::Dropout { 0.0 } else { a.magnitude },
        });
    }

    let series = TimeSeries {
        channel_id: spec.channel.clone(),
        unit: spec.unit,
        sample_period_secs: spec.sample_period_secs,
        start_time: spec.start_time,
        values,
        excluded: Vec::new(),
    };
    (series, truth)
}

/// Seven-appliance corpus with a spike every other day on kettle, microwave
/// and coffee machine, plus a level shift on the refrigerator.
pub fn office_corpus(start_time: DateTime<Utc>, days: usize, seed: u64) -> Vec<SyntheticSpec> {
    Archetype::ALL
        .iter()
        .enumerate()
        .map(|(k, &arch)| {
            let mut spec = SyntheticSpec::for_archetype(arch, start_time, days, seed.wrapping_add(k as u64));
            spec.noise_std = 0.005;
            match arch {
                Archetype::Kettle | Archetype::Microwave | Archetype::CoffeeMachine => {
                    for day in (0..days).step_by(2) {
                        spec.anomalies.push(AnomalySpec {
                            kind: AnomalyKind::Spike,
                            start_index: day * 1440 + 600 + 97 * k,
                            duration: 3,
                            magnitude: 3.0,
                        });
                    }
                }
                Archetype::Refrigerator if days >= 2 => spec.anomalies.push(AnomalySpec {
                    kind: AnomalyKind::LevelShift,
                    start_index: 1440 + 480,
                    duration: 360,
                    magnitude: 0.15,
                }),
                _ => {}
            }
            spec
        })
        .collect()
}

pub fn write_ground_truth<W: Write>(truth: &[GroundTruthAnomaly], out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for t in truth {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_ground_truth<R: Read>(input: R) -> std::io::Result<Vec<GroundTruthAnomaly>> {
    BufReader::new(input)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(std::io::Error::other))
        .collect()
}

fn parse_stamp(stamp: &str) -> Option<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(stamp, "%Y%m%dT%H%M%SZ").ok().map(|n| n.and_utc())
}

/// Templated reference answers for every (image, task) pair, derived from
/// the anomalies that overlap each image's window.
pub fn synthetic_answers(
    images: &[ImageEntry],
    truth: &[GroundTruthAnomaly],
    window_secs: u64,
    tasks: &[AnalysisType],
) -> BTreeMap<String, String> {
    let mut answers = BTreeMap::new();
    for image in images {
        let Some(start) = parse_stamp(&image.meta.window_start) else {
            continue;
        };
        let end = start + TimeDelta::seconds(window_secs as i64);
        let channel = image.meta.channel.replace('_', " ");
        let hits: Vec<&GroundTruthAnomaly> = truth
            .iter()
            .filter(|a| a.channel == image.meta.channel && a.start_time < end && start < a.end_time)
            .collect();
        for &task in tasks {
            let text = match task {
                AnalysisType::Monitoring if hits.is_empty() => format!(
                    "The {channel} follows its regular daily cycle between {} and {} with no irregular events.",
                    image.start_day, image.end_day
                ),
                AnalysisType::Monitoring => format!(
                    "The {channel} follows its daily cycle between {} and {} but shows {} irregular event{}.",
                    image.start_day,
                    image.end_day,
                    hits.len(),
                    if hits.len() == 1 { "" } else { "s" }
                ),
                AnalysisType::AnomalyDetection if hits.is_empty() => {
                    format!("No anomalies detected between {} and {}.", image.start_day, image.end_day)
                }
                AnalysisType::AnomalyDetection => hits
                    .iter()
                    .map(|a| {
                        format!(
                            "Detected a {} on the {channel} from {} to {} on {} of {:.2} kW.",
                            a.kind.describe(),
                            a.start_time.format("%H:%M"),
                            a.end_time.format("%H:%M"),
                            a.start_time.format("%Y-%m-%d"),
                            a.magnitude
                        )
                    })
                    .collect::<Vec<_>>()
                    .join(" "),
                AnalysisType::Recommendation if hits.is_empty() => {
                    format!("No action needed; the {channel} operates within its normal profile.")
                }
                AnalysisType::Recommendation => hits
                    .iter()
                    .map(|a| match a.kind {
                        AnomalyKind::Spike => format!(
                            "Inspect the {channel} for short high-power surges around {} and shift its use outside peak hours.",
                            a.start_time.format("%H:%M")
                        ),
                        AnomalyKind::LevelShift => format!(
                            "Check the {channel} for a persistent rise in baseline consumption starting at {}.",
                            a.start_time.format("%H:%M")
                        ),
                        AnomalyKind::Dropout => format!(
                            "Verify the sensor connection of the {channel}; readings were missing from {}.",
                            a.start_time.format("%H:%M")
                        ),
                    })
                    .collect::<Vec<_>>()
                    .join(" "),
            };
            answers.insert(record_id(&image.meta, task), text);
        }
    }
    answers
}

/// Where a transient shows up in a scalogram's high-frequency band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localization {
    /// Column of maximum band power.
    pub peak_col: usize,
    /// Largest band power within `tolerance` columns of the anomaly.
    pub at_anomaly: f64,
    /// Median band power further than `exclusion` columns from it.
    pub off_anomaly_median: f64,
}

impl Localization {
    pub fn ratio(&self) -> f64 {
        self.at_anomaly / self.off_anomaly_median
    }
}

/// Band power is the mean over the `band_rows` smallest scales. Columns
/// inside the cone of influence of the widest band scale are ignored.
pub fn localize_transient(
    s: &Scalogram,
    band_rows: usize,
    anomaly: std::ops::Range<usize>,
    tolerance: usize,
    exclusion: usize,
) -> Localization {
    let rows = band_rows.clamp(1, s.num_scales());
    let edge = s.support_half_width(rows - 1);
    let band: Vec<f64> = (0..s.num_times())
        .map(|c| (0..rows).map(|r| s.power.get(r, c)).sum::<f64>() / rows as f64)
        .collect();
    let usable = |c: usize| c >= edge && c + edge < band.len();
    let peak_col = (0..band.len())
        .filter(|&c| usable(c))
        .max_by(|&a, &b| band[a].total_cmp(&band[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let near = anomaly.start.saturating_sub(tolerance)..(anomaly.end + tolerance).min(band.len());
    let at_anomaly = band[near].iter().copied().fold(0.0, f64::max);
    let mut off: Vec<f64> = (0..band.len())
        .filter(|&c| usable(c) && (c + exclusion < anomaly.start || c >= anomaly.end + exclusion))
        .map(|c| band[c])
        .collect();
    off.sort_by(f64::total_cmp);
    let off_anomaly_median = if off.is_empty() { f64::NAN } else { off[off.len() / 2] };
    Localization { peak_col, at_anomaly, off_anomaly_median }
}
