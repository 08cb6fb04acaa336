//! Parse a CSV with a gap and a humidity column, then cut daily windows.
//!
//! ```text
//! cargo run --example ingest_windows
//! ```

use std::fmt::Write;

use enerviz::ingest::{self, IngestConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut csv = String::from("timestamp,fridge,humidity[%RH]\n");
    for minute in 0..3 * 1440 {
        // ten minutes missing on day one, two hours missing on day two
        if (600..610).contains(&minute) || (2000..2120).contains(&minute) {
            continue;
        }
        let (d, h, m) = (1 + minute / 1440, minute / 60 % 24, minute % 60);
        let fridge = if minute % 45 < 18 { 0.12 } else { 0.01 };
        let rh = 40.0 + 10.0 * (minute as f64 / 1440.0 * std::f64::consts::TAU).sin();
        writeln!(csv, "2023-07-{d:02}T{h:02}:{m:02}:00Z,{fridge},{rh:.2}")?;
    }

    let cfg = IngestConfig::default();
    for ts in ingest::parse_csv(csv.as_bytes(), &cfg.columns)? {
        let filled = ingest::fill_gaps(&ts, cfg.max_gap_secs);
        println!(
            "{} [{}]: {} samples, {} missing, excluded spans {:?}",
            ts.channel_id,
            ts.unit,
            ts.len(),
            ts.values.iter().filter(|v| v.is_nan()).count(),
            filled.excluded
        );
    }

    for w in ingest::ingest_windows(csv.as_bytes(), &cfg)? {
        let (lo, hi) = w.samples.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        println!("window {} {}: {} samples in [{lo}, {hi}]", w.parent_channel, w.start_stamp(), w.len());
    }
    Ok(())
}
