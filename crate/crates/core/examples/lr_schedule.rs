//! Warmup + cosine learning rate and the accumulation arithmetic.
//!
//! ```text
//! cargo run --example lr_schedule
//! cargo run --example lr_schedule -- csv > lr.csv
//! ```

use enerviz::schedule::{self, AccumulationConfig, ProbabilityGrid, ScheduleConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScheduleConfig::default();
    if std::env::args().nth(1).as_deref() == Some("csv") {
        return schedule::write_schedule_csv(&cfg, std::io::stdout().lock());
    }

    for t in [0, 25, 50, 100, 425, 700, 800] {
        println!("step {t:>3}: {:.3e}", schedule::lr_at(t, &cfg)?);
    }
    println!("effective batch: {}", schedule::effective_batch(&AccumulationConfig::default()));

    // Two examples, two positions, vocabulary of three.
    let probs = ProbabilityGrid::new(2, 2, 3, vec![0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4, 0.25, 0.25, 0.5])?;
    let loss = schedule::cross_entropy(&probs, &[vec![0, 1], vec![2, 2]])?;
    println!("cross-entropy: {loss:.6} nats");
    Ok(())
}
