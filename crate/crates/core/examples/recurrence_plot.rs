//! Threshold a delay-embedded signal into a recurrence matrix.
//!
//! ```text
//! cargo run --example recurrence_plot
//! ```

use enerviz::recurrence::{self, EmbeddingSpec, ThresholdPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two periods of a sawtooth followed by a flat stretch.
    let samples: Vec<f64> = (0..48).map(|i| if i < 32 { (i % 16) as f64 / 15.0 } else { 0.5 }).collect();

    for spec in [EmbeddingSpec::default(), EmbeddingSpec { dimension: 3, delay: 2 }] {
        let states = recurrence::embed(&samples, &spec)?;
        let m = recurrence::recurrence_matrix(&states, ThresholdPolicy::TargetRate(0.10))?;
        println!(
            "m={} τ={}: {} states, ε={:.4}, rate={:.4}",
            spec.dimension,
            spec.delay,
            m.size(),
            m.epsilon,
            m.recurrence_rate
        );
    }

    let states = recurrence::embed(&samples, &EmbeddingSpec::default())?;
    let m = recurrence::recurrence_matrix(&states, ThresholdPolicy::Fixed(0.1))?;
    println!("\nfixed ε=0.1, row 0 at the top:");
    for i in 0..m.size() {
        let line: String = (0..m.size()).map(|j| if m.get(i, j) { '#' } else { '.' }).collect();
        println!("{line}");
    }

    let mut dump = Vec::new();
    recurrence::write_dump(&m, &mut dump)?;
    assert_eq!(recurrence::read_dump(dump.as_slice())?, m);
    println!("\nrun-length dump: {} bytes for {} cells", dump.len(), m.size() * m.size());
    Ok(())
}
