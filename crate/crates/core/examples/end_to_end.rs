//! Synthetic corpus to images to manifest to metric report, via the library.
//!
//! ```text
//! cargo run --example end_to_end -- /tmp/enerviz-run
//! ```
//!
//! The same steps from the shell:
//!
//! ```text
//! enerviz synth --out data --days 2
//! enerviz convert --input data/corpus.csv --out run
//! enerviz answers --run run --truth data/ground_truth.jsonl --out answers.jsonl
//! enerviz build-dataset --run run --answers answers.jsonl
//! enerviz eval --manifest run/manifest.jsonl --generations generations.jsonl
//! ```

use std::io::Write;
use std::path::PathBuf;

use chrono::{TimeZone, Utc};
use enerviz::metrics::{BleuConfig, Generation, Tokenizer};
use enerviz::pipeline::{self, RunConfig};
use enerviz::Split;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root: PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("enerviz-run"), Into::into);
    let data = root.join("data");
    let run = root.join("run");
    let cfg = RunConfig::default();

    let truth = pipeline::write_synthetic_corpus(&data, Utc.with_ymd_and_hms(2023, 7, 1, 0, 0, 0).unwrap(), 2, 7)?;
    println!("corpus: {} injected anomalies", truth.len());

    let summary = pipeline::convert(&data.join("corpus.csv"), &run, &cfg)?;
    println!("convert: {} windows, {} images", summary.windows, summary.images.len());

    let answers = root.join("answers.jsonl");
    pipeline::write_synthetic_answers(&run, &data.join("ground_truth.jsonl"), &answers, &cfg)?;
    let manifest = pipeline::build_dataset(&run, &answers, &cfg)?;
    let (train, val) = manifest.counts();
    println!("build-dataset: {train} train / {val} val");

    // Echo the references back as generations; every score should be 1.
    let gens = root.join("generations.jsonl");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&gens)?);
    for r in manifest.split(Split::Val) {
        let g = Generation { id: r.id.clone(), text: r.answer.clone(), token_logprobs: Some(vec![-0.05; 8]) };
        writeln!(file, "{}", serde_json::to_string(&g)?)?;
    }
    file.flush()?;
    drop(file);

    let report = pipeline::evaluate(
        &run.join(pipeline::MANIFEST_FILE),
        &gens,
        &run.join(pipeline::REPORT_FILE),
        &Tokenizer::default(),
        &BleuConfig::default(),
    )?;
    print!("{}", report.to_table());
    println!("outputs in {}", root.display());
    Ok(())
}
