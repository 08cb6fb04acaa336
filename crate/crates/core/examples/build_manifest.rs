//! Turn a handful of images and answers into a split instruction manifest.
//!
//! ```text
//! cargo run --example build_manifest
//! ```

use std::collections::BTreeMap;

use enerviz::dataset::{self, AnalysisType, ImageEntry, WindowMeta};
use enerviz::render::SourceKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let images: Vec<ImageEntry> = ["kettle", "printer", "desktop", "microwave"]
        .iter()
        .flat_map(|ch| {
            (1..=3).map(move |day| ImageEntry {
                image_path: format!("images/{ch}_2023070{day}T000000Z_cwt.png"),
                meta: WindowMeta {
                    channel: ch.to_string(),
                    window_start: format!("2023070{day}T000000Z"),
                    encoding: SourceKind::Cwt,
                },
                start_day: format!("2023-07-0{day}"),
                end_day: format!("2023-07-0{day}"),
            })
        })
        .collect();

    let mut answers = BTreeMap::new();
    for img in &images {
        for t in AnalysisType::ALL {
            answers.insert(dataset::record_id(&img.meta, t), format!("{} answer for {}", t.name(), img.meta.channel));
        }
    }

    let records = dataset::assemble_records(&images, &AnalysisType::ALL, &answers, false)?;
    let manifest = dataset::split_dataset(records, 42, dataset::DEFAULT_TRAIN_FRACTION)?;
    let (train, val) = manifest.counts();
    println!("{train} train / {val} val\n");

    let first = &manifest.records[0];
    println!("prompt: {}\n", first.prompt());

    let mut out = Vec::new();
    dataset::write_manifest(&manifest, &mut out)?;
    let text = String::from_utf8(out)?;
    for line in text.lines().take(2) {
        println!("{line}");
    }

    // Missing answers are reported all at once.
    answers.retain(|id, _| !id.starts_with("kettle_20230702"));
    let records = dataset::assemble_records(&images, &AnalysisType::ALL, &answers, false);
    println!("\n{}", records.unwrap_err());
    Ok(())
}
