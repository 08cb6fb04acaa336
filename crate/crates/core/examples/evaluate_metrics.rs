//! ROUGE-L, BLEU and perplexity on a few hand-made pairs.
//!
//! ```text
//! cargo run --example evaluate_metrics
//! ```

use enerviz::metrics::{self, BleuConfig, TextPair, TokenLogRecord, Tokenizer};
use enerviz::Split;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tok = Tokenizer::default();
    let data = [
        ("The kettle shows a spike at 16:28.", "Detected a power spike on the kettle at 16:28."),
        ("No anomalies detected.", "No anomalies detected between 2023-07-01 and 2023-07-02."),
        ("Shift printer use outside peak hours.", "Shift printer use outside peak hours."),
    ];
    let pairs: Vec<TextPair> = data.iter().map(|(c, r)| TextPair::new(tok.tokenize(c), tok.tokenize(r))).collect();
    println!("tokens: {:?}", pairs[0].candidate);

    let cfg = BleuConfig::default();
    println!("ROUGE-L        {:.4}", metrics::rouge_l(&pairs));
    println!("BLEU           {:.4}", metrics::bleu(&pairs, &cfg));
    println!("BLEU +1 smooth {:.4}", metrics::bleu(&pairs, &BleuConfig { add_one_smoothing: true, ..cfg }));
    for n in 1..=4 {
        let (hit, total) = metrics::modified_precision(&pairs, n);
        println!("  p{n} = {hit}/{total}");
    }

    let clipped = [TextPair::from_text("the the the", "the cat")];
    let (hit, total) = metrics::modified_precision(&clipped, 1);
    println!("clipping: \"the the the\" vs \"the cat\" gives p1 = {hit}/{total}");

    let v = 50_f64;
    let uniform = vec![TokenLogRecord { example_id: "u".into(), token_logprobs: vec![-v.ln(); 20], split: Split::Val }];
    println!("uniform model over {v} tokens: perplexity {}", metrics::perplexity(&uniform, Split::Val)?);
    Ok(())
}
