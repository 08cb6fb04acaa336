mod common;

use enerviz::metrics::{self, BleuConfig, TextPair, TokenLogRecord, Tokenizer};
use enerviz::schedule::{self, ProbabilityGrid};
use enerviz::Split;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn words(seq: &[u8]) -> Vec<String> {
    seq.iter().map(|b| ((b'a' + b) as char).to_string()).collect()
}

fn all_binary(len: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..1u32 << len).map(move |bits| (0..len).map(|i| ((bits >> i) & 1) as u8).collect())
}

#[test]
fn lcs_exhaustive_binary_up_to_seven() {
    for la in 0..=7 {
        for lb in 0..=7 {
            for a in all_binary(la) {
                for b in all_binary(lb) {
                    assert_eq!(metrics::lcs_len(&a, &b), common::memo_lcs(&a, &b), "{a:?} {b:?}");
                }
            }
        }
    }
}

#[test]
fn rouge_l_matches_oracle_for_all_lengths_to_twelve() {
    let mut rng = common::rng(5);
    for la in 0..=12 {
        for lb in 1..=12 {
            for _ in 0..25 {
                let alpha = rng.random_range(2..=5u8);
                let a: Vec<u8> = (0..la).map(|_| rng.random_range(0..alpha)).collect();
                let b: Vec<u8> = (0..lb).map(|_| rng.random_range(0..alpha)).collect();
                let expected = common::memo_lcs(&a, &b) as f64 / lb as f64;
                assert_eq!(metrics::rouge_l(&[TextPair::new(words(&a), words(&b))]), expected);
            }
        }
    }
}

fn fixture_pairs() -> Vec<(String, String)> {
    [
        ("the fridge cycles every forty minutes", "the fridge compressor cycles every forty five minutes"),
        ("no anomalies were detected today", "no anomalies detected between monday and tuesday"),
        ("kettle spike at noon", "a kettle spike occurred at noon"),
        ("inspect the printer", "inspect the printer for idle power draw"),
        ("the the the the", "the cat sat on the mat"),
        ("shift use of the microwave outside peak hours", "shift microwave use outside peak hours"),
        ("consumption is stable", "consumption is stable"),
        ("the desktop stays on overnight at low power", "the desktop stays on overnight"),
        ("check the water dispenser heater", "check the water dispenser heater schedule"),
        ("coffee machine peaks each morning", "the coffee machine peaks each morning at nine"),
    ]
    .iter()
    .map(|(c, r)| (c.to_string(), r.to_string()))
    .collect()
}

#[test]
fn bleu_matches_independent_oracle() {
    let tok = Tokenizer::default();
    let raw = fixture_pairs();
    let pairs: Vec<TextPair> = raw.iter().map(|(c, r)| TextPair::new(tok.tokenize(c), tok.tokenize(r))).collect();
    let oracle_in: Vec<_> = pairs.iter().map(|p| (p.candidate.clone(), p.references[0].clone())).collect();
    let expected = common::oracle_bleu(&oracle_in);
    let got = metrics::bleu(&pairs, &BleuConfig::default());
    assert!(expected > 0.0);
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn clipping_worked_example() {
    let p = [TextPair::from_text("the the the", "the cat")];
    assert_eq!(metrics::modified_precision(&p, 1), (1, 3));
}

#[test]
fn identical_text_scores_one() {
    let tok = Tokenizer::default();
    let pairs: Vec<TextPair> =
        fixture_pairs().iter().map(|(_, r)| TextPair::new(tok.tokenize(r), tok.tokenize(r))).collect();
    assert_eq!(metrics::bleu(&pairs, &BleuConfig::default()), 1.0);
    assert_eq!(metrics::rouge_l(&pairs), 1.0);
}

#[test]
fn corpus_scores_ignore_pair_order() {
    let tok = Tokenizer::default();
    let mut pairs: Vec<TextPair> =
        fixture_pairs().iter().map(|(c, r)| TextPair::new(tok.tokenize(c), tok.tokenize(r))).collect();
    let cfg = BleuConfig::default();
    let (b, r) = (metrics::bleu(&pairs, &cfg), metrics::rouge_l(&pairs));
    let mut rng = common::rng(9);
    for _ in 0..10 {
        pairs.shuffle(&mut rng);
        assert_eq!(metrics::bleu(&pairs, &cfg), b);
        assert_eq!(metrics::rouge_l(&pairs), r);
    }
}

#[test]
fn uniform_model_perplexity_is_vocab_size() {
    for v in [2usize, 7, 50, 1000, 32_000] {
        let lp = -(v as f64).ln();
        let recs: Vec<TokenLogRecord> = (0..5)
            .map(|i| TokenLogRecord { example_id: format!("e{i}"), token_logprobs: vec![lp; 13 + i], split: Split::Val })
            .collect();
        let nll = metrics::mean_nll(&recs, Split::Val).unwrap();
        assert!((nll + lp).abs() <= f64::EPSILON * -lp, "V={v}: {nll}");
        let ppl = metrics::perplexity(&recs, Split::Val).unwrap();
        assert!((ppl - v as f64).abs() <= 4.0 * f64::EPSILON * v as f64, "V={v}: {ppl}");
    }
}

#[test]
fn mean_nll_of_thousand_tokens_matches_double_double() {
    let mut rng = common::rng(21);
    let recs: Vec<TokenLogRecord> = (0..40)
        .map(|i| TokenLogRecord {
            example_id: format!("ex{i:02}"),
            token_logprobs: (0..25).map(|_| -rng.random_range(1e-6..12.0f64)).collect(),
            split: Split::Train,
        })
        .collect();
    let mut dd = common::DoubleDouble::default();
    for r in &recs {
        for &lp in &r.token_logprobs {
            dd.add(lp);
        }
    }
    let oracle = -dd.value() / 1000.0;
    let got = metrics::mean_nll(&recs, Split::Train).unwrap();
    assert!((got - oracle).abs() <= 2.0 * f64::EPSILON * oracle, "{got} vs {oracle}");
}

#[test]
fn dyadic_logprobs_are_summed_exactly() {
    let recs = vec![TokenLogRecord {
        example_id: "a".into(),
        token_logprobs: (0..1000).map(|k| -((k % 97) as f64) / 1024.0).collect(),
        split: Split::Val,
    }];
    let exact: i64 = (0..1000).map(|k| k % 97).sum();
    assert_eq!(metrics::mean_nll(&recs, Split::Val).unwrap(), exact as f64 / 1024.0 / 1000.0);
}

fn random_grid(seed: u64, n: usize, t: usize, v: usize) -> (ProbabilityGrid, Vec<Vec<usize>>) {
    let mut rng = common::rng(seed);
    let mut data = Vec::with_capacity(n * t * v);
    for _ in 0..n * t {
        let raw: Vec<f64> = (0..v).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        data.extend(raw.iter().map(|x| x / s));
    }
    let targets = (0..n).map(|_| (0..t).map(|_| rng.random_range(0..v)).collect()).collect();
    (ProbabilityGrid::new(n, t, v, data).unwrap(), targets)
}

#[test]
fn cross_entropy_equals_mean_nll() {
    for seed in 0..10 {
        let (grid, targets) = random_grid(seed, 6, 17, 11);
        let recs: Vec<TokenLogRecord> = targets
            .iter()
            .enumerate()
            .map(|(i, row)| TokenLogRecord {
                example_id: format!("{i:03}"),
                token_logprobs: row.iter().enumerate().map(|(j, &k)| grid.distribution(i, j)[k].ln()).collect(),
                split: Split::Train,
            })
            .collect();
        let ce = schedule::cross_entropy(&grid, &targets).unwrap();
        let nll = metrics::mean_nll(&recs, Split::Train).unwrap();
        assert!((ce - nll).abs() <= 1e-12, "{ce} vs {nll}");
    }
}

proptest! {
    #[test]
    fn rouge_l_bounded(a in proptest::collection::vec(0u8..4, 0..20), b in proptest::collection::vec(0u8..4, 1..20)) {
        let r = metrics::rouge_l(&[TextPair::new(words(&a), words(&b))]);
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn bleu_bounded(a in proptest::collection::vec(0u8..4, 0..20), b in proptest::collection::vec(0u8..4, 1..20), smooth in any::<bool>()) {
        let cfg = BleuConfig { add_one_smoothing: smooth, ..BleuConfig::default() };
        let s = metrics::bleu(&[TextPair::new(words(&a), words(&b))], &cfg);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn tokenizer_lowercases_and_drops_punctuation(s in "[A-Za-z ,.!?]{0,40}") {
        for t in Tokenizer::default().tokenize(&s) {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(|c| c.is_ascii_lowercase()));
        }
    }
}
