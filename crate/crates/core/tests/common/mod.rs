//! Reference implementations used as oracles by the integration and
//! acceptance tests. Each is written from the definition, not from the
//! library code path it checks.

#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Unnormalized Morlet, evaluated from scratch.
fn morlet_conj(t: f64, omega0: f64) -> Complex64 {
    let env = (-t * t / 2.0).exp() / PI.sqrt().sqrt();
    Complex64::new(env * (omega0 * t).cos(), -env * (omega0 * t).sin())
}

/// `C(a, m) = √(dt/a) Σₙ x[n] ψ*((n − m)/a)`, full support, no tables.
pub fn naive_cwt(x: &[f64], fs: f64, scales: &[f64], omega0: f64) -> Vec<Vec<Complex64>> {
    let dt = 1.0 / fs;
    scales
        .iter()
        .map(|&a| {
            (0..x.len())
                .map(|m| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (n, &v) in x.iter().enumerate() {
                        acc += morlet_conj((n as f64 - m as f64) / a, omega0) * v;
                    }
                    acc * (dt / a).sqrt()
                })
                .collect()
        })
        .collect()
}

/// LCS by memoized recursion over suffixes.
pub fn memo_lcs(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Corpus BLEU with one reference per candidate, from the textbook
/// definition: clipped counts, closest reference length, brevity penalty,
/// uniform geometric mean of p₁..p₄.
pub fn oracle_bleu(pairs: &[(Vec<String>, Vec<String>)]) -> f64 {
    let mut c_len = 0usize;
    let mut r_len = 0usize;
    let mut log_p = 0.0;
    for n in 1..=4 {
        let (mut hit, mut total) = (0usize, 0usize);
        for (cand, reference) in pairs {
            let grams = |t: &[String]| {
                let mut m: HashMap<Vec<String>, usize> = HashMap::new();
                for i in 0..t.len().saturating_sub(n - 1) {
                    *m.entry(t[i..i + n].to_vec()).or_default() += 1;
                }
                m
            };
            let rc = grams(reference);
            for (g, k) in grams(cand) {
                hit += k.min(*rc.get(&g).unwrap_or(&0));
                total += k;
            }
        }
        if hit == 0 {
            return 0.0;
        }
        log_p += (hit as f64 / total as f64).ln() / 4.0;
    }
    for (cand, reference) in pairs {
        c_len += cand.len();
        r_len += reference.len();
    }
    let bp = if c_len > r_len { 1.0 } else { (1.0 - r_len as f64 / c_len as f64).exp() };
    bp * log_p.exp()
}

/// Double-double accumulation (TwoSum), good to ~32 significant digits.
#[derive(Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (x - bb);
        self.hi = s;
        self.lo += err;
        let t = self.hi + self.lo;
        self.lo -= t - self.hi;
        self.hi = t;
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// Recurrence matrix straight from the definition.
pub fn brute_force_rp(x: &[f64], m: usize, tau: usize, eps: f64) -> Vec<Vec<bool>> {
    let states: Vec<Vec<f64>> = (0..=x.len() - 1 - (m - 1) * tau)
        .map(|k| (0..m).map(|j| x[k + j * tau]).collect())
        .collect();
    states
        .iter()
        .map(|a| states.iter().map(|b| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt() <= eps).collect())
        .collect()
}

/// Relative L2 distance `‖a − b‖ / ‖b‖`.
pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_enerviz")
}

pub fn run_cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(bin()).args(args).current_dir(cwd).output().expect("spawn enerviz")
}

/// PNG width and height read from the IHDR chunk.
pub fn png_size(bytes: &[u8]) -> (u32, u32) {
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
    assert_eq!(&bytes[12..16], b"IHDR");
    let w = u32::from_be_bytes(bytes[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
    (w, h)
}

/// Every file under `dir`, relative path to contents, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// CSV of `hours` hourly-periodic minutes for one channel, for window-count tests.
pub fn single_channel_csv(name: &str, minutes: usize) -> String {
    let start = chrono::DateTime::parse_from_rfc3339("2023-07-01T00:00:00Z").unwrap();
    let mut s = format!("timestamp,{name}\n");
    for i in 0..minutes {
        let t = start + chrono::TimeDelta::minutes(i as i64);
        let v = 0.2 + 0.1 * (2.0 * PI * i as f64 / 37.0).sin() + if i % 90 < 5 { 1.0 } else { 0.0 };
        s.push_str(&format!("{},{v:.6}\n", t.format("%Y-%m-%dT%H:%M:%SZ")));
    }
    s
}
