use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use enerviz::metrics::{BleuConfig, Tokenizer};
use enerviz::pipeline::{self, PipelineError, RunConfig, CONFIG_FILE, MANIFEST_FILE, REPORT_FILE};
use enerviz::render::{RenderMode, SourceKind};
use enerviz::schedule;
use enerviz::wavelet::CwtMethod;

#[derive(Parser)]
#[command(name = "enerviz", version, about = "Energy time series to images, manifests and metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fft,
    Direct,
}

#[derive(Subcommand)]
enum Command {
    /// Encode every window of a CSV file into PNG images.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated list of `cwt`, `rp`.
        #[arg(long, value_delimiter = ',')]
        encoding: Vec<SourceKind>,
        #[arg(long)]
        sample_period_secs: Option<u64>,
        #[arg(long)]
        window_secs: Option<u64>,
        #[arg(long)]
        stride_secs: Option<u64>,
        #[arg(long)]
        scales: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// `heatmap` or `surface3d`.
        #[arg(long)]
        render_mode: Option<RenderMode>,
        #[arg(long)]
        size: Option<u32>,
        #[arg(long)]
        dumps: bool,
    },
    /// Assemble `manifest.jsonl` from converted images and an answers file.
    BuildDataset {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        answers: PathBuf,
        /// Defaults to the run directory's echoed config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        encoding: Vec<SourceKind>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        per_class_cap: Option<usize>,
        #[arg(long)]
        skip_unanswered: bool,
    },
    /// Score generations against the validation split.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        generations: PathBuf,
        /// Defaults to `report.json` next to the manifest.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        keep_punctuation: bool,
        #[arg(long)]
        bleu_smoothing: bool,
    },
    /// Learning-rate schedule utilities.
    Schedule {
        #[command(subcommand)]
        action: ScheduleAction,
    },
    /// Write a synthetic seven-appliance corpus with ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        days: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "2023-07-01T00:00:00Z")]
        start: chrono::DateTime<chrono::Utc>,
    },
    /// Write templated answers for converted images from a ground-truth file.
    Answers {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ScheduleAction {
    /// Emit `step,lr` CSV for every step.
    Dump {
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        eta_max: Option<f64>,
        #[arg(long)]
        eta_min: Option<f64>,
        #[arg(long)]
        warmup_floor: Option<f64>,
        #[arg(long)]
        warmup_steps: Option<u32>,
        #[arg(long)]
        max_steps: Option<u32>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, PipelineError> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Convert {
            input,
            out,
            config,
            encoding,
            sample_period_secs,
            window_secs,
            stride_secs,
            scales,
            method,
            render_mode,
            size,
            dumps,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if !encoding.is_empty() {
                cfg.encodings = encoding;
            }
            if let Some(p) = sample_period_secs {
                cfg.ingest.columns.sample_period_secs = p;
            }
            if let Some(w) = window_secs {
                cfg.ingest.window_length_secs = w;
                if stride_secs.is_none() {
                    cfg.ingest.stride_secs = w;
                }
            }
            if let Some(s) = stride_secs {
                cfg.ingest.stride_secs = s;
            }
            if let Some(n) = scales {
                cfg.wavelet.scale_count = n;
            }
            if let Some(m) = method {
                cfg.wavelet.method = match m {
                    Method::Fft => CwtMethod::Fft,
                    Method::Direct => CwtMethod::Direct,
                };
            }
            if let Some(m) = render_mode {
                cfg.render.mode = m;
            }
            if let Some(s) = size {
                cfg.render.width = s;
                cfg.render.height = s;
            }
            cfg.write_dumps |= dumps;
            let summary = pipeline::convert(&input, &out, &cfg)?;
            println!("{} windows, {} images written to {}", summary.windows, summary.images.len(), out.display());
        }
        Command::BuildDataset {
            run,
            answers,
            config,
            encoding,
            seed,
            train_fraction,
            per_class_cap,
            skip_unanswered,
        } => {
            let echoed = run.join(CONFIG_FILE);
            let config = config.or_else(|| echoed.exists().then_some(echoed));
            let mut cfg = load_config(config.as_deref())?;
            if !encoding.is_empty() {
                cfg.encodings = encoding;
            }
            if let Some(s) = seed {
                cfg.dataset.split_seed = s;
            }
            if let Some(f) = train_fraction {
                cfg.dataset.train_fraction = f;
            }
            if per_class_cap.is_some() {
                cfg.dataset.per_class_cap = per_class_cap;
            }
            cfg.dataset.skip_unanswered |= skip_unanswered;
            let manifest = pipeline::build_dataset(&run, &answers, &cfg)?;
            let (train, val) = manifest.counts();
            println!("{train} train / {val} val");
            println!("manifest written to {}", run.join(MANIFEST_FILE).display());
        }
        Command::Eval { manifest, generations, report, keep_punctuation, bleu_smoothing } => {
            let report = report.unwrap_or_else(|| manifest.with_file_name(REPORT_FILE));
            let tokenizer = Tokenizer { keep_punctuation, ..Tokenizer::default() };
            let bleu = BleuConfig { add_one_smoothing: bleu_smoothing, ..BleuConfig::default() };
            let r = pipeline::evaluate(&manifest, &generations, &report, &tokenizer, &bleu)?;
            print!("{}", r.to_table());
        }
        Command::Schedule {
            action: ScheduleAction::Dump { out, config, eta_max, eta_min, warmup_floor, warmup_steps, max_steps },
        } => {
            let mut cfg = load_config(config.as_deref())?;
            let s = &mut cfg.training.schedule;
            s.eta_max = eta_max.unwrap_or(s.eta_max);
            s.eta_min = eta_min.unwrap_or(s.eta_min);
            s.warmup_floor = warmup_floor.unwrap_or(s.warmup_floor);
            s.t_warm = warmup_steps.unwrap_or(s.t_warm);
            s.t_max = max_steps.unwrap_or(s.t_max);
            match out {
                Some(path) => pipeline::write_schedule(&cfg, &path)?,
                None => {
                    cfg.training.schedule.validate()?;
                    let mut buf = Vec::new();
                    schedule::write_schedule_csv(&cfg.training.schedule, &mut buf)
                        .expect("writing to memory succeeds");
                    std::io::stdout()
                        .write_all(&buf)
                        .map_err(|source| PipelineError::Io { path: "<stdout>".into(), source })?;
                }
            }
        }
        Command::Synth { out, days, seed, start } => {
            let truth = pipeline::write_synthetic_corpus(&out, start, days, seed)?;
            println!("{days} days, {} anomalies written to {}", truth.len(), out.display());
        }
        Command::Answers { run, truth, out } => {
            let echoed = run.join(CONFIG_FILE);
            let cfg = load_config(echoed.exists().then_some(echoed.as_path()))?;
            let n = pipeline::write_synthetic_answers(&run, &truth, &out, &cfg)?;
            println!("{n} answers written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
