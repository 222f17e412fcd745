//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use nomad_core::degrade::{DegradeOptions, Family, NoiseSource};
use nomad_core::nsim::utterance_nsim;
use nomad_core::score::{ScoreMode, Scorer};
use nomad_core::train::TrainConfig;
use nomad_core::triplet::SamplerConfig;
use nomad_core::EncoderConfig;

use crate::external::CommandEncoder;
use crate::pipeline::{self, TripletOptions};
use crate::synth::{self, SynthOptions};
use crate::{checkpoint, tables, wav, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "nomad", version, about = "Learned non-matching-reference audio quality distance")]
pub struct Cli {
    /// Seed for every random choice (synthesis, sampling, initialization, shuffling).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// File of `flag=value` lines applied before the command-line flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    White,
    Pink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Nmr,
    Fr,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Degrade every clean WAV at every level and write the manifest.
    Synth {
        #[arg(long)]
        clean_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated degradation families.
        #[arg(long, value_delimiter = ',', default_value = "clip,noise,codec_proxy_mp3like,codec_proxy_opuslike")]
        families: Vec<Family>,
        /// Built-in noise generator, used unless --noise-dir is given.
        #[arg(long, value_enum, default_value_t = NoiseKind::Pink)]
        noise: NoiseKind,
        /// Directory of recorded noise WAVs.
        #[arg(long)]
        noise_dir: Option<PathBuf>,
        /// Command template for external_codec, with {in}, {out} and {kbps}.
        #[arg(long)]
        encoder_cmd: Option<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the utterance NSIM of a degraded file against its clean reference.
    Nsim {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        deg: PathBuf,
    },
    /// Sample train.csv and val.csv triplets from a manifest.
    Triplets {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 8000)]
        count: usize,
        /// Extra NSIM margin for easy negatives.
        #[arg(long, default_value_t = 0.05)]
        s: f64,
        /// Fraction of easy triplets.
        #[arg(long, default_value_t = 0.5)]
        mix: f64,
        /// Fraction of sources used for training.
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the embedding network and write a checkpoint.
    Train {
        #[arg(long)]
        triplets: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        margin: f64,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Learning-rate factor applied after each stretch of --decay-every stale epochs.
        #[arg(long, default_value_t = 0.9)]
        decay: f64,
        #[arg(long, default_value_t = 20)]
        decay_every: usize,
        #[arg(long, default_value_t = 50)]
        patience: usize,
        #[arg(long, default_value_t = 200)]
        max_epochs: usize,
        /// Train on random windows of this many frames (0 uses whole clips).
        #[arg(long, default_value_t = 0)]
        crop_frames: usize,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch CSV; defaults to the checkpoint path with a `.report.csv` extension.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score every WAV under a directory.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input_dir: PathBuf,
        /// Non-matching clean references (nmr) or each clip's own clean reference (fr).
        #[arg(long)]
        pool_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Nmr)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Correlate per-condition mean scores with MOS.
    EvalMos {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        mos: PathBuf,
        /// Optional CSV copy of the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank correlation of scores with degradation intensity, per family.
    EvalRank {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Families whose condition-level |SC| falls below this are flagged.
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-layer feature loss between a clean and an estimated signal.
    FeatureLoss {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Optional CSV of the gradient with respect to the estimate spectrogram.
        #[arg(long)]
        grad_out: Option<PathBuf>,
    },
}

fn value_flags() -> [&'static str; 2] {
    ["--seed", "--config"]
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            Ok((k.trim().replace('_', "-"), v.trim().to_string()))
        })
        .collect()
}

/// Inserts config-file flags right after the subcommand name, so flags given
/// on the command line override them.
fn splice_config(args: Vec<OsString>, entries: &[(String, String)]) -> Vec<OsString> {
    let mut pos = 1;
    while pos < args.len() {
        let s = args[pos].to_string_lossy();
        if value_flags().contains(&s.as_ref()) {
            pos += 2;
        } else if s.starts_with('-') {
            pos += 1;
        } else {
            break;
        }
    }
    let mut injected = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => injected.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => injected.push(OsString::from(format!("--{k}={v}"))),
        }
    }
    let at = (pos + 1).min(args.len());
    let mut out = args[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at..]);
    out
}

fn command() -> clap::Command {
    Cli::command().args_override_self(true)
}

pub fn parse(args: Vec<OsString>) -> std::result::Result<Cli, clap::Error> {
    let args = match config_path(&args) {
        Some(p) => match read_config_file(&p) {
            Ok(entries) => splice_config(args, &entries),
            Err(e) => return Err(command().error(clap::error::ErrorKind::Io, e.to_string())),
        },
        None => args,
    };
    let matches = command().try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

fn init_logging(quiet: bool) {
    let level = if quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

/// Runs the tool and returns the process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let cli = match parse(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.quiet);
    eprintln!("config: seed={} quiet={} {:?}", cli.seed, cli.quiet, cli.command);
    match std::panic::catch_unwind(|| execute(&cli)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure");
            2
        }
    }
}

fn require_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Usage(format!("--{name} must be at least 1")));
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { clean_dir, out, families, noise, noise_dir, encoder_cmd, jobs } => {
            require_positive("jobs", *jobs)?;
            let noise = match noise_dir {
                Some(dir) => {
                    let clips = synth::list_wavs(dir, false)?
                        .iter()
                        .map(|p| wav::load_wav(p))
                        .collect::<Result<Vec<_>>>()?;
                    if clips.is_empty() {
                        return Err(Error::EmptyCorpus(dir.clone()));
                    }
                    NoiseSource::Recordings(clips)
                }
                None if *noise == NoiseKind::White => NoiseSource::White,
                None => NoiseSource::Pink,
            };
            let external = match encoder_cmd {
                Some(t) => Some(Box::new(CommandEncoder::new(t)?) as _),
                None => None,
            };
            let opts = SynthOptions {
                seed: cli.seed,
                families: families.clone(),
                degrade: DegradeOptions { noise, external },
                jobs: *jobs,
            };
            let rows = synth::synth_dataset(clean_dir, out, &opts)?;
            println!("{}", out.join(synth::MANIFEST_FILE).display());
            log::info!("{} rows", rows.len());
        }
        Command::Nsim { reference, deg } => {
            let q = utterance_nsim(&wav::load_wav(reference)?, &wav::load_wav(deg)?)?;
            println!("{q:.6}");
        }
        Command::Triplets { manifest, count, s, mix, split, out } => {
            require_positive("count", *count)?;
            let opts = TripletOptions {
                count: *count,
                sampler: SamplerConfig { s: *s, strategy_mix: *mix, rng_seed: cli.seed },
                train_fraction: *split,
            };
            let (train, val) = pipeline::make_triplets(manifest, out, &opts)?;
            println!("{} {}", train.len(), val.len());
        }
        Command::Train {
            triplets,
            val,
            margin,
            batch,
            lr,
            decay,
            decay_every,
            patience,
            max_epochs,
            crop_frames,
            out,
            report,
            jobs,
        } => {
            require_positive("jobs", *jobs)?;
            let cfg = TrainConfig {
                margin: *margin,
                batch_size: *batch,
                lr: *lr,
                decay_factor: *decay,
                decay_every: *decay_every,
                patience: *patience,
                max_epochs: *max_epochs,
                seed: cli.seed,
                crop_frames: *crop_frames,
            };
            cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
            let encoder = EncoderConfig { init_seed: cli.seed, ..EncoderConfig::default() };
            let report_path = report.clone().unwrap_or_else(|| out.with_extension("report.csv"));
            let (_, rep) = pipeline::train_files(triplets, val, encoder, &cfg, out, &report_path, *jobs)?;
            println!("{} {:.6} {:.6}", rep.best_epoch, rep.best_val_loss, rep.initial_val_loss);
        }
        Command::Score { model, input_dir, pool_dir, mode, out, jobs } => {
            require_positive("jobs", *jobs)?;
            let mode = match mode {
                Mode::Nmr => ScoreMode::Nmr,
                Mode::Fr => ScoreMode::Fr,
            };
            let rows = pipeline::score_dir(model, input_dir, pool_dir, mode, out, *jobs)?;
            println!("{}", rows.len());
        }
        Command::EvalMos { scores, mos, out } => {
            let report = pipeline::eval_mos(scores, mos)?;
            if let Some(p) = out {
                tables::write_eval_report(p, &report)?;
            }
            print!("{}", tables::render_eval(&report));
        }
        Command::EvalRank { scores, manifest, threshold, out } => {
            let report = pipeline::eval_rank(scores, manifest, *threshold)?;
            if let Some(p) = out {
                tables::write_rank_report(p, &report)?;
            }
            print!("{}", tables::render_rank(&report));
        }
        Command::FeatureLoss { model, clean, estimate, grad_out } => {
            let scorer = Scorer::new(checkpoint::load_checkpoint(model)?)?;
            let fl = scorer.feature_loss(&wav::load_wav(clean)?, &wav::load_wav(estimate)?)?;
            if let Some(p) = grad_out {
                let bands = scorer.model().config().bands;
                let text: String = fl
                    .input_gradient
                    .chunks(bands)
                    .map(|row| row.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
                    .collect();
                tables::write_text(p, &text)?;
            }
            let norm = fl.input_gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
            println!("{:.6} {:.6}", fl.loss, norm);
        }
    }
    Ok(())
}
