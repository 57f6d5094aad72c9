//! `nsb`: wavelet pyramid compression, neural band reconstruction and
//! class-conditional sampling from the command line.

mod commands;
mod config;
mod corpus;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Ctx, DecodeMode};
use config::RunConfig;
use error::{input, read, CliResult};

#[derive(Parser)]
#[command(name = "nsb", version, about = "Wavelet pyramid codec with learned band reconstruction")]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes the wavelet bands of an image as PPM views, or inverts such a directory.
    Transform {
        input: PathBuf,
        #[arg(long)]
        inverse: bool,
        #[arg(long)]
        wavelet: Option<String>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Ingests a corpus into per-level band datasets, a manifest and a fitted prior.
    MakeDataset {
        corpus: Option<PathBuf>,
    },
    /// Trains the band decoder for one level.
    Train {
        #[arg(long)]
        level: usize,
    },
    /// Trains the pixel-space refiner for one level.
    TrainPixel {
        #[arg(long)]
        level: usize,
    },
    /// Encodes an image to its low-pass latent.
    Encode {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decodes a latent with trained models, oracle bands or zero bands.
    Decode {
        input: PathBuf,
        #[arg(long, conflicts_with_all = ["oracle", "low_pass"])]
        models: Option<PathBuf>,
        /// Uses the true bands of this image.
        #[arg(long, value_name = "IMAGE", conflicts_with = "low_pass")]
        oracle: Option<PathBuf>,
        #[arg(long)]
        low_pass: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Draws class-conditional latents and decodes them.
    Sample {
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 1.0)]
        truncation: f64,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Draws held-out latents instead of prior samples.
        #[arg(long)]
        empirical: bool,
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Compares two image directories with feature statistics and pixel errors.
    Eval {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        recon: Option<PathBuf>,
    },
    /// Tabulates zero-detail reconstruction error of the wavelet and pixel pyramids.
    Compare {
        corpus: Option<PathBuf>,
    },
    /// Renders the synthetic toy corpus.
    GenCorpus {
        #[arg(long, default_value_t = 32)]
        per_class: usize,
        #[arg(long, default_value_t = 64)]
        extent: usize,
        dest: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::parse(&String::from_utf8_lossy(&read(p)?))?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| input(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Command::Transform { wavelet, levels, .. } = &cli.command {
        if let Some(w) = wavelet {
            cfg.wavelet = w.clone();
        }
        if let Some(l) = levels {
            cfg.levels = *l;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("NSB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| input(format!("NSB_THREADS must be a number, got {v:?}")))?;
        // Fails only if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    let ctx = Ctx { cfg: load_config(&cli)? };
    match &cli.command {
        Command::Transform {
            input,
            inverse,
            output,
            ..
        } => commands::transform(&ctx, input, *inverse, output.as_deref()),
        Command::MakeDataset { corpus } => commands::make_dataset(&ctx, corpus.as_deref()),
        Command::Train { level } => commands::train(&ctx, *level),
        Command::TrainPixel { level } => commands::train_pixel(&ctx, *level),
        Command::Encode { input, output } => commands::encode_cmd(&ctx, input, output.as_deref()),
        Command::Decode {
            input,
            models,
            oracle,
            low_pass,
            output,
        } => {
            let mode = match (oracle, low_pass) {
                (Some(o), _) => DecodeMode::Oracle(o),
                (None, true) => DecodeMode::LowPass,
                (None, false) => DecodeMode::Models(models.as_deref()),
            };
            commands::decode_cmd(&ctx, input, mode, output.as_deref())
        }
        Command::Sample {
            class,
            truncation,
            n,
            empirical,
            models,
        } => commands::sample_cmd(&ctx, class, *truncation, *n, *empirical, models.as_deref()),
        Command::Eval {
            real,
            generated,
            recon,
        } => commands::eval_cmd(&ctx, real, generated, recon.as_deref()),
        Command::Compare { corpus } => commands::compare_cmd(&ctx, corpus.as_deref()),
        Command::GenCorpus {
            per_class,
            extent,
            dest,
        } => commands::gen_corpus(&ctx, *per_class, *extent, dest.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
