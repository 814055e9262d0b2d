//! The `occgen` command line: dataset QA, splitting, per-shape fitting,
//! denoiser training, sampling, evaluation and the review service.

pub mod config;
mod error;
pub mod manifest;
pub mod pipeline;
pub mod qa;
pub mod repro;
pub mod split;

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, Result};
use manifest::{Manifest, Split};

#[derive(Debug, Parser)]
#[command(name = "occgen", version, about = "Occupancy-network shape generation pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Dataset manifest (survey manifest for `serve`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic stage of the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Single-threaded execution; outputs are bitwise reproducible.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quality report and manifest for a directory of meshes.
    Qa {
        input: PathBuf,
    },
    /// Seeded 80/5/15 partition of the Usable entries.
    Split,
    /// Fit one occupancy MLP per Usable entry (resumable).
    Fit {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the weight-space denoiser on the train split.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Sample shapes from a trained denoiser.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Set metrics of generated shapes against a manifest split.
    Eval {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Run the review-survey HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, env = "OCCGEN_ADMIN_TOKEN")]
        admin_token: Option<String>,
        #[arg(long, default_value = "labels.jsonl")]
        store: PathBuf,
        /// Directory with the survey client's static files.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

fn required_manifest(common: &Common) -> Result<PathBuf> {
    common
        .manifest
        .clone()
        .ok_or_else(|| CliError::Usage("this command needs --manifest <file>".into()))
}

fn out_dir(common: &Common) -> PathBuf {
    common.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

/// Executes one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    match cli.command {
        Command::Qa { input } => {
            let manifest = common.manifest.clone().unwrap_or_else(|| out_dir(common).join("manifest.json"));
            let (m, summary) = qa::run_qa(&input, &manifest)?;
            print!("{}", summary.table());
            println!("manifest: {} ({} entries)", manifest.display(), m.entries.len());
        }
        Command::Split => {
            let path = required_manifest(common)?;
            let mut m = Manifest::load(&path)?;
            let (train, val, test) = split::assign_splits(&mut m, common.seed.unwrap_or(0))?;
            m.save(&path)?;
            println!("train {train}, val {val}, test {test}");
        }
        Command::Fit { epochs } => {
            if let Some(e) = epochs {
                cfg.fit.epochs = e;
            }
            let s = pipeline::run_fit(&required_manifest(common)?, &out_dir(common), &cfg, common.deterministic)?;
            println!("fitted {}, already present {}, failed {}", s.fitted, s.skipped, s.failed.len());
            for (id, err) in &s.failed {
                println!("  {id}: {err}");
            }
        }
        Command::Train { epochs } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let status = pipeline::run_train(&required_manifest(common)?, &out_dir(common), &cfg, common.deterministic)?;
            println!("train: {status:?}");
        }
        Command::Sample {
            checkpoint,
            count,
            steps,
            eta,
            resolution,
        } => {
            if let Some(c) = count {
                cfg.sample.count = c;
            }
            if let Some(s) = steps {
                cfg.sample.ddim_steps = s;
            }
            if let Some(e) = eta {
                cfg.sample.eta = e;
            }
            if let Some(r) = resolution {
                cfg.resolution = r;
            }
            let (status, entries) = pipeline::run_sample(&checkpoint, &out_dir(common), &cfg, common.deterministic)?;
            let empty = entries.iter().filter(|e| e.empty_surface).count();
            println!("sample: {status:?}, {} shapes ({empty} empty)", entries.len());
        }
        Command::Eval { generated, split, points } => {
            if let Some(p) = points {
                cfg.set_points = p;
            }
            let seed = common.seed.unwrap_or(0);
            let r = pipeline::run_eval(&generated, &required_manifest(common)?, split.into(), &out_dir(common), &cfg, seed)?;
            println!("{}", serde_json::to_string_pretty(&r.set)?);
        }
        Command::Serve {
            port,
            host,
            admin_token,
            store,
            ui_dir,
        } => {
            let cfg = occgen_review::ServeConfig {
                manifest: common.manifest.clone(),
                store,
                addr: SocketAddr::new(host, port),
                admin_token,
                ui_dir,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(occgen_review::serve(cfg))?;
        }
    }
    Ok(())
}
