//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{
    bvh_info, default_style_grid, evaluate, gendata, parse_style_grid, read_text, sample, train, CliError,
    EvalOptions, GendataOptions, SampleFormat, SampleOptions, TrainOptions, EXIT_CONFIG, EXIT_OK,
};
use crate::exec::Exec;
use crate::training::TrainConfig;

#[derive(Debug, Parser)]
#[command(name = "stylewalk", version, about = "Style-conditioned walking motion diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig, CliError> {
        let mut c = TrainConfig::default();
        if let Some(path) = &self.config {
            c.apply_text(&read_text(path)?)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Invalid(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            c.set(k.trim(), v.trim())?;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic walking dataset.
    Gendata {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// `name:stride,frequency,lean,bounce;...`; defaults to four built-in styles.
        #[arg(long)]
        styles: Option<String>,
        #[arg(long, default_value_t = 32)]
        per_style: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
    /// Train on a generated dataset or a directory of BVH files.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Draw motions for one (content, style) pair.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        content: usize,
        #[arg(long)]
        style: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: SampleFormat,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
    /// Score samples of every condition against the dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
    /// Print a summary of a BVH file.
    BvhInfo { path: PathBuf },
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Gendata { cfg, styles, per_style, out, sequential } => {
            let config = cfg.resolve()?;
            let styles = match styles {
                Some(spec) => parse_style_grid(&spec)?,
                None => default_style_grid(),
            };
            let n = gendata(&GendataOptions {
                styles,
                per_style,
                seed: config.seed,
                clip_len: config.clip_len,
                frame_time: config.frame_time,
                out: out.clone(),
                exec: exec(sequential),
            })?;
            println!("wrote {n} clips to {}", out.display());
        }
        Command::Train { cfg, data, out, epochs } => {
            let mut config = cfg.resolve()?;
            if let Some(e) = epochs {
                config.epochs = e;
                config.validate()?;
            }
            let s = train(&TrainOptions { config, data, out })?;
            let first = s.epoch_medians.first().copied().unwrap_or(f64::NAN);
            let last = s.epoch_medians.last().copied().unwrap_or(f64::NAN);
            println!("{} steps; median l_ddpm {first:.4} -> {last:.4}; checkpoint {}", s.steps, s.checkpoint.display());
        }
        Command::Sample { checkpoint, content, style, count, seed, format, out, sequential } => {
            let files = sample(&SampleOptions { checkpoint, content, style, count, seed, format, out, exec: exec(sequential) })?;
            for f in files {
                println!("{f}");
            }
        }
        Command::Eval { checkpoint, data, samples, seed, out, sequential } => {
            let report = evaluate(&EvalOptions { checkpoint, data, samples, seed, out, exec: exec(sequential) })?;
            for c in &report.conditions {
                for w in &c.warnings {
                    eprintln!("warning: {}/{}: {w}", c.content, c.style);
                }
                let fid = c.fidelity.as_ref().map_or("n/a".to_string(), |f| {
                    format!("{:.0}% within tolerance", 100.0 * f.fraction_within_tolerance)
                });
                println!("{}/{}: diversity {:.3}, fidelity {fid}", c.content, c.style, c.diversity);
            }
        }
        Command::BvhInfo { path } => print!("{}", bvh_info(&path)?),
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
