//! Command-line front end for the keypoint-to-text translation toolkit.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 input error,
//! 3 internal invariant violation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sign2text_core::corpus::Split;
use sign2text_core::error::Error;

use commands::*;
use config::FileConfig;

#[derive(Parser)]
#[command(
    name = "sign2text",
    version,
    about = "Keypoint-sequence to text translation: preprocessing, training, decoding, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic keypoint corpus with a manifest
    Synth {
        /// Output directory for keypoints/ and manifest.tsv
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        vocab_size: usize,
        #[arg(long, default_value_t = 200)]
        videos: usize,
        #[arg(long, default_value_t = 2)]
        min_len: usize,
        #[arg(long, default_value_t = 5)]
        max_len: usize,
        #[arg(long, default_value_t = 3)]
        frames_per_token: usize,
        #[arg(long, default_value_t = 0.5)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Normalize and resample every manifest video into a feature archive
    Preprocess {
        /// TOML config file (defaults used when omitted)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        /// Output archive path
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a translation model on the train split of a manifest
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        /// Feature archive produced by preprocess
        #[arg(long)]
        archive: PathBuf,
        /// Output directory for model.json, loss.csv, and the config echo
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode hypotheses for archived videos with a trained model
    Translate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        archive: PathBuf,
        /// Output hypotheses TSV (video_id<TAB>sentence)
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one manifest split (requires --manifest)
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
    },
    /// Score hypotheses against manifest references
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        hypotheses: PathBuf,
        #[arg(long, value_parser = parse_split, default_value = "test")]
        split: Split,
        /// Output metrics CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a frame-selection distribution and its kurtosis as CSV
    InspectDist {
        /// Source video length T
        #[arg(long = "T", visible_alias = "t")]
        t: usize,
        #[arg(long = "l_p", visible_alias = "lp", default_value_t = 17)]
        l_p: usize,
        /// Apply the unimodal median rearrangement before printing
        #[arg(long)]
        reordered: bool,
        /// Write to a file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::parse(s).map_err(|e| e.to_string())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        // the user asked for something invalid
        Error::ConfigInvalid(_)
        | Error::UnknownScheme(_)
        | Error::InvalidLp(_)
        | Error::InvalidProbability(_)
        | Error::InvalidN(_) => 1,
        // the inputs were unusable
        Error::FileNotFound(_)
        | Error::MalformedFile { .. }
        | Error::MalformedManifest { .. }
        | Error::EmptyCorpus
        | Error::LayoutMismatch(_)
        | Error::LengthMismatch(_)
        | Error::TooShort { .. }
        | Error::SequenceTooLong { .. }
        | Error::Io { .. } => 2,
        // everything else is a broken internal invariant
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Synth {
            out,
            vocab_size,
            videos,
            min_len,
            max_len,
            frames_per_token,
            noise_sigma,
            seed,
        } => cmd_synth(&SynthArgs {
            out,
            vocab_size,
            videos,
            min_len,
            max_len,
            frames_per_token,
            noise_sigma,
            seed,
        }),
        Cmd::Preprocess {
            config,
            manifest,
            out,
        } => {
            let cfg = FileConfig::load(config.as_deref())?;
            cmd_preprocess(&cfg, &manifest, &out)
        }
        Cmd::Train {
            config,
            manifest,
            archive,
            out,
        } => {
            let cfg = FileConfig::load(config.as_deref())?;
            cmd_train(&cfg, &manifest, &archive, &out)
        }
        Cmd::Translate {
            model,
            archive,
            out,
            manifest,
            split,
        } => cmd_translate(&model, &archive, &out, manifest.as_deref(), split),
        Cmd::Evaluate {
            manifest,
            hypotheses,
            split,
            out,
        } => cmd_evaluate(&manifest, &hypotheses, split, &out),
        Cmd::InspectDist {
            t,
            l_p,
            reordered,
            out,
        } => cmd_inspect_dist(t, l_p, reordered, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes, everything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
