//! `wingfuse`: synthesize data sets, extract features, train and evaluate
//! wingbeat / camera / fusion classifiers, and export spectra for plotting.
//!
//! Errors are reported on stderr as one JSON object
//! `{"error": <kind>, "message": <text>}` with a non-zero exit status.
//! Set `WINGFUSE_VERBOSE=1` for progress messages on stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "wingfuse", version, about = "Insect identification from wingbeat and camera data")]
struct Cli {
    /// Run configuration (TOML). Defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityArg {
    Wingbeat,
    Image,
    Fusion,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Hann,
    Rect,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic data set (manifest, WAVs, descriptors, priors).
    Synth {
        /// Species profiles and counts (JSON); the built-in seven-species
        /// spec when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the wide feature table of a manifest as CSV.
    Featurize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier on the manifest's training split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        modality: ModalityArg,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Evaluate a model; writes the report JSON and a confusion-matrix CSV.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Confusion matrix CSV; defaults to the report path with a
        /// `.confusion.csv` suffix.
        #[arg(long)]
        confusion: Option<PathBuf>,
        /// Records to evaluate; overrides the config.
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
    },
    /// Run transit scenarios (JSONL) through the acquisition simulator.
    Simulate {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Welch PSD of a WAV file as `frequency_hz,psd` CSV.
    ExportPsd {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8192)]
        segment_len: usize,
        #[arg(long, default_value_t = 0.5)]
        overlap: f64,
        #[arg(long, value_enum, default_value = "hann")]
        window: WindowArg,
    },
    /// STFT spectrogram of a WAV file as `time_s,frequency_hz,power` CSV.
    ExportSpectrogram {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1024)]
        segment_len: usize,
        #[arg(long, default_value_t = 256)]
        hop: usize,
        #[arg(long, value_enum, default_value = "hann")]
        window: WindowArg,
    },
    /// Print the default run configuration as TOML.
    DefaultConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": commands::error_kind(&e), "message": commands::message(&e) });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
