//! `hedgerow`: client, server and benchmark commands for encrypted
//! inference over ternary genomic features.

mod commands;
mod error;
mod exchange;
mod keys;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hedgerow::pipeline::EncryptedPart;

use crate::error::{exit_code, CliError};

#[derive(Parser, Debug)]
#[command(name = "hedgerow", version, about = "Encrypted SVM and tree-ensemble inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate parameters and keys (client).
    Keygen(KeygenArgs),
    /// Generate a synthetic ensemble, SVM and labelled dataset.
    Gen(GenArgs),
    /// Build the public feature layout from the model(s).
    Layout(LayoutArgs),
    /// Pack and encrypt samples (client).
    Encrypt(EncryptArgs),
    /// Evaluate a model on encrypted samples (server; public keys only).
    Infer(InferArgs),
    /// Decrypt results and write the prediction report (client).
    Decrypt(DecryptArgs),
    /// Run the whole pipeline in-process on synthetic data and report timings.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct KeygenArgs {
    /// svm-d1, xgb-d2 or xgb-encmodel-d3.
    #[arg(long)]
    pub preset: String,
    /// Seed text; omit for fresh system randomness.
    #[arg(long)]
    pub seed: Option<String>,
    /// Client key directory (includes the secret key).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a server key directory without the secret key.
    #[arg(long)]
    pub server_out: Option<PathBuf>,
    /// Replace the preset's slot-sum widths (repeatable).
    #[arg(long = "sum-width")]
    pub sum_widths: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 11)]
    pub classes: usize,
    #[arg(long, default_value_t = 128)]
    pub trees: usize,
    #[arg(long, default_value_t = 2048)]
    pub features: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("models").required(true).multiple(true).args(["model", "svm"]))]
#[command(group = clap::ArgGroup::new("parameters").required(true).args(["keys", "preset"]))]
pub struct LayoutArgs {
    /// Tree ensemble JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// SVM JSON.
    #[arg(long)]
    pub svm: Option<PathBuf>,
    /// Key directory whose params.txt fixes the slot count.
    #[arg(long)]
    pub keys: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EncryptArgs {
    #[arg(long)]
    pub model_layout: PathBuf,
    /// Headerless CSV of copy-number values.
    #[arg(long)]
    pub data: PathBuf,
    /// The CSV's last column is a class label (ignored here).
    #[arg(long)]
    pub label_column: bool,
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed text; omit for fresh system randomness.
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Svm,
    Xgb,
    XgbEncmodel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PartArg {
    Splits,
    Leaves,
}

impl From<PartArg> for EncryptedPart {
    fn from(p: PartArg) -> Self {
        match p {
            PartArg::Splits => EncryptedPart::Splits,
            PartArg::Leaves => EncryptedPart::Leaves,
        }
    }
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Model half encrypted by the server in xgb-encmodel mode.
    #[arg(long, value_enum, default_value = "splits")]
    pub encrypted: PartArg,
    /// Ensemble JSON for tree modes, SVM JSON for svm.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Server key directory: params, public and evaluation keys only.
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed text for encrypting the model in xgb-encmodel mode.
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Args, Debug)]
pub struct DecryptArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub keys: PathBuf,
    /// Per-sample predictions and confidences (CSV).
    #[arg(long)]
    pub report: PathBuf,
    /// Labelled CSV dataset; enables microAUC and accuracy.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Metrics summary (JSON).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    Svm,
    Xgb,
    XgbEncmodel,
    All,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub mode: BenchMode,
    /// Encrypted model half for xgb-encmodel; `all` runs both.
    #[arg(long, value_enum)]
    pub encrypted: Option<PartArg>,
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value = "hedgerow")]
    pub seed: String,
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 11)]
    pub classes: usize,
    #[arg(long, default_value_t = 128)]
    pub trees: usize,
    #[arg(long, default_value_t = 2048)]
    pub features: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("HEDGEROW_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::usage(format!("HEDGEROW_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Keygen(a) => commands::keygen(&a),
        Command::Gen(a) => commands::gen(&a),
        Command::Layout(a) => commands::layout(&a),
        Command::Encrypt(a) => commands::encrypt(&a),
        Command::Infer(a) => commands::infer(&a),
        Command::Decrypt(a) => commands::decrypt(&a),
        Command::Bench(a) => commands::bench(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
