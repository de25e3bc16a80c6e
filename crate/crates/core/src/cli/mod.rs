//! Command-line front end.
//!
//! Every command takes its settings from flags, optionally layered over a
//! TOML file (`--config`, one table per command, keys spelled like the
//! flags). Outputs land in `--out-dir`, else `$ARVAE_OUT_DIR`, else the
//! working directory, each with a `.manifest.toml` describing the run.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime failure.

mod commands;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OUT_DIR_ENV: &str = "ARVAE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "arvae", version, about = "Attribute-regularized VAE experiments")]
pub struct Cli {
    /// TOML file with a table per command (`[train]`, `[eval]`, ...).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for outputs; overrides $ARVAE_OUT_DIR.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    GenData(GenDataArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Score a checkpoint with the metric suite.
    Eval(EvalArgs),
    /// Decode sweeps of one latent code.
    Traverse(TraverseArgs),
    /// Attribute values over a 2-d latent grid.
    Surface(SurfaceArgs),
    /// Train and evaluate over a gamma × delta grid.
    Sweep(SweepArgs),
    /// Inputs next to their reconstructions.
    Reconstruct(ReconstructArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Traverse(_) => "traverse",
            Command::Surface(_) => "surface",
            Command::Sweep(_) => "sweep",
            Command::Reconstruct(_) => "reconstruct",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenDataArgs {
    /// shapes | measures
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Image side in pixels (shapes).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<usize>,
    /// Per-tick onset probability (measures).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub onset_prob: Option<f64>,
    /// Probability a sounding note is held (measures).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hold_prob: Option<f64>,
    /// Largest pitch step between onsets (measures).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<u8>,
    /// Output file name.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Dataset used for the logged reconstruction accuracy.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<PathBuf>,
    /// Regularized attributes, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<String>>,
    /// Latent dimension for each attribute (default: 0, 1, ...).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Latent code fed to the regularizer: sampled | mean.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reg_latent: Option<String>,
    /// Base name of the checkpoint, log and manifest.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Attributes to score (default: the regularized ones, else all).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    /// Score SCC with |ρ|.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absolute_scc: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TraverseArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Dataset holding the anchor example.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    /// Attributes to traverse, comma separated (default: the regularized ones).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<String>>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Traverse the dimension with the highest MI instead of the regularized one.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select_by_mi: Option<bool>,
    /// Output file prefix.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SurfaceArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    /// The second (y-axis) latent dimension.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_dim: Option<usize>,
    /// Grid points per axis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Seed for the fixed codes of the remaining dimensions.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Dataset used to pick the x dimension by MI (with --select-by-mi).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select_by_mi: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Examples held out (from the end of the dataset) for evaluation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ReconstructArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

/// Overlays the command's flags on its table from the config file.
fn layered<A: Serialize + DeserializeOwned>(
    flags: &A,
    file: Option<&toml::Table>,
    section: &str,
) -> Result<A> {
    let mut merged = match file.and_then(|t| t.get(section)) {
        Some(toml::Value::Table(t)) => t.clone(),
        Some(_) => return Err(Error::usage(format!("config entry [{section}] is not a table"))),
        None => toml::Table::new(),
    };
    let ours = toml::Table::try_from(flags).map_err(|e| Error::usage(e.to_string()))?;
    merged.extend(ours);
    merged
        .try_into()
        .map_err(|e: toml::de::Error| Error::usage(format!("config [{section}]: {}", e.message())))
}

pub(crate) fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::usage(format!("--{flag} is required")))
}

/// Per-run context: where outputs go and what the manifest records.
pub(crate) struct Run<'a> {
    pub out_dir: PathBuf,
    pub command: &'static str,
    pub out: &'a mut dyn Write,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
    config: &'a C,
}

#[derive(Clone, Debug, Serialize)]
pub(crate) struct InputRecord {
    pub role: String,
    pub path: String,
    pub digest: String,
}

impl InputRecord {
    pub fn new(role: &str, path: &Path, digest: String) -> Self {
        InputRecord {
            role: role.into(),
            path: path.display().to_string(),
            digest,
        }
    }
}

impl Run<'_> {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.path(name), bytes).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("cannot write {}: {e}", self.path(name).display()),
            ))
        })
    }

    /// Writes `<stem>.manifest.toml`.
    pub fn manifest<C: Serialize>(
        &self,
        stem: &str,
        config: &C,
        inputs: Vec<InputRecord>,
        outputs: &[String],
    ) -> Result<()> {
        let m = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            inputs,
            outputs: outputs.to_vec(),
            config,
        };
        let text = toml::to_string(&m).map_err(|e| Error::format(e.to_string()))?;
        self.write(&format!("{stem}.manifest.toml"), text.as_bytes())
    }

    pub fn say(&mut self, line: impl AsRef<str>) -> Result<()> {
        writeln!(self.out, "{}", line.as_ref())?;
        Ok(())
    }
}

fn print_config<C: Serialize>(out: &mut dyn Write, command: &str, config: &C) -> Result<()> {
    let mut t = toml::Table::new();
    t.insert(
        command.to_string(),
        toml::Value::try_from(config).map_err(|e| Error::format(e.to_string()))?,
    );
    write!(out, "{}", toml::to_string(&t).map_err(|e| Error::format(e.to_string()))?)?;
    Ok(())
}

/// Runs one parsed invocation.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let file = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::usage(format!("cannot read config {}: {e}", p.display())))?;
            Some(
                text.parse::<toml::Table>()
                    .map_err(|e| Error::usage(format!("bad config {}: {}", p.display(), e.message())))?,
            )
        }
        None => None,
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let name = cli.command.name();
    let file = file.as_ref();
    let mut run = Run {
        out_dir,
        command: name,
        out,
    };
    macro_rules! dispatch {
        ($args:expr, $resolve:path, $cmd:path) => {{
            let resolved = $resolve(layered($args, file, name)?)?;
            if cli.dry_run {
                return print_config(run.out, name, &resolved);
            }
            fs::create_dir_all(&run.out_dir)?;
            $cmd(&mut run, &resolved)
        }};
    }
    match &cli.command {
        Command::GenData(a) => dispatch!(a, commands::resolve_gen_data, commands::gen_data),
        Command::Train(a) => dispatch!(a, commands::resolve_train, commands::train),
        Command::Eval(a) => dispatch!(a, commands::resolve_eval, commands::eval),
        Command::Traverse(a) => dispatch!(a, commands::resolve_traverse, commands::traverse),
        Command::Surface(a) => dispatch!(a, commands::resolve_surface, commands::surface),
        Command::Sweep(a) => dispatch!(a, commands::resolve_sweep, commands::sweep),
        Command::Reconstruct(a) => {
            dispatch!(a, commands::resolve_reconstruct, commands::reconstruct)
        }
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
/// Messages go to `out`, errors to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "arvae: {e}");
            exit_code(&e)
        }
    }
}
