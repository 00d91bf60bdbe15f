//! `extremal` command-line tool.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 numeric
//! failure (including reproduction rows outside their bands), 3 I/O or
//! malformed input file.

mod commands;
mod manifest;
mod svg;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use extremal::nnet::Activation;
use extremal::optim::BatchSize;

#[derive(Debug, Parser)]
#[command(
    name = "extremal",
    version,
    about = "Fit a surrogate network and search for the inputs that extremize it"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the pipeline stages.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random draw of this stage.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Main output file. Defaults to a fixed name in $EXTREMAL_OUT_DIR or the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON configuration file or earlier report; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the four-input toy dataset to CSV.
    Generate(GenerateArgs),
    /// Fit a network to a CSV dataset.
    Train(TrainArgs),
    /// Freeze a trained network and descend on its input.
    Extremize(ExtremizeArgs),
    /// Run the toy pipeline over several seeds and compare medians with reference values.
    Reproduce(ReproduceArgs),
    /// Draw data scatters, model slices and the training loss curve as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of samples.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Option<u64>,
    /// Standard deviation of the additive output noise.
    #[arg(long)]
    pub noise_std: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training data CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Minibatch size, or `full`.
    #[arg(long, value_parser = parse_batch)]
    pub batch_size: Option<BatchSize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Layers as `width:activation`, e.g. `64:tanh,64:tanh,1:identity`.
    #[arg(long, value_parser = parse_architecture)]
    pub arch: Option<Vec<(usize, Activation)>>,
}

#[derive(Debug, Args)]
pub struct ExtremizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trained model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training data, needed for data statistics and data-based starts.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Constraint file. Defaults to the toy constraints.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub restarts: Option<u64>,
    /// Step size.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Write the descent path of the best restart to this CSV.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of seeds, counted up from `--seed`.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: Option<u64>,
    /// Smaller dataset and budgets with relaxed bands.
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Trained model; without it only the data is drawn.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training report with the loss history. Defaults to the one next to the model.
    #[arg(long)]
    pub train_report: Option<PathBuf>,
    /// Output directory.
    #[arg(long = "out-dir", visible_alias = "out")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_batch(s: &str) -> Result<BatchSize, String> {
    if s.eq_ignore_ascii_case("full") {
        return Ok(BatchSize::FULL);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer or `full`, got `{s}`")),
        Ok(n) => Ok(BatchSize::Size(n)),
    }
}

fn parse_architecture(s: &str) -> Result<Vec<(usize, Activation)>, String> {
    s.split(',')
        .map(|layer| {
            let (width, act) = layer
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("layer `{layer}` is not `width:activation`"))?;
            let width = width
                .parse::<usize>()
                .map_err(|_| format!("bad layer width `{width}`"))?;
            let act = act.parse::<Activation>().map_err(|e| e.to_string())?;
            Ok((width, act))
        })
        .collect()
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(extremal::Error),
    /// The run completed but its checks did not pass.
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use extremal::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Failed(_) => 2,
            CliError::Core(e) => match e {
                E::Numeric(_) | E::NonFiniteIterate { .. } | E::Divergence { .. } => 2,
                E::Io { .. } | E::Csv { .. } | E::Parse { .. } | E::Consistency(_) => 3,
                _ => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<extremal::Error> for CliError {
    fn from(e: extremal::Error) -> Self {
        CliError::Core(e)
    }
}

pub fn warn(message: &str) {
    eprintln!("warning: {message}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Extremize(a) => commands::extremize(a),
        Command::Reproduce(a) => commands::reproduce(a),
        Command::Plot(a) => commands::plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_sizes() {
        assert_eq!(parse_batch("full"), Ok(BatchSize::FULL));
        assert_eq!(parse_batch("16"), Ok(BatchSize::Size(16)));
        assert!(parse_batch("0").is_err());
        assert!(parse_batch("many").is_err());
    }

    #[test]
    fn architectures() {
        assert_eq!(
            parse_architecture("64:tanh, 1:identity"),
            Ok(vec![(64, Activation::Tanh), (1, Activation::Identity)])
        );
        assert!(parse_architecture("64").is_err());
        assert!(parse_architecture("8:gelu").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(
            CliError::Core(extremal::Error::Divergence { epoch: 3 }).exit_code(),
            2
        );
        assert_eq!(
            CliError::Core(extremal::Error::Config("x".into())).exit_code(),
            1
        );
        let io = extremal::Error::Io {
            path: "a".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        assert_eq!(CliError::Core(io).exit_code(), 3);
    }

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
