use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rpreg::regress::empirical_risk;
use rpreg_cli::runner::{build_model, training_sample};
use rpreg_cli::{load_dataset, run_experiment, save_dataset, CliError, ExperimentConfig, GridPoint};

#[derive(Parser)]
#[command(name = "rpreg", version, about = "Random projection tree regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point of an experiment and write results.csv and summary.md.
    Run {
        config: PathBuf,
        /// Grid points run at once.
        #[arg(long)]
        jobs: Option<usize>,
        /// Replace the configured seed list by this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write the training sample of the first grid point to a dataset file.
    Gen {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rebuild the model of `<config>:<seed>` and report its risk on a dataset.
    Eval {
        #[arg(long, value_name = "CONFIG:SEED")]
        model_seedspec: String,
        #[arg(long)]
        data: PathBuf,
    },
}

fn first_point(config: &ExperimentConfig, seed: Option<u64>) -> GridPoint {
    GridPoint {
        dim: config.dims[0],
        n: config.n_grid[0],
        seed: seed.unwrap_or(config.seeds[0]),
    }
}

fn parse_seedspec(spec: &str) -> Result<(PathBuf, u64), CliError> {
    let (path, seed) = spec
        .rsplit_once(':')
        .ok_or_else(|| CliError::Config(format!("seedspec '{spec}' is not <config>:<seed>")))?;
    let seed = seed
        .parse()
        .map_err(|_| CliError::Config(format!("seed '{seed}' in '{spec}' is not an integer")))?;
    Ok((PathBuf::from(path), seed))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::load(path).map_err(|e| match e {
        CliError::Io { .. } => CliError::Config(e.to_string()),
        other => other,
    })
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            jobs,
            seed,
            output_dir,
        } => {
            let mut config = load_config(&config)?;
            if let Some(s) = seed {
                config.seeds = vec![s];
            }
            if let Some(dir) = output_dir {
                config.output_dir = dir;
            }
            let report = run_experiment(&config, jobs)?;
            println!("wrote {} rows to {}", report.rows, report.csv.display());
            println!("summary in {}", report.summary.display());
        }
        Command::Gen { config, output, seed } => {
            let config = load_config(&config)?;
            let sample = training_sample(&config, first_point(&config, seed))?;
            save_dataset(&output, &sample.data)?;
            println!("wrote {} samples to {}", sample.data.len(), output.display());
        }
        Command::Eval { model_seedspec, data } => {
            let (path, seed) = parse_seedspec(&model_seedspec)?;
            let config = load_config(&path)?;
            let data = load_dataset(&data)?;
            let build = build_model(&config, first_point(&config, Some(seed)))?;
            if data.input_dim() != build.model.input_dim()
                || data.output_dim() != build.model.default_output().len()
            {
                return Err(CliError::Config(format!(
                    "dataset is x:{} y:{}, model is x:{} y:{}",
                    data.input_dim(),
                    data.output_dim(),
                    build.model.input_dim(),
                    build.model.default_output().len()
                )));
            }
            let risk = empirical_risk(&build.model, &data)?;
            println!("samples {}", data.len());
            println!("cells {}", build.model.frontier().size);
            println!("empirical_risk {risk}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
