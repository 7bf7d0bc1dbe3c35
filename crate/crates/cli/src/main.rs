use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use twospecies::harness::{run_experiment, Experiment, ExperimentConfig};
use twospecies::Error;

#[derive(Parser)]
#[command(name = "twospecies", version, about = "Two-species exclusion process workbench")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensemble runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq, Debug)]
enum Command {
    /// Run the KMC engine and write snapshots.
    Simulate,
    /// Solve the macroscopic equation.
    Pde,
    /// Compare KMC ensembles against the macroscopic equation.
    HydroCompare,
    /// Spectral gap sweep.
    Gap,
    /// Diffusion coefficient table.
    Diffusion,
    /// Finite-volume variance of the current.
    Variance,
    /// Green–Kubo diffusion matrix.
    GreenKubo,
    /// Draw configurations from an invariant measure.
    Sample,
}

impl Command {
    fn accepts(self, exp: &Experiment) -> bool {
        matches!(
            (self, exp),
            (Command::Simulate, Experiment::Simulate(_))
                | (Command::Pde, Experiment::Pde(_))
                | (Command::HydroCompare, Experiment::Hydro(_))
                | (Command::Gap, Experiment::Gap(_))
                | (Command::Diffusion, Experiment::Diffusion(_))
                | (Command::Variance, Experiment::Variance(_))
                | (Command::GreenKubo, Experiment::GreenKubo(_))
                | (Command::Sample, Experiment::Sample(_))
        )
    }
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let path = cli.global.config.as_ref().context("--config <path> is required")?;
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.global.out {
        cfg.output_dir = Some(out.display().to_string());
    }
    if !cli.command.accepts(&cfg.experiment) {
        anyhow::bail!(
            "subcommand {:?} does not run experiments of kind `{}`",
            cli.command,
            cfg.experiment.name()
        );
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            let code = if matches!(e, Error::Config { .. }) { EXIT_CONFIG } else { EXIT_FAIL };
            eprintln!("error: {e}");
            return ExitCode::from(code);
        }
    };
    let dir = PathBuf::from(cfg.output_dir.clone().unwrap_or_else(|| format!("out/{}", outcome.experiment)));
    match outcome.write(&dir, &cfg) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
        }
        // an unwritable output directory is a bad `--out`
        Err(e) => {
            eprintln!("error writing outputs: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    println!("{}: {}", outcome.experiment, if outcome.pass { "PASS" } else { "FAIL" });
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
