mod config;
mod manifest;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use styleinfuse::synth::{fixture, FixtureSpec};

use config::RunConfig;
use stages::{execute, CliError, Run, STAGES};

/// Settings written next to a generated fixture.
const FIXTURE_CONFIG: &str = include_str!("fixture.toml");

#[derive(Parser)]
#[command(name = "styleinfuse", version, about = "Learn audience style preferences from pairwise judgments and infuse them into generation")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed for every stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the corpora and copy them into the run directory.
    Ingest,
    /// Extract the feature matrix.
    Features,
    /// Fit the hierarchical correlation model per feature.
    FitBayes,
    /// Train the pairwise discriminator.
    TrainRanker,
    /// Add discriminator-scored pairs from the external corpus.
    Augment,
    /// Train the styled and baseline generators.
    TrainInfuse,
    /// Decode a continuation for every style document prompt.
    Generate,
    /// Compare styled and baseline generations.
    Evaluate,
    /// Write the forest plot and the markdown report.
    Report,
    /// Run every stage in order.
    Run,
    /// Write the synthetic pipeline fixture and its configuration.
    Fixture {
        dir: PathBuf,
    },
}

impl Command {
    fn stages(&self) -> Vec<&'static str> {
        let one = |s: &'static str| vec![s];
        match self {
            Command::Ingest => one("ingest"),
            Command::Features => one("features"),
            Command::FitBayes => one("fit-bayes"),
            Command::TrainRanker => one("train-ranker"),
            Command::Augment => one("augment"),
            Command::TrainInfuse => one("train-infuse"),
            Command::Generate => one("generate"),
            Command::Evaluate => one("evaluate"),
            Command::Report => one("report"),
            Command::Run => STAGES.to_vec(),
            Command::Fixture { .. } => vec![],
        }
    }
}

fn write_fixture(dir: &Path) -> anyhow::Result<()> {
    let f = fixture(&FixtureSpec::default())?;
    f.corpus.save_dir(dir.join("style"))?;
    f.external.save_dir(dir.join("external"))?;
    std::fs::write(dir.join("config.toml"), FIXTURE_CONFIG)?;
    Ok(())
}

fn load_run(cli: &Cli) -> Result<Run, CliError> {
    let (config, base) = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::Missing { artifact: "config".into(), path: path.clone() });
            }
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (RunConfig::load(path)?, base)
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    let seed = cli.seed.unwrap_or(config.seed);
    std::fs::create_dir_all(&cli.out).map_err(anyhow::Error::from)?;
    Ok(Run { dir: cli.out.clone(), config: config.with_seed(seed), base })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Fixture { dir } = &cli.command {
        return match write_fixture(dir) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        };
    }
    let result = load_run(&cli).and_then(|run| {
        for stage in cli.command.stages() {
            let summary = execute(&run, stage)?;
            println!("{stage}: {summary}");
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Missing { artifact, path }) => {
            eprintln!("error: missing {artifact} (expected at {})", path.display());
            ExitCode::from(2)
        }
        Err(CliError::Failed(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
