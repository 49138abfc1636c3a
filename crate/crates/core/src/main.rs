use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sgex::harness::{self, ExperimentSpec, OutputFormat};
use sgex::{Error, Result};

#[derive(Parser)]
#[command(name = "sgex", version, about = "Accelerated stochastic approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML file or a preset name.
    Run {
        spec: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Count both evaluations of each reused sample.
        #[arg(long)]
        double_count_oracle: bool,
        /// Replace a problem constant, e.g. `--override smoothness=10`.
        #[arg(long = "override", value_name = "CONST=VALUE")]
        overrides: Vec<String>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Recompute aggregates from the trials.csv files under a directory.
    Aggregate {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's TOML source.
    Show { name: String },
}

fn parse_override(spec: &mut ExperimentSpec, arg: &str) -> Result<()> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config {
            key: "override".into(),
            reason: format!("expected CONST=VALUE, got {arg:?}"),
        })?;
    let v: f64 = value.trim().parse().map_err(|_| Error::Config {
        key: key.trim().into(),
        reason: format!("not a number: {value:?}"),
    })?;
    spec.overrides.set(key.trim(), v)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            spec,
            trials,
            seed,
            out,
            format,
            double_count_oracle,
            overrides,
            workers,
        } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(t) = trials {
                if t == 0 {
                    return Err(Error::Config {
                        key: "trials".into(),
                        reason: "must be at least 1".into(),
                    });
                }
                spec.trials = t;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            spec.double_count_oracle |= double_count_oracle;
            for o in &overrides {
                parse_override(&mut spec, o)?;
            }
            let summaries = harness::execute(&spec, &out, format.into(), workers)?;
            let mut clean = true;
            for s in &summaries {
                println!("{}: {}/{} trials -> {}", s.label, s.trials - s.failures.len(), s.trials, s.dir.display());
                for f in &s.failures {
                    eprintln!("  trial {} failed: {}", f.trial, f.message);
                    clean = false;
                }
            }
            Ok(clean)
        }
        Command::Aggregate { dir, format } => {
            for p in harness::reaggregate(&dir, format.into())? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Presets { action } => {
            match action {
                PresetAction::List => {
                    for (name, _) in harness::presets() {
                        println!("{name}");
                    }
                }
                PresetAction::Show { name } => match harness::spec::preset_source(&name) {
                    Some(src) => print!("{src}"),
                    None => {
                        return Err(Error::Config {
                            key: "preset".into(),
                            reason: format!("unknown preset {name:?}"),
                        })
                    }
                },
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
