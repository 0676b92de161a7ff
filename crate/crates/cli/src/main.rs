use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use ossdoorway_cli::{commands, CliError};

/// Gamified quests that walk newcomers through their first open-source
/// contribution.
#[derive(Debug, Parser)]
#[command(name = "ossdoorway", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the webhook service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Open a learner's quest issues and publish their first dashboard.
    Enroll {
        #[arg(long)]
        user: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay a scripted learner session against the simulated host.
    Simulate {
        #[arg(long)]
        script: PathBuf,
        /// Service config supplying the catalog and bot login; built-in
        /// defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summarize a pre/post questionnaire CSV.
    Report {
        #[arg(long)]
        dataset: PathBuf,
        /// Column that splits participants into two groups.
        #[arg(long, default_value = "segment")]
        segment: String,
        /// Write the markdown here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = match cli.command {
        Command::Serve { config } => return commands::serve(&config),
        Command::Enroll { user, config } => commands::enroll(&user, &config)?,
        Command::Simulate { script, config } => commands::simulate(&script, config.as_deref())?,
        Command::Report {
            dataset,
            segment,
            output,
        } => {
            let md = commands::report(&dataset, &segment)?;
            if let Some(path) = output {
                std::fs::write(&path, md)
                    .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
                return Ok(());
            }
            md
        }
    };
    print!("{out}");
    Ok(())
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
