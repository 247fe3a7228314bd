use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varp::runner::{self, RunOptions};

#[derive(Parser)]
#[command(name = "varp", version, about = "Fit variational reference priors and evaluate them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// RNG seed (overrides VARP_SEED and the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl Overrides {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a pinned benchmark experiment and write a report.
    Reproduce {
        /// One of the ids listed by `varp reproduce --list`.
        #[arg(required_unless_present = "list")]
        id: Option<String>,
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write tidy CSVs for plotting from a run directory.
    EmitPlotData {
        dir: PathBuf,
        /// Figure id, or `all`.
        #[arg(default_value = "all")]
        figure: String,
    },
    /// Parse and check a config without running it.
    ValidateConfig { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides } => runner::run(&config, &overrides.options()).map(|dir| {
            println!("{}", dir.display());
        }),
        Command::Reproduce { list: true, .. } => {
            for id in runner::EXPERIMENTS {
                println!("{id}");
            }
            Ok(())
        }
        Command::Reproduce { id, overrides, .. } => {
            let id = id.unwrap_or_default();
            runner::reproduce(&id, &overrides.options()).map(|(dir, report)| {
                for line in report.lines() {
                    println!("{line}");
                }
                println!("{}", dir.display());
            })
        }
        Command::EmitPlotData { dir, figure } => runner::emit_plot_data(&dir, &figure).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
        Command::ValidateConfig { config } => runner::validate_config(&config).map(|_| println!("ok")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
