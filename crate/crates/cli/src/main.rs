use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracsys_cli::{config, run};

#[derive(Parser)]
#[command(name = "fracsys", version, about = "Solve linear multi-order fractional systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the system described by a TOML configuration file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Also run Talbot inversion and the Adams scheme and report deviations.
        #[arg(long)]
        verify: bool,
        /// Print the normalised configuration and exit.
        #[arg(long)]
        dump_config: bool,
        /// Output directory (overrides `output.dir`; default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Solve {
        config: path,
        verify,
        dump_config,
        out,
    } = cli.command;
    let result = run::load(&path).and_then(|cfg| {
        if dump_config {
            print!("{}", config::dump(&cfg));
            return Ok(None);
        }
        let dir = out
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        run::execute(&cfg, &dir, verify).map(Some)
    });
    match result {
        Ok(Some(o)) => {
            eprintln!(
                "{}: wrote {} and {}",
                o.method,
                o.trajectory.display(),
                o.report.display()
            );
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
