use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use domsplit::config::parse_config;
use domsplit::run::run_file;

const OUTPUT_DIR_ENV: &str = "DOMSPLIT_OUTPUT_DIR";
const THREADS_ENV: &str = "DOMSPLIT_THREADS";

#[derive(Parser)]
#[command(name = "domsplit", version, about = "Dominated-splitting diagnostics for cocycles over subshifts of finite type")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute the analysis commands of a configuration and write the report.
    Run {
        config: PathBuf,
        /// Output directory; takes precedence over the environment and the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
    /// Print the configuration, report and CSV reference.
    Schema,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot configure thread pool: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match cli.command {
        Cmd::Schema => {
            print!("{}", domsplit::SCHEMA);
            ExitCode::SUCCESS
        }
        Cmd::Validate { config } => {
            let res = std::fs::read_to_string(&config)
                .map_err(domsplit::Error::from)
                .and_then(|t| parse_config(&t));
            match res {
                Ok(cfg) => {
                    println!("ok: {} command(s)", cfg.analysis.len());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Run { config, output_dir } => {
            let (cfg, out) = match run_file(&config) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let dir = output_dir
                .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            if let Err(e) = out.write_to(&dir) {
                eprintln!("error: cannot write to {}: {e}", dir.display());
                return ExitCode::from(1);
            }
            if out.rejected {
                eprintln!("rejected: an analysis requirement was not met; see {}", dir.join("report.json").display());
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
