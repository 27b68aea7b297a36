use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cachepower::{parse_spec, run_sweep, run_verify, Error, RunSpec};

/// Power-memory bounds for cache-aided Gaussian broadcast channels.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the cache size and write bounds and gaps as CSV.
    Sweep {
        spec: PathBuf,
        /// Output file, overriding the run file's `output` key.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the exhaustive delivery and decentralized mass checks.
    Verify { spec: PathBuf },
}

const EXIT_INVALID: u8 = 1;
const EXIT_VERIFY: u8 = 2;

fn load(path: &PathBuf) -> Result<RunSpec, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_INVALID)
    })?;
    parse_spec(&text).map_err(|e| fail(&e))
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_verification_failure() {
        EXIT_VERIFY
    } else {
        EXIT_INVALID
    })
}

fn verify(spec: &RunSpec) -> ExitCode {
    match run_verify(spec) {
        Ok(summary) => {
            println!("{summary}");
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY)
            }
        }
        Err(e) => fail(&e),
    }
}

fn configure_threads() {
    let Ok(value) = std::env::var("CACHEPOWER_THREADS") else {
        return;
    };
    match value.trim().parse::<usize>() {
        Ok(0) => {}
        Ok(n) => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Err(_) => eprintln!("warning: ignoring CACHEPOWER_THREADS={value}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match cli.command {
        Command::Sweep { spec, output } => {
            let spec = match load(&spec) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let csv = match run_sweep(&spec) {
                Ok(csv) => csv,
                Err(e) => return fail(&e),
            };
            match output.or_else(|| spec.output.clone()) {
                Some(path) => {
                    if let Err(e) = fs::write(&path, &csv) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(EXIT_INVALID);
                    }
                }
                None => print!("{csv}"),
            }
            if spec.verify {
                return verify(&spec);
            }
            ExitCode::SUCCESS
        }
        Command::Verify { spec } => match load(&spec) {
            Ok(s) => verify(&s),
            Err(code) => code,
        },
    }
}
