use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};

use olive::comm::{trace_line, Location};
use olive::semantics::{has_errors, Severity};
use olive::{check_file, AstProgram, Diagnostic, Interpreter, RunConfig};

/// Checker and interpreter for olive service programs.
#[derive(Parser)]
#[command(name = "olive", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and verify a program without running it
    Check {
        path: PathBuf,
        /// Also print warnings
        #[arg(short = 'W', long)]
        warnings: bool,
    },
    /// Run a program
    Run {
        path: PathBuf,
        /// Replace the Location of a port, e.g. RentService=socket://localhost:0
        #[arg(long = "location-override", value_name = "PORT=URI", value_parser = parse_override)]
        location_override: Vec<(String, String)>,
        /// Reply timeout for solicit-response, in milliseconds
        #[arg(long, value_name = "N")]
        timeout_ms: Option<u64>,
        /// Log every message sent or received to standard error
        #[arg(long)]
        trace: bool,
    },
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (port, uri) = s
        .split_once('=')
        .ok_or_else(|| format!("expected PORT=URI, got `{s}`"))?;
    Location::parse(uri).map_err(|e| e.to_string())?;
    Ok((port.to_owned(), uri.to_owned()))
}

const EXIT_SEMANTIC: u8 = 1;
const EXIT_LOAD: u8 = 2;

fn print_diagnostics(program: &AstProgram, diags: &[Diagnostic], warnings: bool) {
    for d in diags {
        if warnings || d.severity == Severity::Error {
            eprintln!("{}", d.render(program));
        }
    }
}

/// Loads and verifies; on failure returns the exit code to use.
fn load_checked(path: &Path, warnings: bool) -> Result<AstProgram, u8> {
    let (program, diags) = check_file(path).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_LOAD
    })?;
    print_diagnostics(&program, &diags, warnings);
    if has_errors(&diags) {
        return Err(EXIT_SEMANTIC);
    }
    Ok(program)
}

fn run(
    path: &Path,
    overrides: Vec<(String, String)>,
    timeout_ms: Option<u64>,
    trace: bool,
) -> Result<(), u8> {
    let program = load_checked(path, false)?;
    let mut config = RunConfig {
        location_overrides: overrides.into_iter().collect::<HashMap<_, _>>(),
        ..RunConfig::default()
    };
    if let Some(ms) = timeout_ms {
        config.timeout = Duration::from_millis(ms);
    }
    if trace {
        config.trace = Some(Arc::new(|dir, msg, bytes| eprintln!("{}", trace_line(dir, msg, bytes))));
    }
    let fail = |e: olive::RuntimeError| {
        eprintln!("error: {e}");
        EXIT_SEMANTIC
    };
    let interpreter = Interpreter::new(&program, config).map_err(fail)?;
    let handle = interpreter.start().map_err(fail)?;
    for (port, location) in handle.bound() {
        eprintln!("{port} listening on {location}");
    }
    handle.wait().map_err(fail)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { path, warnings } => load_checked(&path, warnings).map(drop),
        Command::Run {
            path,
            location_override,
            timeout_ms,
            trace,
        } => run(&path, location_override, timeout_ms, trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
