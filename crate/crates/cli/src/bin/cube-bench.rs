use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cube_cli::{benchmark, exit, parse_ports};
use cube_core::{canonical, ToolConfig};
use cube_kit::{start, StartError, StartOptions, DEFAULT_MAX_SESSIONS};

/// Serve a catalog benchmark over JSON-RPC, or print its debug configs.
#[derive(Parser)]
#[command(name = "cube-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the endpoint URL on the first line, then serve until interrupted.
    Serve {
        #[arg(long)]
        benchmark: String,
        /// Ports the benchmark and its task endpoints may bind, e.g. 8000-8100.
        #[arg(long)]
        ports: String,
        /// Defaults to the benchmark's first toolset.
        #[arg(long)]
        toolset: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_SESSIONS)]
        max_sessions: usize,
    },
    /// Print each debug task config as a canonical JSON line.
    DebugConfigs {
        #[arg(long)]
        benchmark: String,
    },
}

fn main() -> ExitCode {
    cube_cli::init_logging();
    let cli: Cli = cube_cli::parse_args();
    ExitCode::from(run(cli) as u8)
}

fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Serve { benchmark: id, ports, toolset, max_sessions } => {
            let (package, ports) = match (benchmark(&id), parse_ports(&ports)) {
                (Ok(p), Ok(ports)) => (p, ports),
                (Err(e), _) | (_, Err(e)) => {
                    eprintln!("cube-bench: {e}");
                    return exit::USAGE;
                }
            };
            let toolset = toolset.unwrap_or_else(|| package.toolsets().first().cloned().unwrap_or_default());
            let options = StartOptions::rpc(ports, ToolConfig::named(toolset)).max_sessions(max_sessions);
            let handle = match start(package, options) {
                Ok(started) => started.into_rpc().expect("rpc mode"),
                Err(e) => {
                    eprintln!("cube-bench: {e}");
                    return match e {
                        StartError::ToolConfigInvalid(_) => exit::TOOL_CONFIG_INVALID,
                        StartError::PortExhausted(_) => exit::PORT_EXHAUSTED,
                        _ => exit::FAILED,
                    };
                }
            };
            let mut stdout = std::io::stdout();
            let _ = writeln!(stdout, "{}", handle.url());
            let _ = stdout.flush();
            cube_cli::wait_for_signal();
            log::info!("shutting down");
            handle.stop();
            exit::OK
        }
        Command::DebugConfigs { benchmark: id } => {
            let package = match benchmark(&id) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("cube-bench: {e}");
                    return exit::USAGE;
                }
            };
            let mut out = std::io::stdout().lock();
            for config in package.debug_task_configs() {
                let line = canonical::to_string(&config).expect("debug configs are finite");
                if writeln!(out, "{line}").is_err() {
                    return exit::FAILED;
                }
            }
            exit::OK
        }
    }
}
