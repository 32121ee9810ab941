use std::io::Write;
use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use cube_cli::exit;
use cube_core::canonical;
use cube_registry::{Registration, Registry, RegistryClient, RegistryError, RegistryFilter, RegistryServer, Runtime};

const DEFAULT_REGISTRY: &str = "http://127.0.0.1:8700";

/// Run or query a benchmark registry.
#[derive(Parser)]
#[command(name = "cube-registry", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the registry over HTTP until interrupted. Prints the base URL first.
    Serve {
        /// JSONL store file; created if missing.
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Leave the default hook in place, which fails every registration.
        #[arg(long)]
        no_verifier: bool,
    },
    /// List verified entries matching every given filter, one canonical JSON line each.
    Search {
        #[arg(long, env = "CUBE_REGISTRY", default_value = DEFAULT_REGISTRY)]
        registry: String,
        /// Accept entries with any of these runtimes (repeat or comma-separate).
        #[arg(long, value_delimiter = ',')]
        runtime: Vec<Runtime>,
        /// Upper bound on declared RAM in GB.
        #[arg(long)]
        max_ram: Option<f64>,
        #[arg(long)]
        gpu: Option<bool>,
        /// Require every listed badge (repeat or comma-separate).
        #[arg(long, value_delimiter = ',')]
        badge: Vec<String>,
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        include_pending: bool,
    },
    /// Register an entry from a JSON file and print the outcome.
    Register {
        #[arg(long, env = "CUBE_REGISTRY", default_value = DEFAULT_REGISTRY)]
        registry: String,
        #[arg(long)]
        entry: PathBuf,
    },
    /// Print one entry; the highest verified version when none is given.
    Get {
        #[arg(long, env = "CUBE_REGISTRY", default_value = DEFAULT_REGISTRY)]
        registry: String,
        id: String,
        version: Option<String>,
        #[arg(long)]
        include_pending: bool,
    },
}

fn main() -> ExitCode {
    cube_cli::init_logging();
    let cli: Cli = cube_cli::parse_args();
    ExitCode::from(run(cli) as u8)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", canonical::to_string(value).expect("registry payloads are finite"));
}

fn fail(e: RegistryError) -> i32 {
    eprintln!("cube-registry: {e}");
    match e {
        RegistryError::Transport(_) => exit::TARGET_UNREACHABLE,
        _ => exit::FAILED,
    }
}

fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Serve { store, port, bind, no_verifier } => {
            let registry = match Registry::open(&store) {
                Ok(r) => Arc::new(r),
                Err(e) => return fail(e),
            };
            if !no_verifier {
                registry.set_verification_hook(cube_cli::local_verification_hook());
            }
            let server = match RegistryServer::bind(registry, bind, port) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("cube-registry: cannot bind {bind}:{port}: {e}");
                    return exit::PORT_EXHAUSTED;
                }
            };
            let mut stdout = std::io::stdout();
            let _ = writeln!(stdout, "{}", server.url());
            let _ = stdout.flush();
            cube_cli::wait_for_signal();
            server.stop();
            server.join();
            exit::OK
        }
        Command::Search { registry, runtime, max_ram, gpu, badge, text, include_pending } => {
            let filter = RegistryFilter {
                runtime_any: (!runtime.is_empty()).then_some(runtime),
                max_ram_gb: max_ram,
                requires_gpu: gpu,
                badge_all: (!badge.is_empty()).then_some(badge),
                text,
                include_pending,
            };
            match RegistryClient::new(registry).query(&filter) {
                Ok(entries) => {
                    entries.iter().for_each(print_json);
                    exit::OK
                }
                Err(e) => fail(e),
            }
        }
        Command::Register { registry, entry } => {
            let parsed = std::fs::read_to_string(&entry)
                .map_err(|e| RegistryError::ValidationFailed { field: "entry".into(), reason: e.to_string() })
                .and_then(|text| {
                    serde_json::from_str(&text)
                        .map_err(|e| RegistryError::ValidationFailed { field: "entry".into(), reason: e.to_string() })
                })
                .and_then(Registration::from_value);
            match parsed.and_then(|reg| RegistryClient::new(registry).register(&reg)) {
                Ok(entry) => {
                    print_json(&entry);
                    if entry.is_verified() {
                        exit::OK
                    } else {
                        exit::FAILED
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Get { registry, id, version, include_pending } => {
            match RegistryClient::new(registry).get(&id, version.as_deref(), include_pending) {
                Ok(entry) => {
                    print_json(&entry);
                    exit::OK
                }
                Err(e) => fail(e),
            }
        }
    }
}
