use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cube_cli::{benchmark, exit, package_behind, TargetArg};
use cube_conformance::{run_suite, Level, SuiteError, Target};

/// Run the conformance suite against a benchmark and write a ComplianceReport.
#[derive(Parser)]
#[command(name = "cube-verify", version)]
struct Cli {
    /// `local:<benchmark-id>` or a benchmark endpoint URL.
    #[arg(long)]
    target: TargetArg,
    #[arg(long, default_value = "basic")]
    level: Level,
    /// Where to write the canonical report JSON.
    #[arg(long)]
    report: PathBuf,
}

fn main() -> ExitCode {
    cube_cli::init_logging();
    let cli: Cli = cube_cli::parse_args();
    ExitCode::from(run(cli) as u8)
}

fn run(cli: Cli) -> i32 {
    let target = match &cli.target {
        TargetArg::Local(id) => match benchmark(id) {
            Ok(package) => Target::local(package),
            Err(e) => {
                eprintln!("cube-verify: {e}");
                return exit::USAGE;
            }
        },
        TargetArg::Url(url) => match package_behind(url) {
            Ok(package) => {
                if package.is_none() {
                    log::warn!("no local package for {url}; checks that need debug hooks will fail");
                }
                Target::remote(url.clone(), package)
            }
            Err(e) => {
                eprintln!("cube-verify: target unreachable: {e}");
                return exit::TARGET_UNREACHABLE;
            }
        },
    };

    let report = match run_suite(target, cli.level) {
        Ok(report) => report,
        Err(SuiteError::TargetUnreachable(e)) => {
            eprintln!("cube-verify: target unreachable: {e}");
            return exit::TARGET_UNREACHABLE;
        }
    };
    for check in &report.checks {
        println!("{} {} ({}): {}", if check.passed { "PASS" } else { "FAIL" }, check.check_id, check.level.as_str(), check.detail);
    }
    println!("badges: {}", if report.badges.is_empty() { "none".to_owned() } else { report.badges.join(", ") });
    if let Err(e) = std::fs::write(&cli.report, report.canonical_bytes()) {
        eprintln!("cube-verify: cannot write {}: {e}", cli.report.display());
        return exit::FAILED;
    }
    if report.all_passed() {
        exit::OK
    } else {
        exit::FAILED
    }
}
