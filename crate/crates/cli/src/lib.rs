//! Shared plumbing for the `cube-*` binaries.

use std::sync::Arc;

use cube_conformance::{run_suite, Level, Target as SuiteTarget};
use cube_harness::RemoteBenchmark;
use cube_kit::BenchmarkImpl;
use cube_registry::{Hardware, Registration, RegistryEntry, Runtime, VerificationHook};

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILED: i32 = 1;
    pub const TOOL_CONFIG_INVALID: i32 = 2;
    pub const PORT_EXHAUSTED: i32 = 3;
    pub const TARGET_UNREACHABLE: i32 = 4;
    /// Bad command line. Kept apart from 2, which clap would use by default.
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArgError {
    #[error("bad port range `{0}` (expected LO-HI, a single port, or a comma-separated list)")]
    Ports(String),
    #[error("unknown benchmark `{0}` (known: {known})", known = cube_benchmarks::catalog().join(", "))]
    UnknownBenchmark(String),
}

/// `8000-8100`, `8000` or `8000,8002,8004`.
pub fn parse_ports(spec: &str) -> Result<Vec<u16>, ArgError> {
    let bad = || ArgError::Ports(spec.to_owned());
    let mut ports = Vec::new();
    for part in spec.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u16 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u16 = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                ports.extend(lo..=hi);
            }
            None => ports.push(part.parse().map_err(|_| bad())?),
        }
    }
    if ports.is_empty() {
        return Err(bad());
    }
    Ok(ports)
}

pub fn benchmark(id: &str) -> Result<Arc<dyn BenchmarkImpl>, ArgError> {
    cube_benchmarks::by_id(id).ok_or_else(|| ArgError::UnknownBenchmark(id.to_owned()))
}

/// A `--target` value: `local:<benchmark-id>` or an endpoint URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetArg {
    Local(String),
    Url(String),
}

impl std::str::FromStr for TargetArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(id) = s.strip_prefix("local:") {
            return Ok(TargetArg::Local(id.to_owned()));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(TargetArg::Url(s.to_owned()));
        }
        Err(format!("`{s}` is neither local:<benchmark-id> nor an http URL"))
    }
}

/// The package behind a URL, looked up by the name the endpoint reports.
/// `Ok(None)` when the endpoint answers but the package is not known here.
pub fn package_behind(url: &str) -> Result<Option<Arc<dyn BenchmarkImpl>>, cube_core::CubeError> {
    use cube_kit::BenchmarkApi;
    let remote = RemoteBenchmark::connect(url)?;
    Ok(cube_benchmarks::by_id(&remote.info()?.name))
}

/// Registers a catalog benchmark as it describes itself.
pub fn registration_for(package: &dyn BenchmarkImpl) -> Registration {
    let meta = package.meta();
    let rc = &meta.resource_requirements;
    Registration {
        id: meta.name.clone(),
        name: meta.name.clone(),
        version: meta.version.clone(),
        authors: vec!["CUBE maintainers".into()],
        paper: None,
        package: meta.name.clone(),
        benchmark_license: "Apache-2.0".into(),
        package_license: None,
        content_notice: None,
        runtime: Runtime::Docker,
        hardware: Hardware { ram_gb: rc.ram_gb, gpu: rc.gpu, disk_gb: rc.disk_gb },
        task_count: package.task_descriptors().len() as u64,
    }
}

/// Verifies entries whose package is in the local catalog by running the
/// stress suite in-process. The package version must match the entry.
pub fn local_verification_hook() -> VerificationHook {
    Arc::new(|entry: &RegistryEntry| {
        let package = cube_benchmarks::by_id(&entry.package)
            .or_else(|| cube_benchmarks::by_id(&entry.id))
            .ok_or_else(|| format!("package `{}` is not available to the local verifier", entry.package))?;
        let version = package.meta().version;
        if version != entry.version {
            return Err(format!("package `{}` is version {version}, entry claims {}", entry.package, entry.version));
        }
        run_suite(SuiteTarget::local(package), Level::Stress).map_err(|e| e.to_string())
    })
}

/// Blocks until SIGINT or SIGTERM.
pub fn wait_for_signal() {
    let (tx, rx) = std::sync::mpsc::channel();
    if let Err(e) = ctrlc::set_handler(move || {
        let _ = tx.send(());
    }) {
        log::warn!("cannot install signal handler: {e}");
    }
    let _ = rx.recv();
}

pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
}

/// Parses arguments, exiting with [`exit::USAGE`] on errors (help and
/// version still exit 0).
pub fn parse_args<T: clap::Parser>() -> T {
    T::try_parse().unwrap_or_else(|e| {
        let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
        let _ = e.print();
        std::process::exit(code);
    })
}
