use std::net::{IpAddr, Ipv4Addr};
use std::sync::Arc;

use cube_core::{CubeError, ToolConfig};

use crate::backend::{Backend, LocalProcessBackend};
use crate::host::{BenchmarkHost, TaskEndpoints, DEFAULT_MAX_SESSIONS};
use crate::local::LocalBenchmark;
use crate::ports::PortPool;
use crate::router;
use crate::server::{handle_rpc, Handler, RpcServer};

const BENCHMARK_SERVER_WORKERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Local,
    Rpc,
}

#[derive(Debug, Clone)]
pub struct StartOptions {
    pub available_ports: Vec<u16>,
    pub tool_config: ToolConfig,
    pub mode: Mode,
    pub max_sessions: usize,
    pub bind_ip: IpAddr,
}

impl StartOptions {
    pub fn local(tool_config: ToolConfig) -> Self {
        Self {
            available_ports: Vec::new(),
            tool_config,
            mode: Mode::Local,
            max_sessions: DEFAULT_MAX_SESSIONS,
            bind_ip: IpAddr::V4(Ipv4Addr::LOCALHOST),
        }
    }

    pub fn rpc(ports: impl IntoIterator<Item = u16>, tool_config: ToolConfig) -> Self {
        Self { available_ports: ports.into_iter().collect(), mode: Mode::Rpc, ..Self::local(tool_config) }
    }

    pub fn max_sessions(mut self, n: usize) -> Self {
        self.max_sessions = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StartError {
    #[error("invalid tool config: {0}")]
    ToolConfigInvalid(String),
    #[error("none of the available ports could be bound: {0:?}")]
    PortExhausted(Vec<u16>),
    #[error("setup failed: {0}")]
    SetupFailed(String),
    #[error("backend unsupported: {0}")]
    BackendUnsupported(String),
}

/// A started benchmark.
pub enum Started {
    Local(LocalBenchmark),
    Rpc(RpcHandle),
}

impl Started {
    pub fn into_local(self) -> Option<LocalBenchmark> {
        match self {
            Started::Local(b) => Some(b),
            Started::Rpc(_) => None,
        }
    }

    pub fn into_rpc(self) -> Option<RpcHandle> {
        match self {
            Started::Rpc(h) => Some(h),
            Started::Local(_) => None,
        }
    }
}

/// A benchmark served over JSON-RPC. Dropping the handle stops the server
/// and shuts every session down.
pub struct RpcHandle {
    url: String,
    host: Arc<BenchmarkHost>,
    server: Option<RpcServer>,
}

impl RpcHandle {
    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn host(&self) -> &Arc<BenchmarkHost> {
        &self.host
    }

    pub fn port(&self) -> u16 {
        self.server.as_ref().map(|s| s.addr().port()).unwrap_or_default()
    }

    /// Blocks the calling thread until the server stops.
    pub fn wait(mut self) {
        if let Some(server) = self.server.take() {
            server.join();
        }
    }

    pub fn stop(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        if let Some(server) = self.server.take() {
            server.stop();
            server.join();
        }
        let _ = self.host.shutdown(None);
    }
}

impl Drop for RpcHandle {
    fn drop(&mut self) {
        self.stop_inner();
    }
}

/// Starts a benchmark: validates the tool config, provisions through the
/// local backend, runs setup once and, in RPC mode, binds the benchmark
/// endpoint on the first bindable port. Remaining ports are kept for task
/// endpoints.
pub fn start(benchmark: Arc<dyn crate::BenchmarkImpl>, options: StartOptions) -> Result<Started, StartError> {
    benchmark.validate_tool_config(&options.tool_config).map_err(StartError::ToolConfigInvalid)?;
    LocalProcessBackend.provision(&benchmark.meta().resource_requirements).map_err(|e| match e {
        CubeError::BackendUnsupported(msg) => StartError::BackendUnsupported(msg),
        other => StartError::BackendUnsupported(other.to_string()),
    })?;

    let to_start_error = |e: CubeError| match e {
        CubeError::SetupFailed(msg) => StartError::SetupFailed(msg),
        other => StartError::SetupFailed(other.to_string()),
    };

    match options.mode {
        Mode::Local => {
            let host = BenchmarkHost::new(benchmark, options.tool_config, options.max_sessions, None)
                .map_err(to_start_error)?;
            Ok(Started::Local(LocalBenchmark::new(host)))
        }
        Mode::Rpc => {
            let pool = PortPool::new(options.available_ports.iter().copied());
            let slot: Arc<std::sync::OnceLock<Arc<BenchmarkHost>>> = Arc::default();
            let target = slot.clone();
            let handler: Handler = Arc::new(move |body: &[u8]| {
                handle_rpc(body, |method, params| match target.get() {
                    Some(host) => router::dispatch_benchmark(host, method, params),
                    None => Err(CubeError::Internal("benchmark is still starting".into())),
                })
            });
            let (_, server) = pool
                .acquire(|port| RpcServer::bind(options.bind_ip, port, BENCHMARK_SERVER_WORKERS, handler.clone()))
                .ok_or_else(|| StartError::PortExhausted(options.available_ports.clone()))?;
            let endpoints = TaskEndpoints { ip: options.bind_ip, ports: pool };
            let host = BenchmarkHost::new(benchmark, options.tool_config, options.max_sessions, Some(endpoints))
                .map_err(to_start_error)?;
            let _ = slot.set(host.clone());
            Ok(Started::Rpc(RpcHandle { url: server.url(), host, server: Some(server) }))
        }
    }
}
