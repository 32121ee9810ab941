use std::net::TcpListener;
use std::sync::Arc;

use cube_core::{BenchmarkInfo, ToolConfig};
use cube_harness::RemoteBenchmark;
use cube_kit::{start, BenchmarkApi, BenchmarkImpl, RpcHandle, StartError, StartOptions};

use crate::SuiteError;

/// Ports handed to a package the suite serves itself: enough for the
/// benchmark endpoint plus the largest session count any check opens.
const SERVED_PORTS: usize = 80;

/// What to check.
#[derive(Clone)]
pub enum Target {
    /// A package run in-process.
    Local { package: Arc<dyn BenchmarkImpl>, tool_config: ToolConfig },
    /// A package served over loopback RPC by the suite itself.
    Served { package: Arc<dyn BenchmarkImpl>, tool_config: ToolConfig },
    /// A running endpoint. `package` supplies the debug hooks and toolsets
    /// the wire cannot carry.
    Remote { url: String, package: Option<Arc<dyn BenchmarkImpl>> },
}

impl Target {
    pub fn local(package: Arc<dyn BenchmarkImpl>) -> Self {
        let tool_config = default_tool_config(package.as_ref());
        Target::Local { package, tool_config }
    }

    pub fn served(package: Arc<dyn BenchmarkImpl>) -> Self {
        let tool_config = default_tool_config(package.as_ref());
        Target::Served { package, tool_config }
    }

    pub fn remote(url: impl Into<String>, package: Option<Arc<dyn BenchmarkImpl>>) -> Self {
        Target::Remote { url: url.into(), package }
    }

    pub(crate) fn open(self) -> Result<Suite, SuiteError> {
        let unreachable = |e: &dyn std::fmt::Display| SuiteError::TargetUnreachable(e.to_string());
        let (api, holder, package, tool_config, launch_rpc): (Box<dyn BenchmarkApi>, _, _, _, _) = match self {
            Target::Local { package, tool_config } => {
                let started = start(package.clone(), StartOptions::local(tool_config.clone()))
                    .map_err(|e| unreachable(&e))?;
                let bench = started.into_local().expect("local mode");
                (Box::new(bench), None, Some(package), Some(tool_config), false)
            }
            Target::Served { package, tool_config } => {
                let handle = serve(package.clone(), tool_config.clone(), SERVED_PORTS).map_err(|e| unreachable(&e))?;
                let remote = RemoteBenchmark::connect(handle.url()).map_err(|e| unreachable(&e))?;
                (Box::new(remote), Some(handle), Some(package), Some(tool_config), true)
            }
            Target::Remote { url, package } => {
                let remote = RemoteBenchmark::connect(&url).map_err(|e| unreachable(&e))?;
                (Box::new(remote), None, package, None, true)
            }
        };
        let info = api.info().map_err(|e| unreachable(&e))?;
        Ok(Suite { api, _holder: holder, package, tool_config, launch_rpc, info })
    }
}

fn default_tool_config(package: &dyn BenchmarkImpl) -> ToolConfig {
    ToolConfig::named(package.toolsets().into_iter().next().unwrap_or_else(|| "default".into()))
}

/// Loopback ports that were free a moment ago.
pub(crate) fn free_ports(n: usize) -> Vec<u16> {
    let listeners: Vec<TcpListener> = (0..n).filter_map(|_| TcpListener::bind("127.0.0.1:0").ok()).collect();
    listeners.iter().filter_map(|l| l.local_addr().ok()).map(|a| a.port()).collect()
}

pub(crate) fn serve(
    package: Arc<dyn BenchmarkImpl>,
    tool_config: ToolConfig,
    ports: usize,
) -> Result<RpcHandle, StartError> {
    start(package, StartOptions::rpc(free_ports(ports), tool_config)).map(|s| s.into_rpc().expect("rpc mode"))
}

/// An opened target plus what the checks need to know about it.
pub(crate) struct Suite {
    pub api: Box<dyn BenchmarkApi>,
    _holder: Option<RpcHandle>,
    pub package: Option<Arc<dyn BenchmarkImpl>>,
    /// Known only when the suite started the target itself.
    pub tool_config: Option<ToolConfig>,
    /// Fresh instances are served over RPC rather than run in-process.
    pub launch_rpc: bool,
    pub info: BenchmarkInfo,
}

/// A fresh instance of the package, kept alive as long as this value.
pub(crate) struct Launched {
    pub api: Box<dyn BenchmarkApi>,
    _holder: Option<RpcHandle>,
}

impl Suite {
    pub fn package(&self) -> Result<&Arc<dyn BenchmarkImpl>, String> {
        self.package
            .as_ref()
            .ok_or_else(|| format!("no package available for `{}`; debug hooks are required", self.info.name))
    }

    pub fn launch(&self, tool_config: ToolConfig) -> Result<Launched, StartError> {
        let package = self.package.clone().expect("launch needs a package");
        if self.launch_rpc {
            let handle = serve(package, tool_config, 4)?;
            let api = RemoteBenchmark::connect(handle.url())
                .map_err(|e| StartError::SetupFailed(format!("fresh instance did not answer: {e}")))?;
            Ok(Launched { api: Box::new(api), _holder: Some(handle) })
        } else {
            let bench = start(package, StartOptions::local(tool_config))?.into_local().expect("local mode");
            Ok(Launched { api: Box::new(bench), _holder: None })
        }
    }
}
