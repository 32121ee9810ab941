//! Blocking JSON-RPC client for remote benchmarks and tasks.

use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};
use std::time::Duration;

use cube_core::envelope::{decode_envelope, encode_envelope, Request, RequestId, RpcEnvelope};
use cube_core::wire::{
    parse_result, ResetParams, ResourcesListResult, ResourcesReadParams, ResourcesReadResult, ShutdownParams,
    SpawnParams, StepParams, TasksParams, ToolsListResult,
};
use cube_core::{
    canonical, codes, ActionRequest, BenchmarkInfo, CubeError, ResetResult, ResourceContents, ResourceDescriptor,
    RpcError, SpawnTicket, StepResult, TaskFilter, TaskList, TaskStatus, Tool, ToolCallResult,
};
use cube_kit::{BenchmarkApi, TaskApi, Transport};
use serde::Serialize;
use serde_json::{json, Value};

type Result<T> = std::result::Result<T, CubeError>;

/// Upper bound on a single request, including connection setup.
pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

/// Raised before a request reaches the server.
#[derive(Debug)]
enum Fault {
    Unreachable(String),
    Transport(String),
}

/// One JSON-RPC endpoint.
pub struct RpcClient {
    url: String,
    agent: ureq::Agent,
    next_id: AtomicI64,
}

impl RpcClient {
    pub fn new(url: impl Into<String>) -> Self {
        // No pooling: a keep-alive connection to a task endpoint that has
        // since closed would hang until the timeout instead of being refused.
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .max_idle_connections(0)
            .max_idle_connections_per_host(0)
            .timeout_global(Some(REQUEST_TIMEOUT))
            .timeout_connect(Some(Duration::from_secs(5)))
            .build()
            .into();
        Self { url: url.into(), agent, next_id: AtomicI64::new(1) }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// `strict` refuses methods outside the protocol namespaces before
    /// sending; raw probes turn it off to see what the server says.
    fn exchange(
        &self,
        method: &str,
        params: Value,
        strict: bool,
    ) -> std::result::Result<std::result::Result<Value, RpcError>, Fault> {
        let id = RequestId::Num(self.next_id.fetch_add(1, Ordering::Relaxed));
        let body = if strict {
            encode_envelope(&RpcEnvelope::Request(Request::new(id.clone(), method, params)))
                .map_err(|e| Fault::Transport(e.to_string()))?
        } else {
            let id_value = serde_json::to_value(&id).map_err(|e| Fault::Transport(e.to_string()))?;
            canonical::value_to_vec(&json!({ "jsonrpc": "2.0", "id": id_value, "method": method, "params": params }))
        };
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(&body[..])
            .map_err(|e| match e {
                ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => Fault::Unreachable(e.to_string()),
                ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::ConnectionRefused => {
                    Fault::Unreachable(io.to_string())
                }
                other => Fault::Transport(other.to_string()),
            })?;
        let status = resp.status();
        let bytes = resp.body_mut().read_to_vec().map_err(|e| Fault::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(Fault::Transport(format!("HTTP {status} from {}", self.url)));
        }
        match decode_envelope(&bytes) {
            Ok(RpcEnvelope::Response(r)) if r.id.as_ref().is_none_or(|got| *got == id) => Ok(r.payload),
            Ok(RpcEnvelope::Response(r)) => {
                Err(Fault::Transport(format!("response id {:?} does not answer request {id:?}", r.id)))
            }
            Ok(RpcEnvelope::Request(_)) => Err(Fault::Transport("server sent a request".into())),
            Err(fault) => Err(Fault::Transport(fault.to_string())),
        }
    }

    /// Sends a request and returns the raw result or the server's error.
    /// Client-side faults come back as internal errors.
    pub fn raw_call(&self, method: &str, params: Value) -> std::result::Result<Value, RpcError> {
        match self.exchange(method, params, false) {
            Ok(payload) => payload,
            Err(Fault::Unreachable(m) | Fault::Transport(m)) => Err(RpcError::new(codes::INTERNAL_ERROR, m)),
        }
    }

    pub fn call(&self, method: &str, params: Value) -> Result<Value> {
        match self.exchange(method, params, true) {
            Ok(payload) => payload.map_err(CubeError::from_rpc_error),
            Err(Fault::Unreachable(m)) => Err(CubeError::ConnectFailed(format!("{}: {m}", self.url))),
            Err(Fault::Transport(m)) => Err(CubeError::Transport(m)),
        }
    }

    pub fn call_with<P: Serialize>(&self, method: &str, params: &P) -> Result<Value> {
        let params = canonical::to_value(params).map_err(|e| CubeError::InvalidParams(e.to_string()))?;
        self.call(method, params)
    }
}

/// A benchmark served elsewhere, reached over JSON-RPC.
pub struct RemoteBenchmark {
    client: RpcClient,
    info: BenchmarkInfo,
}

impl RemoteBenchmark {
    /// Connects and checks that the endpoint answers `cube/info` with a
    /// well-formed document.
    pub fn connect(url: &str) -> Result<Self> {
        let client = RpcClient::new(url);
        let info = match client.call("cube/info", json!({})) {
            Ok(v) => parse_result::<BenchmarkInfo>(v)?,
            Err(e @ (CubeError::ConnectFailed(_) | CubeError::Transport(_))) => {
                return Err(CubeError::ConnectFailed(e.to_string()))
            }
            Err(e) => return Err(CubeError::Protocol(format!("cube/info failed: {e}"))),
        };
        Ok(Self { client, info })
    }

    pub fn url(&self) -> &str {
        self.client.url()
    }

    /// Info captured at connect time.
    pub fn cached_info(&self) -> &BenchmarkInfo {
        &self.info
    }
}

impl BenchmarkApi for RemoteBenchmark {
    fn info(&self) -> Result<BenchmarkInfo> {
        parse_result(self.client.call("cube/info", json!({}))?)
    }

    fn tasks(&self, filter: Option<&TaskFilter>) -> Result<TaskList> {
        parse_result(self.client.call_with("cube/tasks", &TasksParams { filter: filter.cloned() })?)
    }

    fn spawn(&self, task_id: &str, seed: Option<u64>) -> Result<Box<dyn TaskApi>> {
        let params = SpawnParams { task_id: task_id.to_owned(), seed };
        let ticket: SpawnTicket = parse_result(self.client.call_with("cube/spawn", &params)?)?;
        Ok(Box::new(RemoteTask::attach(ticket)))
    }

    fn status(&self) -> Result<Vec<TaskStatus>> {
        parse_result(self.client.call("cube/status", json!({}))?)
    }

    fn shutdown(&self, session_id: Option<&str>) -> Result<()> {
        let params = ShutdownParams { session_id: session_id.map(str::to_owned) };
        self.client.call_with("cube/shutdown", &params).map(drop)
    }

    fn transport(&self) -> Transport {
        Transport::Rpc
    }

    fn raw_call(&self, method: &str, params: Value) -> std::result::Result<Value, RpcError> {
        self.client.raw_call(method, params)
    }
}

/// A spawned task reached through its own endpoint.
pub struct RemoteTask {
    client: RpcClient,
    ticket: SpawnTicket,
    closed: AtomicBool,
}

impl RemoteTask {
    pub fn attach(ticket: SpawnTicket) -> Self {
        Self { client: RpcClient::new(ticket.endpoint.clone()), ticket, closed: AtomicBool::new(false) }
    }

    fn call(&self, method: &str, params: Value) -> Result<Value> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(CubeError::TaskNotFound(self.ticket.session_id.clone()));
        }
        self.client.call(method, params).map_err(|e| match e {
            // The endpoint goes away with its session.
            CubeError::ConnectFailed(_) => CubeError::TaskNotFound(self.ticket.session_id.clone()),
            other => other,
        })
    }

    fn call_with<P: Serialize>(&self, method: &str, params: &P) -> Result<Value> {
        let params = canonical::to_value(params).map_err(|e| CubeError::InvalidParams(e.to_string()))?;
        self.call(method, params)
    }
}

impl TaskApi for RemoteTask {
    fn ticket(&self) -> &SpawnTicket {
        &self.ticket
    }

    fn tools_list(&self) -> Result<Vec<Tool>> {
        Ok(parse_result::<ToolsListResult>(self.call("tools/list", json!({}))?)?.tools)
    }

    fn tools_call(&self, action: &ActionRequest) -> Result<ToolCallResult> {
        parse_result(self.call_with("tools/call", action)?)
    }

    fn resources_list(&self) -> Result<Vec<ResourceDescriptor>> {
        Ok(parse_result::<ResourcesListResult>(self.call("resources/list", json!({}))?)?.resources)
    }

    fn resources_read(&self, uri: &str) -> Result<Vec<ResourceContents>> {
        let params = ResourcesReadParams { uri: uri.to_owned() };
        Ok(parse_result::<ResourcesReadResult>(self.call_with("resources/read", &params)?)?.contents)
    }

    fn evaluate(&self) -> Result<StepResult> {
        parse_result(self.call("cube/evaluate", json!({}))?)
    }

    fn reset(&self, seed: Option<u64>) -> Result<ResetResult> {
        parse_result(self.call_with("cube/reset", &ResetParams { seed })?)
    }

    fn step(&self, action: &ActionRequest) -> Result<StepResult> {
        parse_result(self.call_with("cube/step", &StepParams { action: action.clone() })?)
    }

    fn close(&self) -> Result<()> {
        self.call("cube/close", json!({}))?;
        self.closed.store(true, Ordering::SeqCst);
        Ok(())
    }

    fn privileged_info(&self) -> Result<String> {
        parse_result(self.call("cube/privileged_info", json!({}))?)
    }

    fn raw_call(&self, method: &str, params: Value) -> std::result::Result<Value, RpcError> {
        self.client.raw_call(method, params)
    }
}
