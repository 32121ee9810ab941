use cube_core::{
    ActionRequest, BenchmarkInfo, CubeError, ResetResult, ResourceContents, ResourceDescriptor, RpcError,
    SpawnTicket, StepResult, TaskFilter, TaskList, TaskStatus, Tool, ToolCallResult,
};
use serde_json::Value;

type Result<T> = std::result::Result<T, CubeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transport {
    Local,
    Rpc,
}

impl Transport {
    pub fn as_str(self) -> &'static str {
        match self {
            Transport::Local => "local",
            Transport::Rpc => "rpc",
        }
    }
}

/// The benchmark-level API, identical for in-process and remote benchmarks.
pub trait BenchmarkApi: Send + Sync {
    fn info(&self) -> Result<BenchmarkInfo>;
    fn tasks(&self, filter: Option<&TaskFilter>) -> Result<TaskList>;
    fn spawn(&self, task_id: &str, seed: Option<u64>) -> Result<Box<dyn TaskApi>>;
    fn status(&self) -> Result<Vec<TaskStatus>>;
    fn shutdown(&self, session_id: Option<&str>) -> Result<()>;
    fn transport(&self) -> Transport;

    /// Sends an arbitrary method with raw params and returns the raw result.
    /// Used by wire-shape probes; ordinary callers use the typed methods.
    fn raw_call(&self, method: &str, params: Value) -> std::result::Result<Value, RpcError>;

    /// Pages through `tasks` until the listing is exhausted.
    fn all_tasks(&self, filter: Option<&TaskFilter>) -> Result<Vec<cube_core::TaskDescriptor>> {
        let mut filter = filter.cloned().unwrap_or_default();
        let mut out = Vec::new();
        loop {
            let page = self.tasks(Some(&filter))?;
            out.extend(page.items);
            match page.next_page_token {
                Some(token) => filter.page_token = Some(token),
                None => return Ok(out),
            }
        }
    }
}

/// The task-level API of one spawned instance.
pub trait TaskApi: Send + Sync {
    fn ticket(&self) -> &SpawnTicket;
    fn tools_list(&self) -> Result<Vec<Tool>>;
    fn tools_call(&self, action: &ActionRequest) -> Result<ToolCallResult>;
    fn resources_list(&self) -> Result<Vec<ResourceDescriptor>>;
    fn resources_read(&self, uri: &str) -> Result<Vec<ResourceContents>>;
    fn evaluate(&self) -> Result<StepResult>;
    fn reset(&self, seed: Option<u64>) -> Result<ResetResult>;
    fn step(&self, action: &ActionRequest) -> Result<StepResult>;
    fn close(&self) -> Result<()>;
    fn privileged_info(&self) -> Result<String>;
    fn raw_call(&self, method: &str, params: Value) -> std::result::Result<Value, RpcError>;
}
