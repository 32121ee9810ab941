use std::sync::Arc;

use cube_core::{
    ActionRequest, BenchmarkInfo, CubeError, ResetResult, ResourceContents, ResourceDescriptor, RpcError,
    SpawnTicket, StepResult, TaskFilter, TaskList, TaskStatus, Tool, ToolCallResult,
};
use serde_json::Value;

use crate::api::{BenchmarkApi, TaskApi, Transport};
use crate::host::{BenchmarkHost, Session};
use crate::router;

/// In-process handle to a started benchmark. Calls go straight to the host
/// with no serialization.
#[derive(Clone)]
pub struct LocalBenchmark {
    host: Arc<BenchmarkHost>,
}

impl LocalBenchmark {
    pub fn new(host: Arc<BenchmarkHost>) -> Self {
        Self { host }
    }

    pub fn host(&self) -> &Arc<BenchmarkHost> {
        &self.host
    }

    /// Spawns and returns the concrete local task handle.
    pub fn spawn_local(&self, task_id: &str, seed: Option<u64>) -> Result<LocalTask, CubeError> {
        let session = self.host.spawn(task_id, seed)?;
        Ok(LocalTask { host: self.host.clone(), ticket: session.ticket(), session })
    }
}

impl BenchmarkApi for LocalBenchmark {
    fn info(&self) -> Result<BenchmarkInfo, CubeError> {
        Ok(self.host.info())
    }

    fn tasks(&self, filter: Option<&TaskFilter>) -> Result<TaskList, CubeError> {
        self.host.tasks(filter)
    }

    fn spawn(&self, task_id: &str, seed: Option<u64>) -> Result<Box<dyn TaskApi>, CubeError> {
        Ok(Box::new(self.spawn_local(task_id, seed)?))
    }

    fn status(&self) -> Result<Vec<TaskStatus>, CubeError> {
        Ok(self.host.status())
    }

    fn shutdown(&self, session_id: Option<&str>) -> Result<(), CubeError> {
        self.host.shutdown(session_id)
    }

    fn transport(&self) -> Transport {
        Transport::Local
    }

    fn raw_call(&self, method: &str, params: Value) -> Result<Value, RpcError> {
        router::dispatch_benchmark(&self.host, method, params).map_err(|e| e.to_rpc_error())
    }
}

pub struct LocalTask {
    host: Arc<BenchmarkHost>,
    session: Arc<Session>,
    ticket: SpawnTicket,
}

impl TaskApi for LocalTask {
    fn ticket(&self) -> &SpawnTicket {
        &self.ticket
    }

    fn tools_list(&self) -> Result<Vec<Tool>, CubeError> {
        self.session.tools_list()
    }

    fn tools_call(&self, action: &ActionRequest) -> Result<ToolCallResult, CubeError> {
        self.session.tools_call(action)
    }

    fn resources_list(&self) -> Result<Vec<ResourceDescriptor>, CubeError> {
        self.session.resources_list()
    }

    fn resources_read(&self, uri: &str) -> Result<Vec<ResourceContents>, CubeError> {
        self.session.resources_read(uri)
    }

    fn evaluate(&self) -> Result<StepResult, CubeError> {
        self.session.evaluate()
    }

    fn reset(&self, seed: Option<u64>) -> Result<ResetResult, CubeError> {
        self.session.reset(seed)
    }

    fn step(&self, action: &ActionRequest) -> Result<StepResult, CubeError> {
        self.session.step(action)
    }

    fn close(&self) -> Result<(), CubeError> {
        self.host.close_session(&self.ticket.session_id)
    }

    fn privileged_info(&self) -> Result<String, CubeError> {
        self.session.privileged_info()
    }

    fn raw_call(&self, method: &str, params: Value) -> Result<Value, RpcError> {
        router::dispatch_task(&self.host, &self.session, method, params).map_err(|e| e.to_rpc_error())
    }
}
