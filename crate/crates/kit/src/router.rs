//! Maps method names and raw params onto host and session operations.

use std::sync::Arc;

use cube_core::wire::{
    parse_params, to_document, NoParams, ResetParams, ResourcesListResult, ResourcesReadParams,
    ResourcesReadResult, ShutdownParams, SpawnParams, StepParams, TasksParams, ToolsListResult,
};
use cube_core::{ActionRequest, CubeError, Method, MethodLevel};
use serde_json::Value;

use crate::host::{BenchmarkHost, Session};

fn resolve(method: &str, level: MethodLevel) -> Result<Method, CubeError> {
    method
        .parse::<Method>()
        .ok()
        .filter(|m| m.level() == level)
        .ok_or_else(|| CubeError::MethodNotFound(method.to_owned()))
}

/// Serves the benchmark-level endpoint.
pub fn dispatch_benchmark(host: &BenchmarkHost, method: &str, params: Value) -> Result<Value, CubeError> {
    match resolve(method, MethodLevel::Benchmark)? {
        Method::Info => {
            parse_params::<NoParams>(params)?;
            to_document(&host.info())
        }
        Method::Tasks => {
            let p: TasksParams = parse_params(params)?;
            to_document(&host.tasks(p.filter.as_ref())?)
        }
        Method::Spawn => {
            let p: SpawnParams = parse_params(params)?;
            let session = host.spawn(&p.task_id, p.seed)?;
            to_document(&session.ticket())
        }
        Method::Status => {
            parse_params::<NoParams>(params)?;
            to_document(&host.status())
        }
        Method::Shutdown => {
            let p: ShutdownParams = parse_params(params)?;
            host.shutdown(p.session_id.as_deref())?;
            Ok(Value::Null)
        }
        other => Err(CubeError::MethodNotFound(other.as_str().to_owned())),
    }
}

/// Serves one task endpoint.
pub(crate) fn dispatch_task(
    host: &BenchmarkHost,
    session: &Arc<Session>,
    method: &str,
    params: Value,
) -> Result<Value, CubeError> {
    match resolve(method, MethodLevel::Task)? {
        Method::ToolsList => {
            parse_params::<NoParams>(params)?;
            to_document(&ToolsListResult { tools: session.tools_list()? })
        }
        Method::ToolsCall => {
            let action: ActionRequest = parse_params(params)?;
            to_document(&session.tools_call(&action)?)
        }
        Method::ResourcesList => {
            parse_params::<NoParams>(params)?;
            to_document(&ResourcesListResult { resources: session.resources_list()? })
        }
        Method::ResourcesRead => {
            let p: ResourcesReadParams = parse_params(params)?;
            to_document(&ResourcesReadResult { contents: session.resources_read(&p.uri)? })
        }
        Method::Evaluate => {
            parse_params::<NoParams>(params)?;
            to_document(&session.evaluate()?)
        }
        Method::Reset => {
            let p: ResetParams = parse_params(params)?;
            to_document(&session.reset(p.seed)?)
        }
        Method::Step => {
            let p: StepParams = parse_params(params)?;
            to_document(&session.step(&p.action)?)
        }
        Method::Close => {
            parse_params::<NoParams>(params)?;
            host.close_session(&session.spawn.session_id)?;
            Ok(Value::Null)
        }
        Method::PrivilegedInfo => {
            parse_params::<NoParams>(params)?;
            Ok(Value::String(session.privileged_info()?))
        }
        other => Err(CubeError::MethodNotFound(other.as_str().to_owned())),
    }
}
