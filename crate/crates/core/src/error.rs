use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// JSON-RPC error codes, including the CUBE application range.
pub mod codes {
    pub const PARSE_ERROR: i64 = -32700;
    pub const INVALID_REQUEST: i64 = -32600;
    pub const METHOD_NOT_FOUND: i64 = -32601;
    pub const INVALID_PARAMS: i64 = -32602;
    pub const INTERNAL_ERROR: i64 = -32603;

    pub const TASK_NOT_FOUND: i64 = -32000;
    pub const TASK_TERMINATED: i64 = -32001;
    pub const RESOURCE_EXHAUSTED: i64 = -32002;
    pub const TOOL_CONFIG_INVALID: i64 = -32003;
    pub const SEED_REQUIRED: i64 = -32004;
    pub const NOT_RESET_YET: i64 = -32005;
    pub const UNKNOWN_RESOURCE: i64 = -32006;
    pub const INVALID_PAGE_TOKEN: i64 = -32007;
    pub const BACKEND_UNSUPPORTED: i64 = -32008;
    pub const TASK_FAILED: i64 = -32009;
    pub const SETUP_FAILED: i64 = -32010;

    /// True for codes reserved to transport and parse faults.
    pub fn is_transport_fault(code: i64) -> bool {
        (-32700..=-32600).contains(&code)
    }

    /// True for codes in the CUBE application range.
    pub fn is_application(code: i64) -> bool {
        (-32099..=-32000).contains(&code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    /// A present `"data": null` stays `Some(Null)` so the envelope round-trips.
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    pub data: Option<Value>,
}

fn present<'de, D: serde::Deserializer<'de>>(de: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(de).map(Some)
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), data: None }
    }

    pub fn with_data(mut self, data: Value) -> Self {
        self.data = Some(data);
        self
    }
}

impl std::fmt::Display for RpcError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rpc error {}: {}", self.code, self.message)
    }
}

impl std::error::Error for RpcError {}

/// Errors raised by benchmark and task operations.
///
/// Every variant that can travel over the wire maps onto exactly one code
/// and comes back as the same variant on the other side, so local and RPC
/// callers observe identical errors. `ConnectFailed`, `Transport` and
/// `Protocol` only ever originate on the client.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CubeError {
    #[error("task or session not found: {0}")]
    TaskNotFound(String),
    #[error("task episode has ended")]
    TaskTerminated,
    #[error("resources exhausted: {0}")]
    ResourceExhausted(String),
    #[error("invalid tool config: {0}")]
    ToolConfigInvalid(String),
    #[error("task `{0}` is stochastic and needs a seed")]
    SeedRequired(String),
    #[error("task has not been reset yet")]
    NotResetYet,
    #[error("unknown resource `{0}`")]
    UnknownResource(String),
    #[error("invalid page token `{0}`")]
    InvalidPageToken(String),
    #[error("backend cannot provision: {0}")]
    BackendUnsupported(String),
    #[error("task failed: {0}")]
    TaskFailed(String),
    #[error("benchmark setup failed: {0}")]
    SetupFailed(String),
    #[error("method not found: {0}")]
    MethodNotFound(String),
    #[error("invalid params: {0}")]
    InvalidParams(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("connection failed: {0}")]
    ConnectFailed(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol mismatch: {0}")]
    Protocol(String),
    #[error("{0}")]
    Remote(RpcError),
}

impl CubeError {
    pub fn code(&self) -> i64 {
        use codes::*;
        match self {
            Self::TaskNotFound(_) => TASK_NOT_FOUND,
            Self::TaskTerminated => TASK_TERMINATED,
            Self::ResourceExhausted(_) => RESOURCE_EXHAUSTED,
            Self::ToolConfigInvalid(_) => TOOL_CONFIG_INVALID,
            Self::SeedRequired(_) => SEED_REQUIRED,
            Self::NotResetYet => NOT_RESET_YET,
            Self::UnknownResource(_) => UNKNOWN_RESOURCE,
            Self::InvalidPageToken(_) => INVALID_PAGE_TOKEN,
            Self::BackendUnsupported(_) => BACKEND_UNSUPPORTED,
            Self::TaskFailed(_) => TASK_FAILED,
            Self::SetupFailed(_) => SETUP_FAILED,
            Self::MethodNotFound(_) => METHOD_NOT_FOUND,
            Self::InvalidParams(_) => INVALID_PARAMS,
            Self::Remote(e) => e.code,
            Self::Internal(_) | Self::ConnectFailed(_) | Self::Transport(_) | Self::Protocol(_) => {
                INTERNAL_ERROR
            }
        }
    }

    fn detail(&self) -> Option<&str> {
        match self {
            Self::TaskNotFound(d)
            | Self::ResourceExhausted(d)
            | Self::ToolConfigInvalid(d)
            | Self::SeedRequired(d)
            | Self::UnknownResource(d)
            | Self::InvalidPageToken(d)
            | Self::BackendUnsupported(d)
            | Self::TaskFailed(d)
            | Self::SetupFailed(d)
            | Self::MethodNotFound(d)
            | Self::InvalidParams(d)
            | Self::Internal(d)
            | Self::ConnectFailed(d)
            | Self::Transport(d)
            | Self::Protocol(d) => Some(d),
            Self::TaskTerminated | Self::NotResetYet | Self::Remote(_) => None,
        }
    }

    pub fn to_rpc_error(&self) -> RpcError {
        if let Self::Remote(e) = self {
            return e.clone();
        }
        let err = RpcError::new(self.code(), self.to_string());
        match self.detail() {
            Some(d) => err.with_data(json!({ "detail": d })),
            None => err,
        }
    }

    pub fn from_rpc_error(err: RpcError) -> Self {
        use codes::*;
        let detail = err
            .data
            .as_ref()
            .and_then(|d| d.get("detail"))
            .and_then(Value::as_str)
            .map(str::to_owned)
            .unwrap_or_else(|| err.message.clone());
        match err.code {
            TASK_NOT_FOUND => Self::TaskNotFound(detail),
            TASK_TERMINATED => Self::TaskTerminated,
            RESOURCE_EXHAUSTED => Self::ResourceExhausted(detail),
            TOOL_CONFIG_INVALID => Self::ToolConfigInvalid(detail),
            SEED_REQUIRED => Self::SeedRequired(detail),
            NOT_RESET_YET => Self::NotResetYet,
            UNKNOWN_RESOURCE => Self::UnknownResource(detail),
            INVALID_PAGE_TOKEN => Self::InvalidPageToken(detail),
            BACKEND_UNSUPPORTED => Self::BackendUnsupported(detail),
            TASK_FAILED => Self::TaskFailed(detail),
            SETUP_FAILED => Self::SetupFailed(detail),
            METHOD_NOT_FOUND => Self::MethodNotFound(detail),
            INVALID_PARAMS => Self::InvalidParams(detail),
            INTERNAL_ERROR => Self::Internal(detail),
            _ => Self::Remote(err),
        }
    }
}

impl From<RpcError> for CubeError {
    fn from(err: RpcError) -> Self {
        Self::from_rpc_error(err)
    }
}
