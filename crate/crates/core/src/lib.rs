//! Protocol core for CUBE benchmarks.
//!
//! Everything that crosses a process boundary lives here: the JSON-RPC
//! envelope, the error model and its code table, the task-level and
//! benchmark-level documents, tool input schemas, and the canonical byte
//! encoding used whenever two trajectories must be compared for equality.
//!
//! All types are plain values; they are `Send + Sync` and every operation in
//! this crate is a pure function.

pub mod benchmark;
pub mod canonical;
pub mod envelope;
pub mod error;
pub mod method;
pub mod schema;
pub mod splitmix;
pub mod task;
pub mod wire;

pub use benchmark::{
    BenchmarkInfo, DebugTaskConfig, ResourceConfig, ResourceKind, ResourceUsage, SpawnTicket,
    TaskDescriptor, TaskFilter, TaskList, TaskState, TaskStatus, ToolConfig, DEFAULT_PAGE_SIZE,
};
pub use canonical::EncodingFault;
pub use envelope::{decode_envelope, encode_envelope, DecodeFault, Request, RequestId, Response, RpcEnvelope};
pub use error::{codes, CubeError, RpcError};
pub use method::{Method, MethodLevel, Namespace};
pub use schema::{validate_action, ActionFault, ArgType, InputSchema, PropertySchema};
pub use splitmix::SplitMix64;
pub use task::{
    ActionRequest, ContentBlock, ResetResult, ResourceContents, ResourceDescriptor, StepResult, Tool,
    ToolCallResult, DESCRIPTION_URI, OBSERVATION_URI,
};

pub type Result<T, E = CubeError> = std::result::Result<T, E>;
