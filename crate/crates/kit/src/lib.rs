//! Benchmark kit.
//!
//! Authors implement [`BenchmarkImpl`] and [`TaskImpl`]; the kit supplies the
//! rest of the surface: task discovery and pagination, spawning with session
//! isolation, lifecycle and health reporting, step accounting, the two
//! canonical resources, and exposure over JSON-RPC/HTTP. [`start`] returns
//! either an in-process handle or a served endpoint; both implement
//! [`BenchmarkApi`], so consumers do not care which one they hold.
//!
//! Concurrency contract for authors: the kit never calls a mutating
//! [`TaskImpl`] method concurrently on one instance, but it may call the
//! `&self` methods concurrently with each other. Anything stored in
//! [`SharedResources`] is reachable from every task at once and must be
//! safe for concurrent use.

mod agent;
mod api;
mod author;
pub mod backend;
mod host;
mod local;
mod ports;
pub mod router;
pub mod server;
mod start;

pub use agent::{Agent, Decision};
pub use api::{BenchmarkApi, TaskApi, Transport};
pub use author::{
    debug_agent, BenchmarkImpl, BenchmarkMeta, Evaluation, RuntimeContext, SharedResource, SharedResources, TaskSpawn,
    TaskImpl,
};
pub use host::{BenchmarkHost, DEFAULT_MAX_SESSIONS};
pub use local::{LocalBenchmark, LocalTask};
pub use start::{start, Mode, RpcHandle, StartError, StartOptions, Started};
