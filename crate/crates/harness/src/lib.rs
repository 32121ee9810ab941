//! Harness for CUBE benchmarks.
//!
//! [`connect`] yields a [`BenchmarkApi`] whether the benchmark lives in this
//! process or behind a URL; [`run_episode`] and [`run_parallel`] drive
//! agents against it and produce [`Trajectory`] values whose canonical bytes
//! do not depend on the transport.

pub mod client;
mod episode;
mod parallel;
mod trajectory;

use std::time::Duration;

use cube_core::CubeError;
use cube_kit::{BenchmarkApi, LocalBenchmark};

pub use client::{RemoteBenchmark, RemoteTask, RpcClient};
pub use episode::{run_episode, EpisodeOptions, StepMode, DEFAULT_EPISODE_TIMEOUT};
pub use parallel::{run_parallel, AgentFactory, Job, RolloutPlan};
pub use trajectory::{read_trajectories, write_trajectories, Trajectory, TrajectoryRecord, TrajectoryStep};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("episode on `{task_id}` exceeded {after:?}")]
    EpisodeTimeout { task_id: String, after: Duration },
    #[error("invalid rollout plan: {0}")]
    InvalidPlan(String),
    #[error("no agent `{0}`")]
    UnknownAgent(String),
}

impl HarnessError {
    /// True for failures of the connection rather than of the benchmark.
    pub fn is_transport(&self) -> bool {
        matches!(self, Self::Cube(CubeError::ConnectFailed(_) | CubeError::Transport(_) | CubeError::Protocol(_)))
    }
}

/// Where a benchmark lives.
pub enum Target {
    Url(String),
    Local(LocalBenchmark),
}

/// Connects to a benchmark. URL targets are checked with `cube/info`.
pub fn connect(target: Target) -> Result<Box<dyn BenchmarkApi>, CubeError> {
    match target {
        Target::Url(url) => Ok(Box::new(RemoteBenchmark::connect(&url)?)),
        Target::Local(bench) => Ok(Box::new(bench)),
    }
}
