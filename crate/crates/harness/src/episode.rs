use std::time::{Duration, Instant};

use cube_core::{ActionRequest, CubeError, StepResult, TaskFilter};
use cube_kit::{Agent, BenchmarkApi, Decision, TaskApi};

use crate::trajectory::{Trajectory, TrajectoryRecord, TrajectoryStep};
use crate::HarnessError;

pub const DEFAULT_EPISODE_TIMEOUT: Duration = Duration::from_secs(60);

/// How the harness advances a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepMode {
    /// `cube/step`, applied atomically by the benchmark.
    #[default]
    Atomic,
    /// `tools/call` followed by `cube/evaluate`.
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub max_steps_override: Option<u32>,
    pub timeout: Duration,
    pub mode: StepMode,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self { max_steps_override: None, timeout: DEFAULT_EPISODE_TIMEOUT, mode: StepMode::Atomic }
    }
}

fn max_steps(bench: &dyn BenchmarkApi, task_id: &str) -> Result<u32, CubeError> {
    let filter = TaskFilter { id_prefix: Some(task_id.to_owned()), ..Default::default() };
    bench
        .all_tasks(Some(&filter))?
        .into_iter()
        .find(|t| t.task_id == task_id)
        .map(|t| t.max_steps)
        .ok_or_else(|| CubeError::TaskNotFound(task_id.to_owned()))
}

/// Spawns a task, resets it with `seed`, lets `agent` act until the episode
/// ends or the agent stops, then closes the task.
pub fn run_episode(
    bench: &dyn BenchmarkApi,
    task_id: &str,
    seed: Option<u64>,
    agent: &mut dyn Agent,
    options: &EpisodeOptions,
) -> Result<Trajectory, HarnessError> {
    let started = Instant::now();
    let benchmark_id = bench.info()?.name;
    let limit = match options.max_steps_override {
        Some(n) => n.min(max_steps(bench, task_id)?),
        None => max_steps(bench, task_id)?,
    };
    let task = bench.spawn(task_id, seed)?;
    let outcome = drive(task.as_ref(), seed, agent, limit, options, started);
    let closed = task.close();
    let (steps, final_result) = outcome?;
    closed?;
    Ok(Trajectory {
        record: TrajectoryRecord { benchmark_id, task_id: task_id.to_owned(), seed, steps, final_result },
        transport: bench.transport(),
        wall_time_ms: started.elapsed().as_secs_f64() * 1000.0,
    })
}

fn drive(
    task: &dyn TaskApi,
    seed: Option<u64>,
    agent: &mut dyn Agent,
    limit: u32,
    options: &EpisodeOptions,
    started: Instant,
) -> Result<(Vec<TrajectoryStep>, StepResult), HarnessError> {
    let reset = task.reset(seed)?;
    let tools = task.tools_list()?;
    let mut steps: Vec<TrajectoryStep> = Vec::new();
    let mut obs = reset.obs;
    while steps.len() < limit as usize {
        if started.elapsed() > options.timeout {
            return Err(HarnessError::EpisodeTimeout {
                task_id: task.ticket().task_id.clone(),
                after: options.timeout,
            });
        }
        let action = match agent.act(&obs, &tools, steps.last().map(|s| &s.result)) {
            Decision::Act(action) => action,
            Decision::Stop => break,
        };
        let result = advance(task, &action, options.mode)?;
        obs = result.obs.clone();
        let done = result.is_done();
        steps.push(TrajectoryStep { action, result });
        if done {
            break;
        }
    }
    let final_result = match steps.last() {
        Some(step) => step.result.clone(),
        None => task.evaluate()?,
    };
    Ok((steps, final_result))
}

fn advance(task: &dyn TaskApi, action: &ActionRequest, mode: StepMode) -> Result<StepResult, CubeError> {
    match mode {
        StepMode::Atomic => task.step(action),
        StepMode::Split => {
            task.tools_call(action)?;
            task.evaluate()
        }
    }
}
