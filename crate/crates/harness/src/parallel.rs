use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use cube_kit::{Agent, BenchmarkApi};
use serde::{Deserialize, Serialize};

use crate::episode::{run_episode, EpisodeOptions, DEFAULT_EPISODE_TIMEOUT};
use crate::trajectory::Trajectory;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub task_id: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Which agent to build; the factory passed to [`run_parallel`] decides
    /// what names mean. `debug` is the usual one.
    #[serde(default = "default_agent")]
    pub agent: String,
}

fn default_agent() -> String {
    "debug".into()
}

impl Job {
    pub fn new(task_id: impl Into<String>, seed: Option<u64>) -> Self {
        Self { task_id: task_id.into(), seed, agent: default_agent() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutPlan {
    pub jobs: Vec<Job>,
    #[serde(default = "one")]
    pub parallelism: usize,
    #[serde(default = "default_timeout_s")]
    pub per_episode_timeout_s: f64,
}

fn one() -> usize {
    1
}

fn default_timeout_s() -> f64 {
    DEFAULT_EPISODE_TIMEOUT.as_secs_f64()
}

impl RolloutPlan {
    pub fn new(jobs: Vec<Job>, parallelism: usize) -> Self {
        Self { jobs, parallelism, per_episode_timeout_s: default_timeout_s() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.jobs.is_empty() {
            return Err(HarnessError::InvalidPlan("plan has no jobs".into()));
        }
        if self.parallelism == 0 {
            return Err(HarnessError::InvalidPlan("parallelism must be at least 1".into()));
        }
        if !(self.per_episode_timeout_s.is_finite() && self.per_episode_timeout_s > 0.0) {
            return Err(HarnessError::InvalidPlan("per_episode_timeout_s must be positive".into()));
        }
        Ok(())
    }
}

/// Builds the agent for a job.
pub type AgentFactory<'a> = dyn Fn(&Job) -> Result<Box<dyn Agent>, HarnessError> + Sync + 'a;

/// Runs every job on a pool of `plan.parallelism` workers. Results come
/// back in job order; a failed job leaves its error in place.
pub fn run_parallel(
    bench: &dyn BenchmarkApi,
    plan: &RolloutPlan,
    agents: &AgentFactory<'_>,
) -> Result<Vec<Result<Trajectory, HarnessError>>, HarnessError> {
    plan.validate()?;
    let options = EpisodeOptions { timeout: Duration::from_secs_f64(plan.per_episode_timeout_s), ..Default::default() };
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..plan.parallelism.min(plan.jobs.len()) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = plan.jobs.get(i) else { break };
                let result = agents(job)
                    .and_then(|mut agent| run_episode(bench, &job.task_id, job.seed, agent.as_mut(), &options));
                if let Err(e) = &result {
                    log::warn!("job {i} ({}) failed: {e}", job.task_id);
                }
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut slots: Vec<Option<Result<Trajectory, HarnessError>>> = plan.jobs.iter().map(|_| None).collect();
    for (i, result) in rx {
        slots[i] = Some(result);
    }
    Ok(slots.into_iter().map(|s| s.expect("every job reports")).collect())
}
