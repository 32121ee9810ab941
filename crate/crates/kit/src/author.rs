use std::any::Any;
use std::sync::Arc;

use cube_core::{
    ActionRequest, CubeError, DebugTaskConfig, ResourceConfig, TaskDescriptor, Tool, ToolCallResult, ToolConfig,
};
use serde_json::{Map, Value};

use crate::agent::Agent;

/// Static metadata a benchmark declares about itself.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkMeta {
    pub name: String,
    pub version: String,
    pub description: String,
    pub resource_requirements: ResourceConfig,
}

/// Reward and termination as judged by the task. Truncation and step
/// counting belong to the kit.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub reward: f64,
    pub terminated: bool,
    pub info: Map<String, Value>,
}

/// A benchmark-level resource shared by every task instance.
pub trait SharedResource: Any + Send + Sync {
    fn teardown(&self) {}
}

/// Named shared resources, kept in setup order.
#[derive(Default, Clone)]
pub struct SharedResources {
    entries: Vec<(String, Arc<dyn Any + Send + Sync>, Arc<dyn SharedResource>)>,
}

impl SharedResources {
    pub fn insert<T: SharedResource>(&mut self, name: impl Into<String>, resource: Arc<T>) {
        let name = name.into();
        self.entries.retain(|(n, _, _)| *n != name);
        self.entries.push((name, resource.clone(), resource));
    }

    pub fn get<T: SharedResource>(&self, name: &str) -> Option<Arc<T>> {
        self.entries
            .iter()
            .find(|(n, _, _)| n == name)
            .and_then(|(_, any, _)| any.clone().downcast::<T>().ok())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _, _)| n.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tears resources down in reverse setup order.
    pub(crate) fn teardown_all(&self) {
        for (_, _, res) in self.entries.iter().rev() {
            res.teardown();
        }
    }
}

impl std::fmt::Debug for SharedResources {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

/// Read-only context handed to every task the benchmark creates.
#[derive(Debug, Clone)]
pub struct RuntimeContext {
    pub shared: SharedResources,
    pub base_seed: Option<u64>,
    pub tool_config: ToolConfig,
}

/// What a new task instance is created for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpawn {
    pub task_id: String,
    pub session_id: String,
    pub seed: Option<u64>,
}

/// One running task instance.
///
/// `&mut self` methods are never called concurrently on one instance; the
/// `&self` methods may run concurrently with each other.
pub trait TaskImpl: Send + Sync {
    fn description(&self) -> String;

    /// The advertised action space for the active toolset.
    fn tools(&self) -> Vec<Tool>;

    /// The tools `tools/call` accepts. A compliant task accepts exactly what
    /// it advertises.
    fn accepted_tools(&self) -> Vec<Tool> {
        self.tools()
    }

    /// Re-initialises the episode. Stochastic tasks always receive a seed.
    fn reset(&mut self, seed: Option<u64>);

    /// Applies an action that already validated against `accepted_tools`.
    fn call_tool(&mut self, action: &ActionRequest) -> ToolCallResult;

    fn observation(&self) -> Value;

    fn evaluate(&self) -> Evaluation;

    fn privileged_info(&self) -> String;

    /// Releases per-task resources. Called once, when the session closes.
    fn close(&mut self) {}
}

pub trait BenchmarkImpl: Send + Sync + 'static {
    fn meta(&self) -> BenchmarkMeta;

    /// Every task the benchmark offers. Ids must be unique and stable.
    fn task_descriptors(&self) -> Vec<TaskDescriptor>;

    /// Registered toolset names; the first is the default.
    fn toolsets(&self) -> Vec<String>;

    fn validate_tool_config(&self, config: &ToolConfig) -> Result<(), String> {
        if !self.toolsets().contains(&config.toolset) {
            return Err(format!("unknown toolset `{}`", config.toolset));
        }
        match config.overrides.keys().next() {
            Some(key) => Err(format!("unsupported override `{key}`")),
            None => Ok(()),
        }
    }

    /// Declared memory per live task instance, used for the logical
    /// resource estimate.
    fn task_ram_mb(&self) -> f64 {
        16.0
    }

    /// Initialises shared infrastructure. Runs before any spawn.
    fn setup(&self, _shared: &mut SharedResources, _tool_config: &ToolConfig) -> Result<(), String> {
        Ok(())
    }

    /// Hook run before shared resources are torn down.
    fn teardown(&self, _shared: &SharedResources) {}

    fn make_task(&self, spawn: &TaskSpawn, ctx: &RuntimeContext) -> Result<Box<dyn TaskImpl>, String>;

    fn debug_task_configs(&self) -> Vec<DebugTaskConfig>;

    /// A scripted agent that solves the given debug task, or `None` when the
    /// task is not a debug task.
    fn make_debug_agent(&self, task_id: &str) -> Option<Box<dyn Agent>>;
}

/// The debug agent for `task_id`, or `TaskNotFound` when it is not a debug
/// task of `benchmark`.
pub fn debug_agent(benchmark: &dyn BenchmarkImpl, task_id: &str) -> Result<Box<dyn Agent>, CubeError> {
    let listed = benchmark.debug_task_configs().iter().any(|c| c.task_id == task_id);
    listed
        .then(|| benchmark.make_debug_agent(task_id))
        .flatten()
        .ok_or_else(|| CubeError::TaskNotFound(format!("no debug agent for `{task_id}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    struct Counter(AtomicUsize);
    impl SharedResource for Counter {}

    struct Recorder(&'static str, Arc<Mutex<Vec<&'static str>>>);
    impl SharedResource for Recorder {
        fn teardown(&self) {
            self.1.lock().unwrap().push(self.0);
        }
    }

    #[test]
    fn typed_lookup() {
        let mut shared = SharedResources::default();
        shared.insert("n", Arc::new(Counter(AtomicUsize::new(3))));
        let c = shared.get::<Counter>("n").unwrap();
        assert_eq!(c.0.load(Ordering::SeqCst), 3);
        assert!(shared.get::<Counter>("missing").is_none());
    }

    #[test]
    fn teardown_runs_in_reverse_setup_order() {
        let log = Arc::new(Mutex::new(Vec::new()));
        let mut shared = SharedResources::default();
        shared.insert("db", Arc::new(Recorder("db", log.clone())));
        shared.insert("web", Arc::new(Recorder("web", log.clone())));
        shared.teardown_all();
        assert_eq!(*log.lock().unwrap(), vec!["web", "db"]);
    }
}
