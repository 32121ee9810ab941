#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use cube_core::{
    ActionRequest, DebugTaskConfig, InputSchema, PropertySchema, ResourceConfig, TaskDescriptor, Tool,
    ToolCallResult, ToolConfig,
};
use cube_kit::{
    Agent, BenchmarkImpl, BenchmarkMeta, Decision, Evaluation, RuntimeContext, SharedResource, SharedResources,
    TaskImpl, TaskSpawn,
};
use serde_json::{json, Map, Value};

/// Counts setups and teardowns so tests can check they happen once.
#[derive(Default)]
pub struct Tally {
    pub setups: AtomicUsize,
    pub teardowns: AtomicUsize,
}

struct Marker(Arc<Tally>);

impl SharedResource for Marker {
    fn teardown(&self) {
        self.0.teardowns.fetch_add(1, Ordering::SeqCst);
    }
}

/// Counter benchmark: reach `target` by calling `inc`.
pub struct Counter {
    pub tally: Arc<Tally>,
    pub fail_setup: bool,
    pub ram_gb: f64,
}

impl Counter {
    pub fn new() -> Self {
        Self { tally: Arc::default(), fail_setup: false, ram_gb: 2.0 }
    }
}

pub fn descriptor(id: &str, stochastic: bool, max_steps: u32, tags: &[&str]) -> TaskDescriptor {
    TaskDescriptor {
        task_id: id.into(),
        title: id.into(),
        tags: tags.iter().map(|t| t.to_string()).collect(),
        stochastic,
        max_steps,
    }
}

impl BenchmarkImpl for Counter {
    fn meta(&self) -> BenchmarkMeta {
        BenchmarkMeta {
            name: "counter".into(),
            version: "0.1.0".into(),
            description: "count up".into(),
            resource_requirements: ResourceConfig::local_process(self.ram_gb, 1.0),
        }
    }

    fn task_descriptors(&self) -> Vec<TaskDescriptor> {
        vec![
            descriptor("count-3", false, 5, &["easy"]),
            descriptor("count-1", false, 3, &["easy", "tiny"]),
            descriptor("noisy", true, 5, &["seeded"]),
            descriptor("count-9", false, 12, &["hard"]),
            descriptor("panic", false, 5, &[]),
        ]
    }

    fn toolsets(&self) -> Vec<String> {
        vec!["standard".into(), "terse".into()]
    }

    fn setup(&self, shared: &mut SharedResources, _tool_config: &ToolConfig) -> Result<(), String> {
        if self.fail_setup {
            return Err("database unreachable".into());
        }
        self.tally.setups.fetch_add(1, Ordering::SeqCst);
        shared.insert("marker", Arc::new(Marker(self.tally.clone())));
        Ok(())
    }

    fn make_task(&self, spawn: &TaskSpawn, ctx: &RuntimeContext) -> Result<Box<dyn TaskImpl>, String> {
        let target = match spawn.task_id.as_str() {
            "count-1" => 1,
            "count-9" => 9,
            _ => 3,
        };
        Ok(Box::new(CounterTask {
            target,
            value: 0,
            terse: ctx.tool_config.toolset == "terse",
            panics: spawn.task_id == "panic",
        }))
    }

    fn debug_task_configs(&self) -> Vec<DebugTaskConfig> {
        vec![DebugTaskConfig::new("count-3", None, 5), DebugTaskConfig::new("noisy", Some(4), 5)]
    }

    fn make_debug_agent(&self, _task_id: &str) -> Option<Box<dyn Agent>> {
        Some(Box::new(|_: &Value, _: &[Tool], _: Option<&cube_core::StepResult>| {
            Decision::Act(ActionRequest::bare("inc"))
        }))
    }
}

struct CounterTask {
    target: u64,
    value: u64,
    terse: bool,
    panics: bool,
}

impl TaskImpl for CounterTask {
    fn description(&self) -> String {
        format!("Call inc until the counter reaches {}.", self.target)
    }

    fn tools(&self) -> Vec<Tool> {
        let mut peek = InputSchema::new();
        if !self.terse {
            peek = peek.optional("verbose", PropertySchema::boolean());
        }
        vec![
            Tool::new("inc", "add one", InputSchema::new()),
            Tool::new("peek", "show the counter", peek),
            Tool::new("add", "add n", InputSchema::new().required("n", PropertySchema::integer())),
        ]
    }

    fn reset(&mut self, seed: Option<u64>) {
        self.value = seed.map(|s| s % 2).unwrap_or(0);
    }

    fn call_tool(&mut self, action: &ActionRequest) -> ToolCallResult {
        if self.panics {
            panic!("boom");
        }
        match action.name.as_str() {
            "inc" => {
                self.value += 1;
                ToolCallResult::text(format!("now {}", self.value))
            }
            "add" => {
                self.value += action.args["n"].as_u64().unwrap_or(0);
                ToolCallResult::text(format!("now {}", self.value))
            }
            _ => ToolCallResult::text(self.value.to_string()),
        }
    }

    fn observation(&self) -> Value {
        json!({ "value": self.value })
    }

    fn evaluate(&self) -> Evaluation {
        let done = self.value >= self.target;
        Evaluation { reward: if done { 1.0 } else { 0.0 }, terminated: done, info: Map::new() }
    }

    fn privileged_info(&self) -> String {
        format!("target={}", self.target)
    }
}

/// A port that is free right now, found by binding port 0.
pub fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// Posts a raw body to an RPC endpoint and returns the decoded response.
pub fn post(url: &str, body: &str) -> Value {
    let mut resp = ureq::post(url).header("Content-Type", "application/json").send(body).unwrap();
    serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap()
}

pub fn call(url: &str, method: &str, params: Value) -> Value {
    let body = json!({"jsonrpc": "2.0", "id": 1, "method": method, "params": params});
    post(url, &body.to_string())
}
