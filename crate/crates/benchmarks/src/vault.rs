//! Key vault: recover a secret stored in a vault service shared by every
//! task of the benchmark.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use cube_core::{
    ActionRequest, DebugTaskConfig, InputSchema, PropertySchema, ResourceConfig, StepResult, TaskDescriptor, Tool,
    ToolCallResult, ToolConfig,
};
use cube_kit::{
    Agent, BenchmarkImpl, BenchmarkMeta, Decision, Evaluation, RuntimeContext, SharedResource, SharedResources,
    TaskImpl, TaskSpawn,
};
use serde_json::{json, Map, Value};

use crate::splitmix::vault_secret;

pub const VAULT_RESOURCE: &str = "vault";

/// In-memory vault, namespaced by session id.
#[derive(Debug, Default)]
pub struct VaultService {
    entries: RwLock<BTreeMap<String, BTreeMap<String, String>>>,
}

impl VaultService {
    pub fn store(&self, namespace: &str, fragments: BTreeMap<String, String>) {
        self.entries.write().unwrap().insert(namespace.to_owned(), fragments);
    }

    pub fn fetch(&self, namespace: &str, key: &str) -> Option<String> {
        self.entries.read().unwrap().get(namespace)?.get(key).cloned()
    }

    pub fn remove(&self, namespace: &str) {
        self.entries.write().unwrap().remove(namespace);
    }

    pub fn namespaces(&self) -> usize {
        self.entries.read().unwrap().len()
    }
}

impl SharedResource for VaultService {
    fn teardown(&self) {
        self.entries.write().unwrap().clear();
    }
}

#[derive(Debug)]
pub struct VaultSpec {
    pub id: &'static str,
    pub title: &'static str,
    /// Fragment lengths; they sum to 16.
    pub chunks: &'static [usize],
    pub max_steps: u32,
}

pub const TASKS: &[VaultSpec] = &[
    VaultSpec { id: "vault-easy", title: "Secret behind one key", chunks: &[16], max_steps: 8 },
    VaultSpec { id: "vault-hard", title: "Secret split across three keys", chunks: &[6, 5, 5], max_steps: 12 },
];

pub fn spec(task_id: &str) -> Option<&'static VaultSpec> {
    TASKS.iter().find(|s| s.id == task_id)
}

impl VaultSpec {
    pub fn keys(&self) -> Vec<String> {
        (0..self.chunks.len()).map(|i| format!("key-{i}")).collect()
    }

    /// Splits the secret into named fragments, in key order.
    pub fn fragments(&self, secret: &str) -> BTreeMap<String, String> {
        let mut at = 0;
        self.keys()
            .into_iter()
            .zip(self.chunks)
            .map(|(key, len)| {
                let part = secret[at..at + len].to_owned();
                at += len;
                (key, part)
            })
            .collect()
    }
}

#[derive(Debug, Default)]
pub struct KeyVault;

impl KeyVault {
    pub fn new() -> Self {
        Self
    }
}

impl BenchmarkImpl for KeyVault {
    fn meta(&self) -> BenchmarkMeta {
        BenchmarkMeta {
            name: "key-vault".into(),
            version: "0.1.0".into(),
            description: "Query a shared vault for key fragments and submit the reassembled secret.".into(),
            resource_requirements: ResourceConfig::local_process(2.0, 1.0),
        }
    }

    fn task_descriptors(&self) -> Vec<TaskDescriptor> {
        TASKS
            .iter()
            .map(|s| TaskDescriptor {
                task_id: s.id.into(),
                title: s.title.into(),
                tags: vec!["vault".into(), if s.chunks.len() == 1 { "easy" } else { "hard" }.into()],
                stochastic: true,
                max_steps: s.max_steps,
            })
            .collect()
    }

    fn toolsets(&self) -> Vec<String> {
        vec!["standard".into(), "compact".into()]
    }

    fn task_ram_mb(&self) -> f64 {
        32.0
    }

    fn setup(&self, shared: &mut SharedResources, _tool_config: &ToolConfig) -> Result<(), String> {
        shared.insert(VAULT_RESOURCE, Arc::new(VaultService::default()));
        Ok(())
    }

    fn make_task(&self, spawn: &TaskSpawn, ctx: &RuntimeContext) -> Result<Box<dyn TaskImpl>, String> {
        let spec = spec(&spawn.task_id).ok_or_else(|| format!("no vault task `{}`", spawn.task_id))?;
        let vault = ctx.shared.get::<VaultService>(VAULT_RESOURCE).ok_or("vault service is not running")?;
        let seed = spawn.seed.ok_or("vault tasks need a seed")?;
        let mut task = VaultTask {
            spec,
            vault,
            namespace: spawn.session_id.clone(),
            compact: ctx.tool_config.toolset == "compact",
            secret: String::new(),
            last_output: None,
            submitted: None,
        };
        task.reset(Some(seed));
        Ok(Box::new(task))
    }

    fn debug_task_configs(&self) -> Vec<DebugTaskConfig> {
        vec![DebugTaskConfig::new("vault-easy", Some(0), 8), DebugTaskConfig::new("vault-hard", Some(42), 12)]
    }

    fn make_debug_agent(&self, task_id: &str) -> Option<Box<dyn Agent>> {
        spec(task_id).map(|_| Box::new(VaultAgent::default()) as Box<dyn Agent>)
    }
}

pub struct VaultTask {
    spec: &'static VaultSpec,
    vault: Arc<VaultService>,
    namespace: String,
    compact: bool,
    secret: String,
    last_output: Option<String>,
    submitted: Option<String>,
}

impl TaskImpl for VaultTask {
    fn description(&self) -> String {
        format!(
            "A secret is stored in the vault under {} key(s). Query every key and submit the fragments \
             concatenated in key order.",
            self.spec.chunks.len()
        )
    }

    fn tools(&self) -> Vec<Tool> {
        let mut key = PropertySchema::string().one_of(self.spec.keys());
        let mut answer = PropertySchema::string();
        if !self.compact {
            key = key.describe("Vault key to read");
            answer = answer.describe("The full secret");
        }
        vec![
            Tool::new("query", "Read the fragment stored under a key.", InputSchema::new().required("key", key)),
            Tool::new("submit", "Submit the reassembled secret.", InputSchema::new().required("answer", answer)),
        ]
    }

    fn reset(&mut self, seed: Option<u64>) {
        self.secret = vault_secret(seed.unwrap_or_default());
        self.vault.store(&self.namespace, self.spec.fragments(&self.secret));
        self.last_output = None;
        self.submitted = None;
    }

    fn call_tool(&mut self, action: &ActionRequest) -> ToolCallResult {
        let arg = |name: &str| action.args.get(name).and_then(Value::as_str).unwrap_or_default().to_owned();
        match action.name.as_str() {
            "query" => {
                let key = arg("key");
                match self.vault.fetch(&self.namespace, &key) {
                    Some(fragment) => {
                        self.last_output = Some(fragment.clone());
                        ToolCallResult::text(fragment)
                    }
                    None => {
                        self.last_output = None;
                        ToolCallResult::error(format!("no fragment under `{key}`"))
                    }
                }
            }
            "submit" => {
                let answer = arg("answer");
                let accepted = answer == self.secret;
                self.submitted = Some(answer);
                let verdict = if accepted { "accepted" } else { "rejected" };
                self.last_output = Some(verdict.into());
                ToolCallResult::text(verdict)
            }
            other => ToolCallResult::error(format!("unknown tool `{other}`")),
        }
    }

    fn observation(&self) -> Value {
        json!({
            "keys": self.spec.keys(),
            "last_output": self.last_output,
            "submitted": self.submitted.is_some(),
        })
    }

    fn evaluate(&self) -> Evaluation {
        let solved = self.submitted.as_deref() == Some(self.secret.as_str());
        Evaluation { reward: if solved { 1.0 } else { 0.0 }, terminated: solved, info: Map::new() }
    }

    fn privileged_info(&self) -> String {
        self.secret.clone()
    }

    fn close(&mut self) {
        self.vault.remove(&self.namespace);
    }
}

/// Queries each key in order, then submits the fragments joined.
#[derive(Debug, Default, Clone)]
pub struct VaultAgent {
    fragments: Vec<String>,
    queried: bool,
}

impl Agent for VaultAgent {
    fn act(&mut self, obs: &Value, _tools: &[Tool], _last: Option<&StepResult>) -> Decision {
        if std::mem::take(&mut self.queried) {
            match obs["last_output"].as_str() {
                Some(fragment) => self.fragments.push(fragment.to_owned()),
                None => return Decision::Stop,
            }
        }
        let keys: Vec<&str> = obs["keys"].as_array().into_iter().flatten().filter_map(Value::as_str).collect();
        if obs["submitted"] == true && obs["last_output"] == "rejected" {
            return Decision::Stop;
        }
        match keys.get(self.fragments.len()) {
            Some(key) => {
                self.queried = true;
                Decision::Act(ActionRequest::new("query", json!({ "key": key })))
            }
            None => Decision::Act(ActionRequest::new("submit", json!({ "answer": self.fragments.concat() }))),
        }
    }
}
