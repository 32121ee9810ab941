//! Benchmark-level documents: discovery, spawning, health and configuration.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::finite;

pub const DEFAULT_PAGE_SIZE: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Container,
    Vm,
    LocalProcess,
}

/// What a benchmark needs, independent of how a backend provisions it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceConfig {
    pub kind: ResourceKind,
    #[serde(serialize_with = "finite")]
    pub ram_gb: f64,
    #[serde(serialize_with = "finite")]
    pub disk_gb: f64,
    pub gpu: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl ResourceConfig {
    pub fn local_process(ram_gb: f64, disk_gb: f64) -> Self {
        Self { kind: ResourceKind::LocalProcess, ram_gb, disk_gb, gpu: false, notes: None }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (field, v) in [("ram_gb", self.ram_gb), ("disk_gb", self.disk_gb)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{field} must be a positive number, got {v}"));
            }
        }
        Ok(())
    }

    pub fn ram_mb(&self) -> f64 {
        self.ram_gb * 1024.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInfo {
    pub name: String,
    pub version: String,
    pub description: String,
    pub resource_requirements: ResourceConfig,
    pub task_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub task_id: String,
    pub title: String,
    pub tags: Vec<String>,
    pub stochastic: bool,
    pub max_steps: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskList {
    pub items: Vec<TaskDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_page_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags_any: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_token: Option<String>,
}

impl TaskFilter {
    pub fn matches(&self, task: &TaskDescriptor) -> bool {
        let tags_ok = self
            .tags_any
            .as_ref()
            .is_none_or(|tags| tags.iter().any(|t| task.tags.contains(t)));
        let prefix_ok = self.id_prefix.as_ref().is_none_or(|p| task.task_id.starts_with(p.as_str()));
        tags_ok && prefix_ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpawnTicket {
    pub session_id: String,
    /// `http://host:port/rpc` for RPC spawns, `local://benchmark/session` for
    /// in-process spawns.
    pub endpoint: String,
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Session lifecycle. Ordered: a session only ever moves forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Initializing,
    Ready,
    Running,
    Terminated,
    Failed,
}

impl TaskState {
    /// Whether `self -> next` is a legal transition.
    pub fn can_advance_to(self, next: TaskState) -> bool {
        use TaskState::*;
        matches!(
            (self, next),
            (Initializing, Ready)
                | (Initializing, Failed)
                | (Ready, Running)
                | (Ready, Terminated)
                | (Ready, Failed)
                | (Running, Terminated)
                | (Running, Failed)
        ) || self == next
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceUsage {
    #[serde(serialize_with = "finite")]
    pub ram_mb_estimate: f64,
    pub open_sessions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatus {
    pub session_id: String,
    pub task_id: String,
    pub state: TaskState,
    pub steps_taken: u64,
    pub resource_usage: ResourceUsage,
    pub last_activity: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolConfig {
    pub toolset: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, Value>,
}

impl ToolConfig {
    pub fn named(toolset: impl Into<String>) -> Self {
        Self { toolset: toolset.into(), overrides: BTreeMap::new() }
    }

    pub fn with_override(mut self, key: impl Into<String>, value: Value) -> Self {
        self.overrides.insert(key.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebugTaskConfig {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(serialize_with = "finite")]
    pub expected_final_reward: f64,
    pub max_steps: u32,
}

impl DebugTaskConfig {
    pub fn new(task_id: impl Into<String>, seed: Option<u64>, max_steps: u32) -> Self {
        Self { task_id: task_id.into(), seed, expected_final_reward: 1.0, max_steps }
    }
}
