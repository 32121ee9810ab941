mod isolation;
mod reset;
mod resources;
mod shape;
mod solve;
mod toolconfig;

pub(crate) use isolation::task_isolated;
pub(crate) use reset::reset_idempotent;
pub(crate) use resources::resource_bounded;
pub(crate) use shape::protocol_shape;
pub(crate) use solve::debug_solve;
pub(crate) use toolconfig::toolconfig_swap;

use cube_core::{canonical, ActionRequest, CubeError, DebugTaskConfig, TaskFilter};
use cube_kit::{BenchmarkApi, TaskApi};
use serde_json::{json, Value};

use crate::target::Suite;

/// Debug configs of the package, or a failure when there are none.
fn debug_configs(suite: &Suite) -> Result<Vec<DebugTaskConfig>, String> {
    let configs = suite.package()?.debug_task_configs();
    if configs.is_empty() {
        return Err("the package declares no debug task configs".into());
    }
    Ok(configs)
}

fn max_steps(api: &dyn BenchmarkApi, task_id: &str) -> Result<u32, String> {
    let filter = TaskFilter { id_prefix: Some(task_id.to_owned()), ..Default::default() };
    api.all_tasks(Some(&filter))
        .map_err(|e| format!("listing `{task_id}`: {e}"))?
        .into_iter()
        .find(|t| t.task_id == task_id)
        .map(|t| t.max_steps)
        .ok_or_else(|| format!("debug task `{task_id}` is not listed"))
}

fn error_entry(e: &CubeError) -> Value {
    json!({ "error": e.code() })
}

/// Reset with `seed`, then play `script` until the episode ends. Each reset
/// and step result (or error) becomes one canonical line.
fn replay(task: &dyn TaskApi, seed: Option<u64>, script: &[ActionRequest]) -> Vec<String> {
    let mut lines = Vec::with_capacity(script.len() + 1);
    match task.reset(seed) {
        Ok(r) => lines.push(canonical::to_string(&r).expect("finite reset result")),
        Err(e) => {
            lines.push(canonical::value_to_string(&error_entry(&e)));
            return lines;
        }
    }
    for action in script {
        match step_line(task, action) {
            (line, true) => {
                lines.push(line);
                break;
            }
            (line, false) => lines.push(line),
        }
    }
    lines
}

/// One step as a canonical line, and whether the episode is over.
fn step_line(task: &dyn TaskApi, action: &ActionRequest) -> (String, bool) {
    match task.step(action) {
        Ok(r) => {
            let done = r.is_done();
            (canonical::to_string(&r).expect("finite step result"), done)
        }
        Err(e) => (canonical::value_to_string(&error_entry(&e)), true),
    }
}

/// Index of the first line where two replays disagree.
fn first_divergence(a: &[String], b: &[String]) -> Option<usize> {
    (0..a.len().max(b.len())).find(|&i| a.get(i) != b.get(i))
}

fn config_label(config: &DebugTaskConfig) -> String {
    match config.seed {
        Some(seed) => format!("{}@{seed}", config.task_id),
        None => config.task_id.clone(),
    }
}
