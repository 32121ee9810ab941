use cube_core::{ActionRequest, StepResult, Tool};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Act(ActionRequest),
    Stop,
}

/// A policy driven by a harness.
///
/// `obs` is the observation from the last reset or step, `tools` the task's
/// advertised tool list and `last` the previous step result, absent right
/// after a reset. Agents that never stop are cut off at the task's
/// `max_steps`.
pub trait Agent: Send {
    fn act(&mut self, obs: &Value, tools: &[Tool], last: Option<&StepResult>) -> Decision;
}

impl<F> Agent for F
where
    F: FnMut(&Value, &[Tool], Option<&StepResult>) -> Decision + Send,
{
    fn act(&mut self, obs: &Value, tools: &[Tool], last: Option<&StepResult>) -> Decision {
        self(obs, tools, last)
    }
}
