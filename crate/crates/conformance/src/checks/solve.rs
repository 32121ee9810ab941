use cube_harness::{run_episode, EpisodeOptions};
use cube_kit::debug_agent;

use super::{config_label, debug_configs};
use crate::target::Suite;

/// Every debug config: the debug agent ends the episode with the expected
/// reward and `terminated`.
pub(crate) fn debug_solve(suite: &Suite) -> Result<String, String> {
    let package = suite.package()?;
    let configs = debug_configs(suite)?;
    let mut failures = Vec::new();
    for config in &configs {
        let label = config_label(config);
        let mut agent = match debug_agent(package.as_ref(), &config.task_id) {
            Ok(agent) => agent,
            Err(e) => {
                failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        let options = EpisodeOptions { max_steps_override: Some(config.max_steps), ..Default::default() };
        match run_episode(suite.api.as_ref(), &config.task_id, config.seed, agent.as_mut(), &options) {
            Ok(t) => {
                let last = t.final_result();
                if last.reward != config.expected_final_reward || !last.terminated {
                    failures.push(format!(
                        "{label}: reward {} terminated {} after {} steps (expected reward {})",
                        last.reward,
                        last.terminated,
                        t.len(),
                        config.expected_final_reward
                    ));
                }
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    if failures.is_empty() {
        Ok(format!("{} debug configs solved", configs.len()))
    } else {
        Err(failures.join("; "))
    }
}
