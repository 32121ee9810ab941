use cube_core::SplitMix64;

use super::{config_label, debug_configs, first_divergence, max_steps, replay};
use crate::script::random_script;
use crate::target::Suite;

const SCRIPT_SEED: u64 = 2;
const SCRIPTS_PER_CONFIG: usize = 3;
const MAX_SCRIPT_LEN: u32 = 16;

/// For each debug config and a few fixed action scripts: reset+replay twice
/// on one instance, then once on a fresh instance. All three must agree.
pub(crate) fn reset_idempotent(suite: &Suite) -> Result<String, String> {
    let api = suite.api.as_ref();
    let configs = debug_configs(suite)?;
    let mut rng = SplitMix64::new(SCRIPT_SEED);
    let mut replays = 0;
    for config in &configs {
        let label = config_label(config);
        let len = max_steps(api, &config.task_id)?.min(MAX_SCRIPT_LEN) as usize;
        for n in 0..SCRIPTS_PER_CONFIG {
            let first = api.spawn(&config.task_id, config.seed).map_err(|e| format!("{label}: spawn: {e}"))?;
            let tools = first.tools_list().map_err(|e| format!("{label}: tools/list: {e}"))?;
            let script = random_script(&tools, len, &mut rng);

            let a = replay(first.as_ref(), config.seed, &script);
            let b = replay(first.as_ref(), config.seed, &script);
            let _ = first.close();
            let second = api.spawn(&config.task_id, config.seed).map_err(|e| format!("{label}: spawn: {e}"))?;
            let c = replay(second.as_ref(), config.seed, &script);
            let _ = second.close();
            replays += 3;

            for (what, other) in [("second reset on the same instance", &b), ("a fresh instance", &c)] {
                if let Some(at) = first_divergence(&a, other) {
                    return Err(format!(
                        "{label} script {n}: {what} diverges at line {at}: {} vs {}",
                        a.get(at).map_or("<end>", String::as_str),
                        other.get(at).map_or("<end>", String::as_str)
                    ));
                }
            }
        }
    }
    Ok(format!("{replays} replays over {} configs agree", configs.len()))
}
