use cube_core::{DebugTaskConfig, Tool, ToolConfig};
use cube_kit::{BenchmarkApi, StartError};

use super::debug_configs;
use crate::target::Suite;

const BOGUS_TOOLSET: &str = "no-such-toolset";

fn probe_tools(api: &dyn BenchmarkApi, probe: &DebugTaskConfig) -> Result<Vec<Tool>, String> {
    let task = api.spawn(&probe.task_id, probe.seed).map_err(|e| format!("spawn {}: {e}", probe.task_id))?;
    let tools = task.tools_list().map_err(|e| format!("tools/list: {e}"));
    let _ = task.close();
    tools
}

/// Restarts the package once per declared toolset: each restart must serve
/// the same benchmark, and tools/list must tell the toolsets apart. The
/// target itself must match the toolset it runs, and an unknown toolset
/// must be refused at start.
pub(crate) fn toolconfig_swap(suite: &Suite) -> Result<String, String> {
    let package = suite.package()?;
    let probe = debug_configs(suite)?.remove(0);
    let toolsets = package.toolsets();
    if toolsets.is_empty() {
        return Err("the package declares no toolsets".into());
    }
    let current = probe_tools(suite.api.as_ref(), &probe)?;

    let mut listed: Vec<(String, Vec<Tool>)> = Vec::new();
    for toolset in &toolsets {
        let fresh = suite.launch(ToolConfig::named(toolset)).map_err(|e| format!("restart with `{toolset}`: {e}"))?;
        let info = fresh.api.info().map_err(|e| format!("`{toolset}` info: {e}"))?;
        if (&info.name, &info.version, info.task_count) != (&suite.info.name, &suite.info.version, suite.info.task_count) {
            return Err(format!("restart with `{toolset}` serves {} {} with {} tasks", info.name, info.version, info.task_count));
        }
        let tools = probe_tools(fresh.api.as_ref(), &probe).map_err(|e| format!("`{toolset}`: {e}"))?;
        if let Some((other, _)) = listed.iter().find(|(_, t)| *t == tools) {
            return Err(format!("toolsets `{other}` and `{toolset}` list identical tools"));
        }
        listed.push((toolset.clone(), tools));
    }

    let matches: Vec<&str> = listed.iter().filter(|(_, t)| *t == current).map(|(n, _)| n.as_str()).collect();
    match &suite.tool_config {
        Some(tc) if !matches.contains(&tc.toolset.as_str()) => {
            return Err(format!("target started with `{}` but its tools/list does not match", tc.toolset));
        }
        None if matches.is_empty() => return Err("target tools/list matches no declared toolset".into()),
        _ => {}
    }

    match suite.launch(ToolConfig::named(BOGUS_TOOLSET)) {
        Err(StartError::ToolConfigInvalid(_)) => {}
        Err(other) => return Err(format!("unknown toolset refused with {other} instead of ToolConfigInvalid")),
        Ok(_) => return Err(format!("start accepted unknown toolset `{BOGUS_TOOLSET}`")),
    }
    Ok(format!("{} toolsets give distinct tools/list; unknown toolset refused", toolsets.len()))
}
