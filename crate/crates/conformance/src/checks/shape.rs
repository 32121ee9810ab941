use std::collections::BTreeSet;

use cube_core::{
    codes, validate_action, ActionRequest, BenchmarkInfo, DebugTaskConfig, Method, MethodLevel, Namespace,
    SplitMix64, Tool, DESCRIPTION_URI, OBSERVATION_URI,
};
use cube_kit::{debug_agent, Decision, TaskApi};
use serde_json::{json, Value};

use super::config_label;
use crate::script::random_action;
use crate::target::Suite;

const BOGUS_METHODS: [&str; 4] = ["cube/bogus", "tools/bogus", "resources/bogus", "gym/step"];
const STEP_KEYS: [&str; 5] = ["info", "obs", "reward", "terminated", "truncated"];
const RESET_KEYS: [&str; 2] = ["info", "obs"];

#[derive(Default)]
struct Findings(Vec<String>);

impl Findings {
    fn note(&mut self, problem: impl Into<String>) {
        self.0.push(problem.into());
    }

    fn exact_keys(&mut self, what: &str, value: &Value, keys: &[&str]) {
        let got: Vec<&str> = value.as_object().map(|o| o.keys().map(String::as_str).collect()).unwrap_or_default();
        if got != keys {
            self.note(format!("{what} has keys {got:?}, expected {keys:?}"));
        }
    }

    fn has_keys(&mut self, what: &str, value: &Value, keys: &[&str]) {
        for key in keys {
            if value.get(key).is_none() {
                self.note(format!("{what} lacks `{key}`"));
            }
        }
    }

    fn step_shape(&mut self, what: &str, value: &Value) {
        self.exact_keys(what, value, &STEP_KEYS);
        if !value["reward"].is_number() {
            self.note(format!("{what}: reward is not a number"));
        }
        for flag in ["terminated", "truncated"] {
            if !value[flag].is_boolean() {
                self.note(format!("{what}: {flag} is not a boolean"));
            }
        }
    }

    fn not_found(&mut self, what: &str, reply: Result<Value, cube_core::RpcError>) {
        match reply {
            Err(e) if e.code == codes::METHOD_NOT_FOUND => {}
            Err(e) => self.note(format!("{what}: expected method-not-found, got {} {}", e.code, e.message)),
            Ok(_) => self.note(format!("{what}: expected method-not-found, got a result")),
        }
    }

    /// The method must exist: any outcome but method-not-found.
    fn present(&mut self, what: &str, reply: Result<Value, cube_core::RpcError>) -> Option<Value> {
        match reply {
            Ok(v) => Some(v),
            Err(e) if e.code == codes::METHOD_NOT_FOUND => {
                self.note(format!("{what} is missing"));
                None
            }
            Err(e) => {
                self.note(format!("{what} failed: {} {}", e.code, e.message));
                None
            }
        }
    }
}

/// Wire shape of every method on both endpoint levels, the namespace
/// partition, well-formed tool schemas, and debug actions that validate
/// against the advertised tools.
pub(crate) fn protocol_shape(suite: &Suite) -> Result<String, String> {
    let mut f = Findings::default();
    let configs = suite.package.as_ref().map(|p| p.debug_task_configs()).unwrap_or_default();

    for method in Method::all() {
        if Namespace::of(method.as_str()) != Some(method.namespace()) {
            f.note(format!("{} is outside its namespace", method.as_str()));
        }
    }
    check_listing(suite, &configs, &mut f);
    let probe = probe_target(suite, &configs)?;
    check_benchmark_level(suite, &probe, &mut f);
    check_task_level(suite, &probe, &mut f);
    let actions = check_debug_actions(suite, &configs, &mut f);

    if f.0.is_empty() {
        Ok(format!("{} methods answer on their level; {actions} debug actions match tools/list", Method::all().count()))
    } else {
        f.0.dedup();
        Err(f.0.join("; "))
    }
}

fn check_listing(suite: &Suite, configs: &[DebugTaskConfig], f: &mut Findings) {
    let info: &BenchmarkInfo = &suite.info;
    if semver::Version::parse(&info.version).is_err() {
        f.note(format!("version `{}` is not a semantic version", info.version));
    }
    if let Err(e) = info.resource_requirements.validate() {
        f.note(format!("resource_requirements: {e}"));
    }
    let tasks = match suite.api.all_tasks(None) {
        Ok(t) => t,
        Err(e) => return f.note(format!("cube/tasks: {e}")),
    };
    if tasks.len() as u64 != info.task_count {
        f.note(format!("task_count {} but {} tasks listed", info.task_count, tasks.len()));
    }
    let ids: Vec<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
    if ids.windows(2).any(|w| w[0] >= w[1]) {
        f.note("task listing is not sorted by unique task_id");
    }
    for t in tasks.iter().filter(|t| t.max_steps == 0) {
        f.note(format!("task `{}` has max_steps 0", t.task_id));
    }
    for c in configs.iter().filter(|c| !ids.contains(&c.task_id.as_str())) {
        f.note(format!("debug config `{}` names an unlisted task", c.task_id));
    }
}

struct Probe {
    task_id: String,
    seed: Option<u64>,
}

fn probe_target(suite: &Suite, configs: &[DebugTaskConfig]) -> Result<Probe, String> {
    if let Some(c) = configs.first() {
        return Ok(Probe { task_id: c.task_id.clone(), seed: c.seed });
    }
    let first = suite
        .api
        .all_tasks(None)
        .map_err(|e| format!("cube/tasks: {e}"))?
        .into_iter()
        .next()
        .ok_or("the benchmark lists no tasks")?;
    Ok(Probe { seed: first.stochastic.then_some(0), task_id: first.task_id })
}

fn check_benchmark_level(suite: &Suite, probe: &Probe, f: &mut Findings) {
    let api = suite.api.as_ref();
    if let Some(info) = f.present("cube/info", api.raw_call("cube/info", json!({}))) {
        f.has_keys("cube/info", &info, &["description", "name", "resource_requirements", "task_count", "version"]);
    }
    if let Some(page) = f.present("cube/tasks", api.raw_call("cube/tasks", json!({}))) {
        f.has_keys("cube/tasks", &page, &["items"]);
    }
    if let Some(status) = f.present("cube/status", api.raw_call("cube/status", json!({}))) {
        if !status.is_array() {
            f.note("cube/status is not a list");
        }
    }
    let spawn = api.raw_call("cube/spawn", json!({ "task_id": probe.task_id, "seed": probe.seed }));
    if let Some(ticket) = f.present("cube/spawn", spawn) {
        f.has_keys("cube/spawn", &ticket, &["endpoint", "session_id", "task_id"]);
        let session = ticket["session_id"].clone();
        if let Some(done) = f.present("cube/shutdown", api.raw_call("cube/shutdown", json!({ "session_id": session }))) {
            if !done.is_null() {
                f.note("cube/shutdown returned a value");
            }
        }
    }
    for method in Method::all().filter(|m| m.level() == MethodLevel::Task) {
        f.not_found(&format!("{} on the benchmark endpoint", method.as_str()), api.raw_call(method.as_str(), json!({})));
    }
    for bogus in BOGUS_METHODS {
        f.not_found(&format!("{bogus} on the benchmark endpoint"), api.raw_call(bogus, json!({})));
    }
}

fn check_tools(tools: &[Tool], f: &mut Findings) {
    let names: BTreeSet<&str> = tools.iter().map(|t| t.name.as_str()).collect();
    if names.len() != tools.len() {
        f.note("tools/list repeats a tool name");
    }
    for tool in tools {
        let schema = &tool.input_schema;
        if !schema.is_well_formed() {
            f.note(format!("tool `{}` requires an undeclared property", tool.name));
        }
        for (key, prop) in &schema.properties {
            let bad = prop.allowed.iter().flatten().any(|v| !prop.ty.accepts(v));
            if bad || prop.allowed.as_ref().is_some_and(Vec::is_empty) {
                f.note(format!("tool `{}` property `{key}` has an invalid enum", tool.name));
            }
        }
    }
}

fn check_task_level(suite: &Suite, probe: &Probe, f: &mut Findings) {
    let task = match suite.api.spawn(&probe.task_id, probe.seed) {
        Ok(t) => t,
        Err(e) => return f.note(format!("spawn `{}`: {e}", probe.task_id)),
    };
    let call = |method: &str, params: Value| task.raw_call(method, params);

    match call("cube/evaluate", json!({})) {
        Err(e) if e.code == codes::NOT_RESET_YET => {}
        other => f.note(format!("cube/evaluate before reset: expected not-reset-yet, got {other:?}")),
    }

    let mut tools = Vec::new();
    if let Some(listed) = f.present("tools/list", call("tools/list", json!({}))) {
        f.exact_keys("tools/list", &listed, &["tools"]);
        match serde_json::from_value::<Vec<Tool>>(listed["tools"].clone()) {
            Ok(t) => tools = t,
            Err(e) => f.note(format!("tools/list entries: {e}")),
        }
        check_tools(&tools, f);
    }
    if let Some(listed) = f.present("resources/list", call("resources/list", json!({}))) {
        let uris: Vec<&str> = listed["resources"].as_array().into_iter().flatten().filter_map(|r| r["uri"].as_str()).collect();
        for required in [DESCRIPTION_URI, OBSERVATION_URI] {
            if !uris.contains(&required) {
                f.note(format!("resources/list lacks {required}"));
            }
        }
        if uris.iter().collect::<BTreeSet<_>>().len() != uris.len() {
            f.note("resources/list repeats a uri");
        }
    }

    let mut obs = Value::Null;
    if let Some(reset) = f.present("cube/reset", call("cube/reset", json!({ "seed": probe.seed }))) {
        f.exact_keys("cube/reset", &reset, &RESET_KEYS);
        obs = reset["obs"].clone();
    }
    if let Some(read) = f.present("resources/read", call("resources/read", json!({ "uri": OBSERVATION_URI }))) {
        if read["contents"][0]["payload"] != obs {
            f.note("observation resource differs from the reset observation");
        }
    }
    if let Some(read) = f.present("resources/read", call("resources/read", json!({ "uri": DESCRIPTION_URI }))) {
        if read["contents"][0]["payload"].as_str().is_none_or(str::is_empty) {
            f.note("description resource is not a non-empty text block");
        }
    }
    if call("resources/read", json!({ "uri": "cube://task/nothing" })).is_ok() {
        f.note("resources/read accepted an unknown uri");
    }
    if let Some(eval) = f.present("cube/evaluate", call("cube/evaluate", json!({}))) {
        f.step_shape("cube/evaluate", &eval);
    }
    if let Some(info) = f.present("cube/privileged_info", call("cube/privileged_info", json!({}))) {
        if !info.is_string() {
            f.note("cube/privileged_info is not a string");
        }
    }

    let mut rng = SplitMix64::new(4);
    if let Some(action) = random_action(&tools, &mut rng) {
        let params = json!({ "name": action.name, "args": action.args });
        if let Some(result) = f.present("tools/call", call("tools/call", params)) {
            f.exact_keys("tools/call", &result, &["content", "is_error"]);
        }
        let action = random_action(&tools, &mut rng).expect("tools are listed");
        match call("cube/step", json!({ "action": action })) {
            Ok(step) => f.step_shape("cube/step", &step),
            Err(e) if e.code == codes::TASK_TERMINATED => {}
            Err(e) => f.note(format!("cube/step failed: {} {}", e.code, e.message)),
        }
    }

    for method in Method::all().filter(|m| m.level() == MethodLevel::Benchmark) {
        f.not_found(&format!("{} on a task endpoint", method.as_str()), call(method.as_str(), json!({})));
    }
    for bogus in BOGUS_METHODS {
        f.not_found(&format!("{bogus} on a task endpoint"), call(bogus, json!({})));
    }
    if let Some(closed) = f.present("cube/close", call("cube/close", json!({}))) {
        if !closed.is_null() {
            f.note("cube/close returned a value");
        }
    }
    if task.tools_list().is_ok() {
        f.note("a closed task still answers tools/list");
    }
}

/// Plays each debug episode, validating every action against the tools the
/// task advertises. Returns how many actions were checked.
fn check_debug_actions(suite: &Suite, configs: &[DebugTaskConfig], f: &mut Findings) -> usize {
    let Some(package) = suite.package.as_ref() else {
        return 0;
    };
    let mut checked = 0;
    for config in configs {
        let label = config_label(config);
        let Ok(mut agent) = debug_agent(package.as_ref(), &config.task_id) else {
            continue;
        };
        let task = match suite.api.spawn(&config.task_id, config.seed) {
            Ok(t) => t,
            Err(e) => {
                f.note(format!("{label}: spawn: {e}"));
                continue;
            }
        };
        checked += play_checked(task.as_ref(), config, agent.as_mut(), &label, f);
        let _ = task.close();
    }
    checked
}

fn play_checked(
    task: &dyn TaskApi,
    config: &DebugTaskConfig,
    agent: &mut dyn cube_kit::Agent,
    label: &str,
    f: &mut Findings,
) -> usize {
    let (mut obs, tools) = match (task.reset(config.seed), task.tools_list()) {
        (Ok(r), Ok(t)) => (r.obs, t),
        (Err(e), _) | (_, Err(e)) => {
            f.note(format!("{label}: {e}"));
            return 0;
        }
    };
    let mut last = None;
    let mut n = 0;
    while n < config.max_steps as usize {
        let action: ActionRequest = match agent.act(&obs, &tools, last.as_ref()) {
            Decision::Act(a) => a,
            Decision::Stop => break,
        };
        n += 1;
        let fault = validate_action(&action, &tools).err();
        let result = match task.step(&action) {
            Ok(r) => r,
            Err(e) => {
                f.note(format!("{label}: step {n}: {e}"));
                break;
            }
        };
        if let Some(fault) = fault {
            f.note(format!("{label}: debug action `{}` does not match tools/list ({fault})", fault.offending()));
            break;
        }
        obs = result.obs.clone();
        let done = result.is_done();
        last = Some(result);
        if done {
            break;
        }
    }
    n
}
