use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use cube_core::{CubeError, DebugTaskConfig, TaskState};
use cube_kit::{BenchmarkApi, TaskApi};

use super::debug_configs;
use crate::target::Suite;

const SPAWNERS: usize = 8;
/// Stop spawning here even if the target never refuses.
const SPAWN_CEILING: usize = 256;

/// Spawns from several threads until the target refuses, while another
/// thread polls `cube/status`. Every snapshot must stay within the declared
/// RAM, agree with its own session count and only move sessions forward.
/// The refusal must be ResourceExhausted, and closing everything must leave
/// none of the suite's sessions behind.
pub(crate) fn resource_bounded(suite: &Suite) -> Result<String, String> {
    let api = suite.api.as_ref();
    let declared_mb = suite.info.resource_requirements.ram_mb();
    let configs = debug_configs(suite)?;
    let baseline = api.status().map_err(|e| format!("cube/status: {e}"))?.len();

    let opened: Mutex<Vec<Box<dyn TaskApi>>> = Mutex::default();
    let refusals: Mutex<Vec<CubeError>> = Mutex::default();
    let done = AtomicBool::new(false);
    let (peak, violations) = std::thread::scope(|scope| {
        let poller = scope.spawn(|| poll(api, declared_mb, &done));
        let spawners: Vec<_> = (0..SPAWNERS)
            .map(|w| {
                let (opened, refusals, configs) = (&opened, &refusals, &configs);
                scope.spawn(move || spawn_until_refused(api, &configs[w % configs.len()], opened, refusals))
            })
            .collect();
        for s in spawners {
            let _ = s.join();
        }
        // One last poll with everything open.
        std::thread::sleep(Duration::from_millis(5));
        done.store(true, Ordering::SeqCst);
        poller.join().unwrap_or_else(|_| (0, vec!["status poller panicked".into()]))
    });

    let tasks = opened.into_inner().unwrap();
    let refusals = refusals.into_inner().unwrap();
    let mut problems = violations;
    let final_status = api.status();
    for task in &tasks {
        let _ = task.close();
    }
    match final_status {
        Ok(status) if status.len() < tasks.len() => {
            problems.push(format!("{} sessions open but status lists {}", tasks.len(), status.len()))
        }
        Err(e) => problems.push(format!("cube/status: {e}")),
        _ => {}
    }
    for refusal in &refusals {
        if !matches!(refusal, CubeError::ResourceExhausted(_)) {
            problems.push(format!("spawn refused with {refusal} instead of ResourceExhausted"));
        }
    }
    let ours: Vec<&str> = tasks.iter().map(|t| t.ticket().session_id.as_str()).collect();
    match api.status() {
        Ok(after) => {
            let left: Vec<_> = after.iter().filter(|s| ours.contains(&s.session_id.as_str())).collect();
            if !left.is_empty() {
                problems.push(format!("{} sessions still listed after close", left.len()));
            }
            if after.len() > baseline {
                problems.push(format!("{} sessions open after close, {baseline} before", after.len()));
            }
        }
        Err(e) => problems.push(format!("cube/status after close: {e}")),
    }

    if problems.is_empty() {
        let refused = if refusals.is_empty() { "never refused" } else { "then refused" };
        Ok(format!(
            "{} sessions ({refused}), peak estimate {peak} MB of {declared_mb} MB declared",
            tasks.len()
        ))
    } else {
        Err(problems.join("; "))
    }
}

fn spawn_until_refused(
    api: &dyn BenchmarkApi,
    config: &DebugTaskConfig,
    opened: &Mutex<Vec<Box<dyn TaskApi>>>,
    refusals: &Mutex<Vec<CubeError>>,
) {
    loop {
        if opened.lock().unwrap().len() >= SPAWN_CEILING {
            return;
        }
        match api.spawn(&config.task_id, config.seed) {
            Ok(task) => {
                let _ = task.reset(config.seed);
                opened.lock().unwrap().push(task);
            }
            Err(e) => {
                refusals.lock().unwrap().push(e);
                return;
            }
        }
    }
}

/// Returns the peak estimate seen and any violated bound.
fn poll(api: &dyn BenchmarkApi, declared_mb: f64, done: &AtomicBool) -> (u64, Vec<String>) {
    let mut states: BTreeMap<String, TaskState> = BTreeMap::new();
    let mut peak = 0.0f64;
    let mut problems = Vec::new();
    loop {
        let last = done.load(Ordering::SeqCst);
        match api.status() {
            Ok(status) => {
                for s in &status {
                    let usage = &s.resource_usage;
                    peak = peak.max(usage.ram_mb_estimate);
                    if usage.ram_mb_estimate > declared_mb {
                        problems.push(format!("estimate {} MB exceeds {declared_mb} MB", usage.ram_mb_estimate));
                    }
                    if usage.open_sessions != status.len() as u64 {
                        problems.push(format!(
                            "open_sessions {} but {} sessions listed",
                            usage.open_sessions,
                            status.len()
                        ));
                    }
                    if let Some(prev) = states.insert(s.session_id.clone(), s.state) {
                        if !prev.can_advance_to(s.state) {
                            problems.push(format!("session {} went {prev:?} -> {:?}", s.session_id, s.state));
                        }
                    }
                }
            }
            Err(e) => problems.push(format!("cube/status: {e}")),
        }
        if last || problems.len() > 8 {
            problems.dedup();
            return (peak as u64, problems);
        }
        std::thread::sleep(Duration::from_millis(2));
    }
}
