use cube_core::{canonical, ActionRequest, SplitMix64};
use cube_kit::TaskApi;

use super::{config_label, debug_configs, error_entry, first_divergence, max_steps, replay, step_line};
use crate::script::random_script;
use crate::target::Suite;

pub(crate) const SESSIONS: usize = 16;
/// Seeds the interleaving schedule, so a failure replays exactly.
const SCHEDULE_SEED: u64 = 1;
const SCRIPT_SEED: u64 = 3;
const MAX_SCRIPT_LEN: u32 = 12;

struct Job {
    label: String,
    task_id: String,
    seed: Option<u64>,
    script: Vec<ActionRequest>,
    solo: Vec<String>,
    reproducible: bool,
}

/// Sixteen sessions spread over the debug configs, each with its own random
/// script. Every job runs solo twice first; jobs whose solo runs reproduce
/// must then give the same lines when interleaved on a fixed schedule and
/// when run on concurrent threads.
pub(crate) fn task_isolated(suite: &Suite) -> Result<String, String> {
    let api = suite.api.as_ref();
    let configs = debug_configs(suite)?;
    let mut rng = SplitMix64::new(SCRIPT_SEED);
    let mut jobs = Vec::with_capacity(SESSIONS);
    for j in 0..SESSIONS {
        let config = &configs[j % configs.len()];
        let label = format!("session {j} ({})", config_label(config));
        let len = max_steps(api, &config.task_id)?.min(MAX_SCRIPT_LEN) as usize;
        let first = api.spawn(&config.task_id, config.seed).map_err(|e| format!("{label}: spawn: {e}"))?;
        let tools = first.tools_list().map_err(|e| format!("{label}: tools/list: {e}"))?;
        let script = random_script(&tools, len, &mut rng);
        let solo = replay(first.as_ref(), config.seed, &script);
        let _ = first.close();
        let second = api.spawn(&config.task_id, config.seed).map_err(|e| format!("{label}: spawn: {e}"))?;
        let again = replay(second.as_ref(), config.seed, &script);
        let _ = second.close();
        jobs.push(Job {
            label,
            task_id: config.task_id.clone(),
            seed: config.seed,
            reproducible: solo == again,
            script,
            solo,
        });
    }
    let compared = jobs.iter().filter(|j| j.reproducible).count();
    if compared == 0 {
        return Err("no job reproduces when run solo; nothing to compare".into());
    }

    let interleaved = run_interleaved(suite, &jobs)?;
    compare(&jobs, &interleaved, "interleaved")?;
    let concurrent = run_concurrent(suite, &jobs)?;
    compare(&jobs, &concurrent, "concurrent")?;
    Ok(format!(
        "{SESSIONS} sessions, {compared} reproducible jobs equal their solo runs interleaved and concurrently"
    ))
}

fn spawn_all(suite: &Suite, jobs: &[Job]) -> Result<Vec<Box<dyn TaskApi>>, String> {
    let mut tasks = Vec::with_capacity(jobs.len());
    for job in jobs {
        match suite.api.spawn(&job.task_id, job.seed) {
            Ok(task) => tasks.push(task),
            Err(e) => {
                close_all(&tasks);
                return Err(format!("{}: spawn with {} sessions open: {e}", job.label, tasks.len()));
            }
        }
    }
    Ok(tasks)
}

fn close_all(tasks: &[Box<dyn TaskApi>]) {
    for task in tasks {
        let _ = task.close();
    }
}

fn run_interleaved(suite: &Suite, jobs: &[Job]) -> Result<Vec<Vec<String>>, String> {
    let tasks = spawn_all(suite, jobs)?;
    let mut lines: Vec<Vec<String>> = vec![Vec::new(); jobs.len()];
    let mut next = vec![0usize; jobs.len()];
    let mut live: Vec<usize> = Vec::new();
    for (j, task) in tasks.iter().enumerate() {
        match task.reset(jobs[j].seed) {
            Ok(r) => {
                lines[j].push(canonical::to_string(&r).expect("finite reset result"));
                if !jobs[j].script.is_empty() {
                    live.push(j);
                }
            }
            Err(e) => lines[j].push(canonical::value_to_string(&error_entry(&e))),
        }
    }
    let mut schedule = SplitMix64::new(SCHEDULE_SEED);
    while !live.is_empty() {
        let slot = schedule.below(live.len() as u64) as usize;
        let j = live[slot];
        let (line, done) = step_line(tasks[j].as_ref(), &jobs[j].script[next[j]]);
        lines[j].push(line);
        next[j] += 1;
        if done || next[j] == jobs[j].script.len() {
            live.remove(slot);
        }
    }
    close_all(&tasks);
    Ok(lines)
}

fn run_concurrent(suite: &Suite, jobs: &[Job]) -> Result<Vec<Vec<String>>, String> {
    let tasks = spawn_all(suite, jobs)?;
    let lines = std::thread::scope(|scope| {
        let handles: Vec<_> = tasks
            .iter()
            .zip(jobs)
            .map(|(task, job)| scope.spawn(move || replay(task.as_ref(), job.seed, &job.script)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| vec!["<panicked>".into()])).collect()
    });
    close_all(&tasks);
    Ok(lines)
}

fn compare(jobs: &[Job], runs: &[Vec<String>], how: &str) -> Result<(), String> {
    for (job, run) in jobs.iter().zip(runs).filter(|(j, _)| j.reproducible) {
        if let Some(at) = first_divergence(&job.solo, run) {
            return Err(format!(
                "{} {how}: line {at} differs from the solo run: {} vs {}",
                job.label,
                job.solo.get(at).map_or("<end>", String::as_str),
                run.get(at).map_or("<end>", String::as_str)
            ));
        }
    }
    Ok(())
}
