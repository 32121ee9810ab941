use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use cube_cli::{benchmark, exit, package_behind, TargetArg};
use cube_harness::{connect, run_parallel, write_trajectories, HarnessError, Job, RolloutPlan, Target};
use cube_kit::{debug_agent, start, Agent, BenchmarkImpl, StartOptions};

/// Run episodes against a benchmark and write trajectories as JSONL.
#[derive(Parser)]
#[command(name = "cube-run", version)]
struct Cli {
    /// `local:<benchmark-id>` or a benchmark endpoint URL.
    #[arg(long)]
    target: TargetArg,
    /// Task to run; ignored when --jobs-file is given.
    #[arg(long, required_unless_present = "jobs_file")]
    task: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "debug")]
    agent: String,
    /// Worker count; overrides the plan's parallelism.
    #[arg(long)]
    parallel: Option<usize>,
    /// A rollout plan (`{"jobs": [...], "parallelism": K}`) or a bare list of jobs.
    #[arg(long)]
    jobs_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    cube_cli::init_logging();
    let cli: Cli = cube_cli::parse_args();
    ExitCode::from(run(cli) as u8)
}

fn load_plan(cli: &Cli) -> Result<RolloutPlan, String> {
    let mut plan = match &cli.jobs_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if value.is_array() {
                let jobs: Vec<Job> = serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))?;
                RolloutPlan::new(jobs, 1)
            } else {
                serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))?
            }
        }
        None => {
            let task = cli.task.clone().expect("clap requires --task");
            let mut job = Job::new(task, cli.seed);
            job.agent = cli.agent.clone();
            RolloutPlan::new(vec![job], 1)
        }
    };
    if let Some(k) = cli.parallel {
        plan.parallelism = k;
    }
    plan.validate().map_err(|e| e.to_string())?;
    Ok(plan)
}

fn run(cli: Cli) -> i32 {
    let plan = match load_plan(&cli) {
        Ok(plan) => plan,
        Err(e) => {
            eprintln!("cube-run: {e}");
            return exit::USAGE;
        }
    };

    // The package provides debug agents; over a URL it is found by name.
    let (target, package): (Target, Option<Arc<dyn BenchmarkImpl>>) = match &cli.target {
        TargetArg::Local(id) => {
            let package = match benchmark(id) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("cube-run: {e}");
                    return exit::USAGE;
                }
            };
            let toolset = package.toolsets().first().cloned().unwrap_or_default();
            match start(package.clone(), StartOptions::local(cube_core::ToolConfig::named(toolset))) {
                Ok(started) => (Target::Local(started.into_local().expect("local mode")), Some(package)),
                Err(e) => {
                    eprintln!("cube-run: {e}");
                    return exit::FAILED;
                }
            }
        }
        TargetArg::Url(url) => match package_behind(url) {
            Ok(package) => (Target::Url(url.clone()), package),
            Err(e) => {
                eprintln!("cube-run: {e}");
                return exit::FAILED;
            }
        },
    };
    let bench = match connect(target) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("cube-run: {e}");
            return exit::FAILED;
        }
    };

    let agents = |job: &Job| -> Result<Box<dyn Agent>, HarnessError> {
        match (job.agent.as_str(), &package) {
            ("debug", Some(package)) => Ok(debug_agent(package.as_ref(), &job.task_id)?),
            _ => Err(HarnessError::UnknownAgent(job.agent.clone())),
        }
    };
    let results = match run_parallel(bench.as_ref(), &plan, &agents) {
        Ok(results) => results,
        Err(e) => {
            eprintln!("cube-run: {e}");
            return exit::USAGE;
        }
    };

    let mut failures = 0;
    let mut records = Vec::new();
    for (job, result) in plan.jobs.iter().zip(results) {
        match result {
            Ok(trajectory) => {
                let last = trajectory.final_result();
                println!(
                    "{} seed={} steps={} reward={} terminated={}",
                    job.task_id,
                    job.seed.map_or("-".into(), |s| s.to_string()),
                    trajectory.len(),
                    cube_core::canonical::format_f64(last.reward),
                    last.terminated
                );
                records.push(trajectory.record);
            }
            Err(e) => {
                failures += 1;
                let kind = if e.is_transport() { "transport error" } else { "error" };
                eprintln!("cube-run: {} ({kind}): {e}", job.task_id);
            }
        }
    }
    if let Err(e) = write_trajectories(&records, &cli.out) {
        eprintln!("cube-run: cannot write {}: {e}", cli.out.display());
        return exit::FAILED;
    }
    if failures == 0 {
        exit::OK
    } else {
        exit::FAILED
    }
}
