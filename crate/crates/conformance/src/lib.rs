//! Conformance suite for CUBE benchmarks.
//!
//! [`run_suite`] treats the target as a black box: everything goes through
//! [`BenchmarkApi`](cube_kit::BenchmarkApi), so the same checks run against
//! an in-process package, a package the suite serves itself, or a URL.
//! Check failures are data in the [`ComplianceReport`]; the only error is an
//! unreachable target.

mod checks;
mod script;
mod target;

use std::panic::{catch_unwind, AssertUnwindSafe};

use chrono::{DateTime, Utc};
use cube_core::{ResourceConfig, ResourceKind};
use serde::{Deserialize, Serialize};

pub use script::{random_action, random_script};
pub use target::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Basic,
    Stress,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Basic => "basic",
            Level::Stress => "stress",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "basic" => Ok(Level::Basic),
            "stress" => Ok(Level::Stress),
            other => Err(format!("unknown level `{other}` (expected basic or stress)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    pub level: Level,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(check_id: &str, level: Level, outcome: Result<String, String>) -> Self {
        let (passed, detail) = match outcome {
            Ok(detail) => (true, detail),
            Err(detail) => (false, detail),
        };
        Self { check_id: check_id.to_owned(), level, passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceReport {
    pub benchmark_id: String,
    pub version: String,
    pub checks: Vec<CheckResult>,
    pub badges: Vec<String>,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
}

impl ComplianceReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, check_id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check_id == check_id)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.check_id.as_str()).collect()
    }

    /// (check_id, passed) in suite order.
    pub fn verdicts(&self) -> Vec<(String, bool)> {
        self.checks.iter().map(|c| (c.check_id.clone(), c.passed)).collect()
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        cube_core::canonical::to_vec(self).expect("reports hold finite values only")
    }
}

pub const PROTOCOL_SHAPE: &str = "protocol-shape";
pub const DEBUG_SOLVE: &str = "debug-solve";
pub const RESET_IDEMPOTENT: &str = "reset-idempotent";
pub const TASK_ISOLATED: &str = "task-isolated";
pub const RESOURCE_BOUNDED: &str = "resource-bounded";
pub const TOOLCONFIG_SWAP: &str = "toolconfig-swap";
/// Declaration-only: present when the benchmark declares a rootless container.
pub const ROOTLESS_DECLARED: &str = "rootless-declared";

pub const BASIC_CHECKS: [&str; 3] = [PROTOCOL_SHAPE, DEBUG_SOLVE, RESET_IDEMPOTENT];
pub const STRESS_CHECKS: [&str; 3] = [TASK_ISOLATED, RESOURCE_BOUNDED, TOOLCONFIG_SWAP];

/// Badge name and the checks it requires.
pub const BADGE_TABLE: &[(&str, &[&str])] = &[
    ("task-isolated", &[TASK_ISOLATED]),
    ("reset-idempotent", &[RESET_IDEMPOTENT]),
    ("debug-solvable", &[DEBUG_SOLVE]),
    ("no-docker-root", &[ROOTLESS_DECLARED]),
];

/// Badges whose constituent checks are all present and passed, in table order.
pub fn derive_badges(report: &ComplianceReport) -> Vec<String> {
    BADGE_TABLE
        .iter()
        .filter(|(_, needs)| needs.iter().all(|id| report.check(id).is_some_and(|c| c.passed)))
        .map(|(badge, _)| (*badge).to_owned())
        .collect()
}

/// True when the resource declaration claims a container without root.
pub fn declares_rootless(resources: &ResourceConfig) -> bool {
    resources.kind == ResourceKind::Container
        && resources.notes.as_deref().is_some_and(|n| n.to_ascii_lowercase().contains("rootless"))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SuiteError {
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
}

/// Runs every check of `level` (stress includes basic) in a fixed order.
/// A check that panics is recorded as failed; the suite never stops early.
pub fn run_suite(target: Target, level: Level) -> Result<ComplianceReport, SuiteError> {
    let started = Utc::now();
    let suite = target.open()?;
    let info = suite.info.clone();

    let mut plan: Vec<(&str, Level, fn(&target::Suite) -> Result<String, String>)> = vec![
        (PROTOCOL_SHAPE, Level::Basic, checks::protocol_shape),
        (DEBUG_SOLVE, Level::Basic, checks::debug_solve),
        (RESET_IDEMPOTENT, Level::Basic, checks::reset_idempotent),
    ];
    if level == Level::Stress {
        plan.extend([
            (TASK_ISOLATED, Level::Stress, checks::task_isolated as fn(&target::Suite) -> Result<String, String>),
            (RESOURCE_BOUNDED, Level::Stress, checks::resource_bounded),
            (TOOLCONFIG_SWAP, Level::Stress, checks::toolconfig_swap),
        ]);
    }

    let mut results = Vec::new();
    for (id, check_level, check) in plan {
        log::info!("running {id}");
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&suite)))
            .unwrap_or_else(|panic| Err(format!("check panicked: {}", panic_text(&panic))));
        if let Err(detail) = &outcome {
            log::warn!("{id} failed: {detail}");
        }
        results.push(CheckResult::new(id, check_level, outcome));
    }
    if declares_rootless(&info.resource_requirements) {
        let note = info.resource_requirements.notes.clone().unwrap_or_default();
        results.push(CheckResult::new(ROOTLESS_DECLARED, Level::Basic, Ok(format!("declared, not inspected: {note}"))));
    }
    drop(suite);

    let mut report = ComplianceReport {
        benchmark_id: info.name,
        version: info.version,
        checks: results,
        badges: Vec::new(),
        started,
        finished: Utc::now(),
    };
    report.badges = derive_badges(&report);
    Ok(report)
}

fn panic_text(panic: &Box<dyn std::any::Any + Send>) -> String {
    panic
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| panic.downcast_ref::<&str>().map(|s| (*s).to_owned()))
        .unwrap_or_else(|| "non-string panic".into())
}
