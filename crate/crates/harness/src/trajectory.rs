use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use cube_core::{canonical, ActionRequest, StepResult};
use cube_kit::Transport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub action: ActionRequest,
    pub result: StepResult,
}

/// The transport-independent part of a trajectory. This is what parity
/// checks compare and what JSONL files hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub benchmark_id: String,
    pub task_id: String,
    pub seed: Option<u64>,
    pub steps: Vec<TrajectoryStep>,
    #[serde(rename = "final")]
    pub final_result: StepResult,
}

impl TrajectoryRecord {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical::to_vec(self).expect("step results hold finite numbers only")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub record: TrajectoryRecord,
    pub transport: Transport,
    pub wall_time_ms: f64,
}

impl Trajectory {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.record.canonical_bytes()
    }

    pub fn final_result(&self) -> &StepResult {
        &self.record.final_result
    }

    pub fn len(&self) -> usize {
        self.record.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record.steps.is_empty()
    }
}

/// Writes one canonical JSON document per line.
pub fn write_trajectories<'a, I>(records: I, path: &Path) -> std::io::Result<()>
where
    I: IntoIterator<Item = &'a TrajectoryRecord>,
{
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        out.write_all(&record.canonical_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_trajectories(path: &Path) -> std::io::Result<Vec<TrajectoryRecord>> {
    BufReader::new(File::open(path)?)
        .lines()
        .filter(|line| !matches!(line, Ok(l) if l.trim().is_empty()))
        .map(|line| {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}
