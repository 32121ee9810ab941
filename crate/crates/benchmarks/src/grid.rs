//! Treasure grid: walk an agent to the treasure on a small grid.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use cube_core::{
    ActionRequest, DebugTaskConfig, InputSchema, PropertySchema, ResourceConfig, StepResult, TaskDescriptor, Tool,
    ToolCallResult,
};
use cube_kit::{Agent, BenchmarkImpl, BenchmarkMeta, Decision, Evaluation, RuntimeContext, TaskImpl, TaskSpawn};
use serde_json::{json, Map, Value};

use crate::splitmix::SplitMix64;

pub type Pos = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    /// Preference order of the debug agent.
    pub const ALL: [Direction; 4] = [Direction::East, Direction::South, Direction::West, Direction::North];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::South => "south",
            Direction::East => "east",
            Direction::West => "west",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.as_str() == s)
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::South => (1, 0),
            Direction::East => (0, 1),
            Direction::West => (0, -1),
        }
    }
}

/// A static task definition.
#[derive(Debug)]
pub struct GridSpec {
    pub id: &'static str,
    pub title: &'static str,
    pub tags: &'static [&'static str],
    /// `#` marks a wall, anything else is floor.
    pub rows: &'static [&'static str],
    /// `None` for seeded tasks.
    pub start: Option<Pos>,
    pub goal: Pos,
    pub max_steps: u32,
}

pub const WALLED_7X7: &[&str] = &["...#...", ".#.#.#.", ".#...#.", ".###.#.", "...#...", "##.###.", ".....#."];

pub const TASKS: &[GridSpec] = &[
    GridSpec {
        id: "grid-3x3",
        title: "Open 3x3 grid",
        tags: &["grid", "small"],
        rows: &["...", "...", "..."],
        start: Some((0, 0)),
        goal: (2, 2),
        max_steps: 12,
    },
    GridSpec {
        id: "grid-5x5",
        title: "Open 5x5 grid",
        tags: &["grid", "medium"],
        rows: &[".....", ".....", ".....", ".....", "....."],
        start: Some((0, 0)),
        goal: (4, 4),
        max_steps: 24,
    },
    GridSpec {
        id: "grid-7x7-walls",
        title: "7x7 grid with walls",
        tags: &["grid", "large", "walls"],
        rows: WALLED_7X7,
        start: Some((0, 0)),
        goal: (6, 6),
        max_steps: 48,
    },
    GridSpec {
        id: "grid-3x3-seeded",
        title: "3x3 grid with a seeded start",
        tags: &["grid", "small", "seeded"],
        rows: &["...", "...", "..."],
        start: None,
        goal: (2, 2),
        max_steps: 12,
    },
];

pub fn spec(task_id: &str) -> Option<&'static GridSpec> {
    TASKS.iter().find(|s| s.id == task_id)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Board {
    pub width: usize,
    pub height: usize,
    pub walls: BTreeSet<Pos>,
}

impl Board {
    pub fn from_rows(rows: &[&str]) -> Self {
        let walls = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.bytes().enumerate().filter(|(_, b)| *b == b'#').map(move |(c, _)| (r, c)))
            .collect();
        Self { width: rows[0].len(), height: rows.len(), walls }
    }

    /// Reads the board back out of an observation.
    pub fn from_obs(obs: &Value) -> Option<Self> {
        let walls = obs["walls"].as_array()?.iter().map(pos_of).collect::<Option<_>>()?;
        Some(Self {
            width: obs["width"].as_u64()? as usize,
            height: obs["height"].as_u64()? as usize,
            walls,
        })
    }

    pub fn step(&self, from: Pos, dir: Direction) -> Option<Pos> {
        let (dr, dc) = dir.delta();
        let r = from.0.checked_add_signed(dr)?;
        let c = from.1.checked_add_signed(dc)?;
        (r < self.height && c < self.width && !self.walls.contains(&(r, c))).then_some((r, c))
    }

    /// BFS distance from `to` to every reachable cell.
    pub fn distances_to(&self, to: Pos) -> BTreeMap<Pos, u32> {
        let mut dist = BTreeMap::from([(to, 0)]);
        let mut queue = VecDeque::from([to]);
        while let Some(p) = queue.pop_front() {
            let d = dist[&p];
            for dir in Direction::ALL {
                if let Some(n) = self.step(p, dir) {
                    dist.entry(n).or_insert_with(|| {
                        queue.push_back(n);
                        d + 1
                    });
                }
            }
        }
        dist
    }

    pub fn shortest_path(&self, from: Pos, to: Pos) -> Option<u32> {
        self.distances_to(to).get(&from).copied()
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }
}

fn pos_of(v: &Value) -> Option<Pos> {
    Some((v.get(0)?.as_u64()? as usize, v.get(1)?.as_u64()? as usize))
}

fn pos_json(p: Pos) -> Value {
    json!([p.0, p.1])
}

/// Seeded start: first splitmix64 output modulo the cell count, row-major,
/// drawing again while it lands on the goal or a wall.
pub fn seeded_start(board: &Board, goal: Pos, seed: u64) -> Pos {
    let mut rng = SplitMix64::new(seed);
    loop {
        let i = rng.below(board.cells() as u64) as usize;
        let p = (i / board.width, i % board.width);
        if p != goal && !board.walls.contains(&p) {
            return p;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Flavor {
    Compliant,
    BrokenReset,
    BrokenIsolation,
    BrokenSchema,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridState {
    pub agent: Pos,
    pub start: Pos,
    pub seed: Option<u64>,
    pub message: String,
}

pub struct TreasureGrid {
    flavor: Flavor,
    /// Per-task state shared by every session; only used by the
    /// broken-isolation fixture.
    leaked: Mutex<BTreeMap<String, Arc<Mutex<GridState>>>>,
}

impl TreasureGrid {
    pub fn new() -> Self {
        Self::flavored(Flavor::Compliant)
    }

    pub(crate) fn flavored(flavor: Flavor) -> Self {
        Self { flavor, leaked: Mutex::default() }
    }
}

impl Default for TreasureGrid {
    fn default() -> Self {
        Self::new()
    }
}

fn entropy() -> u64 {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(0);
    nanos ^ COUNTER.fetch_add(1, Ordering::Relaxed).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl BenchmarkImpl for TreasureGrid {
    fn meta(&self) -> BenchmarkMeta {
        let (name, description) = match self.flavor {
            Flavor::Compliant => ("treasure-grid", "Navigate a grid to the treasure using move and look."),
            Flavor::BrokenReset => ("broken-reset", "Treasure grid whose seeded reset ignores the seed."),
            Flavor::BrokenIsolation => ("broken-isolation", "Treasure grid whose sessions share one state."),
            Flavor::BrokenSchema => ("broken-schema", "Treasure grid that hides the move tool from tools/list."),
        };
        BenchmarkMeta {
            name: name.into(),
            version: "0.1.0".into(),
            description: description.into(),
            resource_requirements: ResourceConfig::local_process(1.0, 1.0),
        }
    }

    fn task_descriptors(&self) -> Vec<TaskDescriptor> {
        TASKS
            .iter()
            .map(|s| TaskDescriptor {
                task_id: s.id.into(),
                title: s.title.into(),
                tags: s.tags.iter().map(|t| t.to_string()).collect(),
                stochastic: s.start.is_none(),
                max_steps: s.max_steps,
            })
            .collect()
    }

    fn toolsets(&self) -> Vec<String> {
        vec!["standard".into(), "compact".into()]
    }

    fn make_task(&self, spawn: &TaskSpawn, ctx: &RuntimeContext) -> Result<Box<dyn TaskImpl>, String> {
        let spec = spec(&spawn.task_id).ok_or_else(|| format!("no grid task `{}`", spawn.task_id))?;
        let mut task = GridTask {
            spec,
            board: Board::from_rows(spec.rows),
            flavor: self.flavor,
            compact: ctx.tool_config.toolset == "compact",
            state: Arc::new(Mutex::new(GridState {
                agent: (0, 0),
                start: (0, 0),
                seed: None,
                message: String::new(),
            })),
        };
        if self.flavor == Flavor::BrokenIsolation {
            let mut leaked = self.leaked.lock().unwrap();
            task.state = leaked.entry(spec.id.to_owned()).or_insert_with(|| task.state.clone()).clone();
        }
        task.reset(spawn.seed);
        Ok(Box::new(task))
    }

    fn debug_task_configs(&self) -> Vec<DebugTaskConfig> {
        vec![
            DebugTaskConfig::new("grid-3x3", None, 12),
            DebugTaskConfig::new("grid-3x3-seeded", Some(7), 12),
            DebugTaskConfig::new("grid-5x5", None, 24),
            DebugTaskConfig::new("grid-7x7-walls", None, 48),
        ]
    }

    fn make_debug_agent(&self, task_id: &str) -> Option<Box<dyn Agent>> {
        spec(task_id).map(|_| Box::new(GridAgent) as Box<dyn Agent>)
    }
}

pub struct GridTask {
    spec: &'static GridSpec,
    board: Board,
    flavor: Flavor,
    compact: bool,
    state: Arc<Mutex<GridState>>,
}

impl GridTask {
    fn state(&self) -> std::sync::MutexGuard<'_, GridState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn render(&self, legend: bool) -> String {
        let agent = self.state().agent;
        let mut out = String::new();
        for r in 0..self.board.height {
            for c in 0..self.board.width {
                out.push(match (r, c) {
                    p if p == agent => 'A',
                    p if p == self.spec.goal => 'T',
                    p if self.board.walls.contains(&p) => '#',
                    _ => '.',
                });
            }
            out.push('\n');
        }
        if legend {
            out.push_str("A agent, T treasure, # wall, . floor\n");
        }
        out
    }

    fn move_tool() -> Tool {
        Tool::new(
            "move",
            "Move one cell in a compass direction. Walls and edges block movement.",
            InputSchema::new().required(
                "direction",
                PropertySchema::string()
                    .describe("Direction to move")
                    .one_of(Direction::ALL.map(|d| d.as_str())),
            ),
        )
    }

    fn look_tool(&self) -> Tool {
        if self.compact {
            return Tool::new("look", "Render the grid as text.", InputSchema::new());
        }
        Tool::new(
            "look",
            "Render the grid as text, optionally followed by a legend.",
            InputSchema::new().optional("legend", PropertySchema::boolean().describe("Append the symbol legend")),
        )
    }
}

impl TaskImpl for GridTask {
    fn description(&self) -> String {
        format!(
            "Find the treasure on a {}x{} grid. Use move to walk one cell at a time and look to see the grid. \
             The episode ends when you stand on the treasure or after {} steps.",
            self.board.height, self.board.width, self.spec.max_steps
        )
    }

    fn tools(&self) -> Vec<Tool> {
        match self.flavor {
            Flavor::BrokenSchema => vec![self.look_tool()],
            _ => vec![Self::move_tool(), self.look_tool()],
        }
    }

    fn accepted_tools(&self) -> Vec<Tool> {
        vec![Self::move_tool(), self.look_tool()]
    }

    fn reset(&mut self, seed: Option<u64>) {
        let (start, seed) = match self.spec.start {
            Some(p) => (p, None),
            None => {
                let seed = match self.flavor {
                    Flavor::BrokenReset => entropy(),
                    _ => seed.unwrap_or_default(),
                };
                (seeded_start(&self.board, self.spec.goal, seed), Some(seed))
            }
        };
        *self.state() = GridState { agent: start, start, seed, message: "Find the treasure.".into() };
    }

    fn call_tool(&mut self, action: &ActionRequest) -> ToolCallResult {
        match action.name.as_str() {
            "move" => {
                let Some(dir) = action.args.get("direction").and_then(Value::as_str).and_then(Direction::parse) else {
                    return ToolCallResult::error("direction must be north, south, east or west");
                };
                let goal = self.spec.goal;
                let mut state = self.state();
                match self.board.step(state.agent, dir) {
                    Some(next) => {
                        state.agent = next;
                        state.message = if next == goal {
                            format!("Moved {}. You found the treasure!", dir.as_str())
                        } else {
                            format!("Moved {}.", dir.as_str())
                        };
                        ToolCallResult::text(state.message.clone())
                    }
                    None => {
                        state.message = format!("Cannot move {}: blocked by a wall.", dir.as_str());
                        ToolCallResult::error(state.message.clone())
                    }
                }
            }
            "look" => {
                let legend = !self.compact && action.args.get("legend").and_then(Value::as_bool).unwrap_or(true);
                ToolCallResult::text(self.render(legend))
            }
            other => ToolCallResult::error(format!("unknown tool `{other}`")),
        }
    }

    fn observation(&self) -> Value {
        let state = self.state();
        json!({
            "agent": pos_json(state.agent),
            "goal": pos_json(self.spec.goal),
            "height": self.board.height,
            "width": self.board.width,
            "walls": self.board.walls.iter().map(|p| pos_json(*p)).collect::<Vec<_>>(),
            "message": state.message,
        })
    }

    fn evaluate(&self) -> Evaluation {
        let state = self.state();
        let found = state.agent == self.spec.goal;
        let mut info = Map::new();
        if let Some(seed) = state.seed {
            info.insert("seed".into(), json!(seed));
        }
        Evaluation { reward: if found { 1.0 } else { 0.0 }, terminated: found, info }
    }

    fn privileged_info(&self) -> String {
        let start = self.state().start;
        let (gr, gc) = self.spec.goal;
        let path = self.board.shortest_path(start, self.spec.goal).unwrap_or(u32::MAX);
        format!("Treasure at ({gr},{gc}). Shortest path from start ({},{}) is {path} steps.", start.0, start.1)
    }
}

/// Walks the shortest path, preferring east, south, west, north on ties.
#[derive(Debug, Default, Clone, Copy)]
pub struct GridAgent;

impl Agent for GridAgent {
    fn act(&mut self, obs: &Value, _tools: &[Tool], _last: Option<&StepResult>) -> Decision {
        let (Some(board), Some(agent), Some(goal)) = (Board::from_obs(obs), pos_of(&obs["agent"]), pos_of(&obs["goal"]))
        else {
            return Decision::Stop;
        };
        if agent == goal {
            return Decision::Stop;
        }
        let dist = board.distances_to(goal);
        let Some(&here) = dist.get(&agent) else { return Decision::Stop };
        Direction::ALL
            .into_iter()
            .find(|d| board.step(agent, *d).and_then(|n| dist.get(&n)).is_some_and(|&d| d + 1 == here))
            .map(|d| Decision::Act(ActionRequest::new("move", json!({ "direction": d.as_str() }))))
            .unwrap_or(Decision::Stop)
    }
}
