//! The running benchmark: sessions, lifecycle and per-instance serialization.

use std::collections::BTreeMap;
use std::net::IpAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock, Weak};

use chrono::{DateTime, Utc};
use cube_core::{
    validate_action, ActionRequest, BenchmarkInfo, ContentBlock, CubeError, ResetResult, ResourceContents,
    ResourceDescriptor, ResourceUsage, SpawnTicket, StepResult, TaskDescriptor, TaskFilter, TaskList,
    TaskState, TaskStatus, Tool, ToolCallResult, ToolConfig, DEFAULT_PAGE_SIZE, DESCRIPTION_URI,
    OBSERVATION_URI,
};
use serde_json::Value;

use crate::author::{BenchmarkImpl, RuntimeContext, SharedResources, TaskImpl, TaskSpawn};
use crate::ports::PortPool;
use crate::router;
use crate::server::{handle_rpc, RpcServer};

type Result<T> = std::result::Result<T, CubeError>;

pub const DEFAULT_MAX_SESSIONS: usize = 64;
const TASK_SERVER_WORKERS: usize = 4;

/// Where spawned task endpoints are served, in RPC mode.
pub(crate) struct TaskEndpoints {
    pub ip: IpAddr,
    pub ports: PortPool,
}

pub struct BenchmarkHost {
    benchmark: Arc<dyn BenchmarkImpl>,
    info: BenchmarkInfo,
    descriptors: Vec<TaskDescriptor>,
    tool_config: ToolConfig,
    session_cap: usize,
    task_ram_mb: f64,
    context: Mutex<Option<Arc<RuntimeContext>>>,
    sessions: RwLock<BTreeMap<String, Arc<Session>>>,
    reserved: AtomicUsize,
    counter: AtomicU64,
    endpoints: Option<TaskEndpoints>,
    this: Weak<BenchmarkHost>,
}

impl BenchmarkHost {
    /// Builds the host and runs the benchmark's setup hook.
    pub(crate) fn new(
        benchmark: Arc<dyn BenchmarkImpl>,
        tool_config: ToolConfig,
        max_sessions: usize,
        endpoints: Option<TaskEndpoints>,
    ) -> Result<Arc<Self>> {
        let meta = benchmark.meta();
        let mut descriptors = benchmark.task_descriptors();
        descriptors.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        let task_ram_mb = benchmark.task_ram_mb();
        let ram_cap = (meta.resource_requirements.ram_mb() / task_ram_mb).floor();
        let session_cap = if ram_cap.is_finite() && ram_cap >= 0.0 {
            max_sessions.min(ram_cap as usize)
        } else {
            max_sessions
        };
        let info = BenchmarkInfo {
            name: meta.name,
            version: meta.version,
            description: meta.description,
            resource_requirements: meta.resource_requirements,
            task_count: descriptors.len() as u64,
        };
        let host = Arc::new_cyclic(|this| Self {
            benchmark,
            info,
            descriptors,
            tool_config,
            session_cap,
            task_ram_mb,
            context: Mutex::new(None),
            sessions: RwLock::new(BTreeMap::new()),
            reserved: AtomicUsize::new(0),
            counter: AtomicU64::new(0),
            endpoints,
            this: this.clone(),
        });
        host.ensure_setup()?;
        Ok(host)
    }

    pub fn benchmark(&self) -> &Arc<dyn BenchmarkImpl> {
        &self.benchmark
    }

    pub fn tool_config(&self) -> &ToolConfig {
        &self.tool_config
    }

    /// Effective concurrent-session limit.
    pub fn session_cap(&self) -> usize {
        self.session_cap
    }

    fn ensure_setup(&self) -> Result<Arc<RuntimeContext>> {
        let mut slot = self.context.lock().unwrap();
        if let Some(ctx) = slot.as_ref() {
            return Ok(ctx.clone());
        }
        let mut shared = SharedResources::default();
        let outcome = catch_unwind(AssertUnwindSafe(|| self.benchmark.setup(&mut shared, &self.tool_config)));
        match outcome {
            Ok(Ok(())) => {}
            Ok(Err(msg)) => {
                shared.teardown_all();
                return Err(CubeError::SetupFailed(msg));
            }
            Err(_) => return Err(CubeError::SetupFailed("setup hook panicked".into())),
        }
        let ctx = Arc::new(RuntimeContext { shared, base_seed: None, tool_config: self.tool_config.clone() });
        *slot = Some(ctx.clone());
        Ok(ctx)
    }

    pub fn info(&self) -> BenchmarkInfo {
        self.info.clone()
    }

    pub fn tasks(&self, filter: Option<&TaskFilter>) -> Result<TaskList> {
        let filter = filter.cloned().unwrap_or_default();
        let page_size = filter.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
        if page_size == 0 {
            return Err(CubeError::InvalidParams("page_size must be positive".into()));
        }
        let matching: Vec<_> = self.descriptors.iter().filter(|t| filter.matches(t)).collect();
        let offset = match &filter.page_token {
            None => 0,
            Some(token) => token
                .parse::<usize>()
                .ok()
                .filter(|&o| o > 0 && o < matching.len())
                .ok_or_else(|| CubeError::InvalidPageToken(token.clone()))?,
        };
        let end = (offset + page_size as usize).min(matching.len());
        Ok(TaskList {
            items: matching[offset..end].iter().map(|t| (*t).clone()).collect(),
            next_page_token: (end < matching.len()).then(|| end.to_string()),
        })
    }

    fn descriptor(&self, task_id: &str) -> Option<&TaskDescriptor> {
        self.descriptors.iter().find(|t| t.task_id == task_id)
    }

    pub(crate) fn spawn(&self, task_id: &str, seed: Option<u64>) -> Result<Arc<Session>> {
        let descriptor = self
            .descriptor(task_id)
            .ok_or_else(|| CubeError::TaskNotFound(task_id.to_owned()))?
            .clone();
        if descriptor.stochastic && seed.is_none() {
            return Err(CubeError::SeedRequired(task_id.to_owned()));
        }
        let ctx = self.ensure_setup()?;

        if self.reserved.fetch_add(1, Ordering::SeqCst) >= self.session_cap {
            self.reserved.fetch_sub(1, Ordering::SeqCst);
            return Err(CubeError::ResourceExhausted(format!(
                "{} concurrent sessions already open",
                self.session_cap
            )));
        }
        let release = |e: CubeError| {
            self.reserved.fetch_sub(1, Ordering::SeqCst);
            e
        };

        let n = self.counter.fetch_add(1, Ordering::SeqCst) + 1;
        let session_id = format!("{}-{n:06}", self.info.name);
        let spawn = TaskSpawn { task_id: task_id.to_owned(), session_id: session_id.clone(), seed };
        let task = match catch_unwind(AssertUnwindSafe(|| self.benchmark.make_task(&spawn, &ctx))) {
            Ok(Ok(task)) => task,
            Ok(Err(msg)) => return Err(release(CubeError::TaskFailed(msg))),
            Err(_) => return Err(release(CubeError::TaskFailed("make_task panicked".into()))),
        };
        let session = Arc::new(Session::new(spawn, descriptor, task));

        let endpoint = match &self.endpoints {
            None => format!("local://{}/{}", self.info.name, session_id),
            Some(endpoints) => match self.serve_session(endpoints, &session) {
                Some(url) => url,
                None => {
                    session.close_task();
                    return Err(release(CubeError::ResourceExhausted("no free port for task endpoint".into())));
                }
            },
        };
        session.endpoint.set(endpoint).expect("endpoint set once");
        session.advance(TaskState::Ready);
        self.sessions.write().unwrap().insert(session_id, session.clone());
        Ok(session)
    }

    fn serve_session(&self, endpoints: &TaskEndpoints, session: &Arc<Session>) -> Option<String> {
        let host = self.this.clone();
        let target = Arc::downgrade(session);
        let handler: crate::server::Handler = Arc::new(move |body: &[u8]| {
            handle_rpc(body, |method, params| {
                let (Some(host), Some(session)) = (host.upgrade(), target.upgrade()) else {
                    return Err(CubeError::TaskNotFound("session closed".into()));
                };
                router::dispatch_task(&host, &session, method, params)
            })
        });
        let (port, server) = endpoints
            .ports
            .acquire(|port| RpcServer::bind(endpoints.ip, port, TASK_SERVER_WORKERS, handler.clone()))?;
        let url = server.url();
        *session.server.lock().unwrap() = Some((port, server));
        Some(url)
    }

    pub fn status(&self) -> Vec<TaskStatus> {
        let sessions = self.sessions.read().unwrap();
        let open = sessions.len() as u64;
        let usage = ResourceUsage { ram_mb_estimate: open as f64 * self.task_ram_mb, open_sessions: open };
        sessions
            .values()
            .map(|s| {
                let life = s.lifecycle.lock().unwrap();
                TaskStatus {
                    session_id: s.spawn.session_id.clone(),
                    task_id: s.spawn.task_id.clone(),
                    state: life.state,
                    steps_taken: life.steps_taken,
                    resource_usage: usage.clone(),
                    last_activity: life.last_activity,
                }
            })
            .collect()
    }

    /// Closes one session; its status entry is gone once this returns.
    pub(crate) fn close_session(&self, session_id: &str) -> Result<()> {
        let session = self
            .sessions
            .write()
            .unwrap()
            .remove(session_id)
            .ok_or_else(|| CubeError::TaskNotFound(session_id.to_owned()))?;
        self.finish_close(&session);
        Ok(())
    }

    fn finish_close(&self, session: &Session) {
        session.close_task();
        if let Some((port, server)) = session.server.lock().unwrap().take() {
            server.stop();
            if let Some(endpoints) = &self.endpoints {
                endpoints.ports.release(port);
            }
        }
        self.reserved.fetch_sub(1, Ordering::SeqCst);
    }

    /// Closes one session, or every session followed by shared resources.
    pub fn shutdown(&self, session_id: Option<&str>) -> Result<()> {
        if let Some(id) = session_id {
            return self.close_session(id);
        }
        let drained = std::mem::take(&mut *self.sessions.write().unwrap());
        for session in drained.values() {
            self.finish_close(session);
        }
        if let Some(ctx) = self.context.lock().unwrap().take() {
            self.benchmark.teardown(&ctx.shared);
            ctx.shared.teardown_all();
        }
        Ok(())
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.read().unwrap().len()
    }
}

impl Drop for BenchmarkHost {
    fn drop(&mut self) {
        let _ = self.shutdown(None);
    }
}

struct Lifecycle {
    state: TaskState,
    steps_taken: u64,
    last_activity: DateTime<Utc>,
}

struct TaskCell {
    task: Box<dyn TaskImpl>,
    steps_taken: u64,
    reset_done: bool,
}

/// One spawned task instance.
pub(crate) struct Session {
    pub spawn: TaskSpawn,
    descriptor: TaskDescriptor,
    pub endpoint: std::sync::OnceLock<String>,
    cell: RwLock<TaskCell>,
    lifecycle: Mutex<Lifecycle>,
    closed: AtomicBool,
    failed: AtomicBool,
    server: Mutex<Option<(u16, RpcServer)>>,
}

impl Session {
    fn new(spawn: TaskSpawn, descriptor: TaskDescriptor, task: Box<dyn TaskImpl>) -> Self {
        Self {
            spawn,
            descriptor,
            endpoint: std::sync::OnceLock::new(),
            cell: RwLock::new(TaskCell { task, steps_taken: 0, reset_done: false }),
            lifecycle: Mutex::new(Lifecycle {
                state: TaskState::Initializing,
                steps_taken: 0,
                last_activity: Utc::now(),
            }),
            closed: AtomicBool::new(false),
            failed: AtomicBool::new(false),
            server: Mutex::new(None),
        }
    }

    pub fn ticket(&self) -> SpawnTicket {
        SpawnTicket {
            session_id: self.spawn.session_id.clone(),
            endpoint: self.endpoint.get().cloned().unwrap_or_default(),
            task_id: self.spawn.task_id.clone(),
            seed: self.spawn.seed,
        }
    }

    fn advance(&self, next: TaskState) {
        let mut life = self.lifecycle.lock().unwrap();
        if life.state.can_advance_to(next) {
            life.state = next;
        }
        life.last_activity = Utc::now();
    }

    fn touch(&self, steps_taken: u64) {
        let mut life = self.lifecycle.lock().unwrap();
        life.steps_taken = steps_taken;
        life.last_activity = Utc::now();
    }

    fn check_open(&self) -> Result<()> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(CubeError::TaskNotFound(self.spawn.session_id.clone()));
        }
        if self.failed.load(Ordering::SeqCst) {
            return Err(CubeError::TaskFailed(format!("session {} failed", self.spawn.session_id)));
        }
        Ok(())
    }

    /// Runs author code, turning a panic into a failed session.
    fn guarded<T>(&self, f: impl FnOnce() -> T) -> Result<T> {
        catch_unwind(AssertUnwindSafe(f)).map_err(|_| {
            self.failed.store(true, Ordering::SeqCst);
            self.advance(TaskState::Failed);
            CubeError::TaskFailed(format!("task code panicked in session {}", self.spawn.session_id))
        })
    }

    fn close_task(&self) {
        if self.closed.swap(true, Ordering::SeqCst) {
            return;
        }
        self.advance(TaskState::Terminated);
        let mut cell = self.cell.write().unwrap_or_else(|e| e.into_inner());
        let _ = catch_unwind(AssertUnwindSafe(|| cell.task.close()));
    }

    pub fn tools_list(&self) -> Result<Vec<Tool>> {
        self.check_open()?;
        let cell = self.cell.read().unwrap();
        self.guarded(|| cell.task.tools())
    }

    pub fn tools_call(&self, action: &ActionRequest) -> Result<ToolCallResult> {
        self.check_open()?;
        let mut cell = self.cell.write().unwrap();
        let result = self.apply(&mut cell, action)?;
        self.touch(cell.steps_taken);
        Ok(result)
    }

    pub fn step(&self, action: &ActionRequest) -> Result<StepResult> {
        self.check_open()?;
        let mut cell = self.cell.write().unwrap();
        self.apply(&mut cell, action)?;
        let result = self.compose(&cell);
        self.touch(cell.steps_taken);
        result
    }

    pub fn evaluate(&self) -> Result<StepResult> {
        self.check_open()?;
        let cell = self.cell.read().unwrap();
        if !cell.reset_done {
            return Err(CubeError::NotResetYet);
        }
        self.compose(&cell)
    }

    pub fn reset(&self, seed: Option<u64>) -> Result<ResetResult> {
        self.check_open()?;
        let seed = seed.or(self.spawn.seed);
        if self.descriptor.stochastic && seed.is_none() {
            return Err(CubeError::SeedRequired(self.spawn.task_id.clone()));
        }
        let mut cell = self.cell.write().unwrap();
        self.guarded(|| cell.task.reset(seed))?;
        cell.steps_taken = 0;
        cell.reset_done = true;
        let step = self.compose(&cell)?;
        self.advance(TaskState::Running);
        self.touch(0);
        Ok(ResetResult { obs: step.obs, info: step.info })
    }

    pub fn resources_list(&self) -> Result<Vec<ResourceDescriptor>> {
        self.check_open()?;
        Ok(vec![
            ResourceDescriptor {
                uri: DESCRIPTION_URI.into(),
                name: "Task description".into(),
                mime_type: "text/plain".into(),
            },
            ResourceDescriptor {
                uri: OBSERVATION_URI.into(),
                name: "Current observation".into(),
                mime_type: "application/json".into(),
            },
        ])
    }

    pub fn resources_read(&self, uri: &str) -> Result<Vec<ResourceContents>> {
        self.check_open()?;
        let cell = self.cell.read().unwrap();
        let (mime_type, block) = match uri {
            DESCRIPTION_URI => ("text/plain", ContentBlock::Text(self.guarded(|| cell.task.description())?)),
            OBSERVATION_URI => {
                if !cell.reset_done {
                    return Err(CubeError::NotResetYet);
                }
                ("application/json", ContentBlock::Json(self.guarded(|| cell.task.observation())?))
            }
            other => return Err(CubeError::UnknownResource(other.to_owned())),
        };
        Ok(vec![ResourceContents { uri: uri.to_owned(), mime_type: mime_type.into(), block }])
    }

    pub fn privileged_info(&self) -> Result<String> {
        self.check_open()?;
        let cell = self.cell.read().unwrap();
        self.guarded(|| cell.task.privileged_info())
    }

    fn apply(&self, cell: &mut TaskCell, action: &ActionRequest) -> Result<ToolCallResult> {
        if !cell.reset_done {
            return Err(CubeError::NotResetYet);
        }
        let terminated = self.guarded(|| cell.task.evaluate().terminated)?;
        if terminated || cell.steps_taken >= u64::from(self.descriptor.max_steps) {
            return Err(CubeError::TaskTerminated);
        }
        let accepted = self.guarded(|| cell.task.accepted_tools())?;
        let result = match validate_action(action, &accepted) {
            Ok(()) => self.guarded(|| cell.task.call_tool(action))?,
            Err(fault) => ToolCallResult::error(fault.to_string()),
        };
        cell.steps_taken += 1;
        Ok(result)
    }

    fn compose(&self, cell: &TaskCell) -> Result<StepResult> {
        let (obs, eval) = self.guarded(|| (cell.task.observation(), cell.task.evaluate()))?;
        let mut info = eval.info;
        info.insert("steps_taken".into(), Value::from(cell.steps_taken));
        Ok(StepResult {
            obs,
            reward: eval.reward,
            terminated: eval.terminated,
            truncated: cell.steps_taken >= u64::from(self.descriptor.max_steps),
            info: Value::Object(info),
        })
    }
}
