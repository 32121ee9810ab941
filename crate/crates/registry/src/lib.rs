//! Metadata catalog for CUBE benchmarks.
//!
//! Entries point at packages; nothing is hosted. A registration is stored
//! as pending, handed to the verification hook, and only becomes visible to
//! [`Registry::query`] once the hook returns a fully passing
//! [`ComplianceReport`], whose badges become the entry's `compliance`.

mod client;
mod entry;
mod filter;
mod http;
mod store;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use cube_conformance::ComplianceReport;
use semver::Version;
use serde_json::{json, Value};

pub use client::RegistryClient;
pub use entry::{Hardware, Registration, RegistryEntry, Runtime, VerificationState};
pub use filter::RegistryFilter;
pub use http::RegistryServer;
pub use store::{Record, Store};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("{id} {version} is already registered")]
    DuplicateVersion { id: String, version: String },
    #[error("invalid `{field}`: {reason}")]
    ValidationFailed { field: String, reason: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("store: {0}")]
    Store(String),
    #[error("registry unreachable: {0}")]
    Transport(String),
}

impl RegistryError {
    pub fn kind(&self) -> &'static str {
        match self {
            RegistryError::DuplicateVersion { .. } => "DuplicateVersion",
            RegistryError::ValidationFailed { .. } => "ValidationFailed",
            RegistryError::NotFound(_) => "NotFound",
            RegistryError::Store(_) => "Store",
            RegistryError::Transport(_) => "Transport",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            RegistryError::DuplicateVersion { .. } => 409,
            RegistryError::ValidationFailed { .. } => 422,
            RegistryError::NotFound(_) => 404,
            RegistryError::Store(_) | RegistryError::Transport(_) => 500,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            RegistryError::DuplicateVersion { id, version } => {
                body["id"] = json!(id);
                body["version"] = json!(version);
            }
            RegistryError::ValidationFailed { field, reason } => {
                body["field"] = json!(field);
                body["reason"] = json!(reason);
            }
            RegistryError::NotFound(what) => body["what"] = json!(what),
            RegistryError::Store(_) | RegistryError::Transport(_) => {}
        }
        body
    }

    pub fn from_json(body: &Value) -> Self {
        let text = |key: &str| body.get(key).and_then(Value::as_str).unwrap_or_default().to_owned();
        match body.get("error").and_then(Value::as_str) {
            Some("DuplicateVersion") => RegistryError::DuplicateVersion { id: text("id"), version: text("version") },
            Some("ValidationFailed") => RegistryError::ValidationFailed { field: text("field"), reason: text("reason") },
            Some("NotFound") => RegistryError::NotFound(text("what")),
            Some("Store") => RegistryError::Store(text("message")),
            _ => RegistryError::Transport(format!("unexpected error body {body}")),
        }
    }
}

/// Runs conformance for a pending entry. `Err` and panics both mark the
/// entry failed with the message as detail.
pub type VerificationHook = Arc<dyn Fn(&RegistryEntry) -> Result<ComplianceReport, String> + Send + Sync>;

pub const NO_VERIFIER: &str = "no verifier configured";
pub const INTERRUPTED: &str = "verification interrupted";

pub fn default_hook() -> VerificationHook {
    Arc::new(|_| Err(NO_VERIFIER.to_owned()))
}

type Key = (String, Version);

fn key_of(entry: &RegistryEntry) -> Key {
    (entry.id.clone(), entry.semver())
}

pub struct Registry {
    records: Mutex<BTreeMap<Key, Record>>,
    store: Option<Mutex<Store>>,
    hook: RwLock<VerificationHook>,
}

impl Registry {
    pub fn in_memory() -> Self {
        Self { records: Mutex::new(BTreeMap::new()), store: None, hook: RwLock::new(default_hook()) }
    }

    /// Loads and compacts the store at `path`, creating it if needed.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let (store, loaded) = Store::open(path.as_ref())?;
        let records = loaded.into_iter().map(|r| (key_of(&r.entry), r)).collect();
        Ok(Self { records: Mutex::new(records), store: Some(Mutex::new(store)), hook: RwLock::new(default_hook()) })
    }

    pub fn set_verification_hook(&self, hook: VerificationHook) {
        *self.hook.write().unwrap_or_else(|e| e.into_inner()) = hook;
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BTreeMap<Key, Record>> {
        self.records.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Records under the catalog lock so store order matches memory order.
    fn put(&self, records: &mut BTreeMap<Key, Record>, record: Record) -> Result<(), RegistryError> {
        if let Some(store) = &self.store {
            store.lock().unwrap_or_else(|e| e.into_inner()).append(&record)?;
        }
        records.insert(key_of(&record.entry), record);
        Ok(())
    }

    /// Validates, stores as pending, runs the hook and stores the outcome.
    /// Returns the entry in its final state.
    pub fn register(&self, registration: Registration) -> Result<RegistryEntry, RegistryError> {
        registration.validate()?;
        let pending = RegistryEntry::pending(registration);
        let key = key_of(&pending);
        {
            let mut records = self.lock();
            if records.contains_key(&key) {
                return Err(RegistryError::DuplicateVersion { id: pending.id, version: pending.version });
            }
            self.put(&mut records, Record { entry: pending.clone(), report: None })?;
        }
        log::info!("verifying {} {}", pending.id, pending.version);

        let hook = self.hook.read().unwrap_or_else(|e| e.into_inner()).clone();
        let outcome = catch_unwind(AssertUnwindSafe(|| hook(&pending)))
            .unwrap_or_else(|panic| Err(format!("verifier panicked: {}", panic_text(&panic))));
        let record = settle(pending, outcome);
        log::info!("{} {} is {:?}", record.entry.id, record.entry.version, record.entry.verification_state);

        let mut records = self.lock();
        self.put(&mut records, record.clone())?;
        Ok(record.entry)
    }

    /// Matching entries ordered by id, then version descending.
    pub fn query(&self, filter: &RegistryFilter) -> Vec<RegistryEntry> {
        let records = self.lock();
        let mut found: Vec<&RegistryEntry> =
            records.values().map(|r| &r.entry).filter(|e| filter.matches(e)).collect();
        found.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| b.semver().cmp(&a.semver())));
        found.into_iter().cloned().collect()
    }

    /// Without a version, the highest visible version of `id`.
    pub fn get(&self, id: &str, version: Option<&str>, include_pending: bool) -> Result<RegistryEntry, RegistryError> {
        let records = self.lock();
        let visible = |e: &&RegistryEntry| include_pending || e.is_verified();
        let found = match version {
            Some(v) => {
                let v = Version::parse(v).map_err(|_| RegistryError::NotFound(format!("{id} {v}")))?;
                records.get(&(id.to_owned(), v)).map(|r| &r.entry).filter(visible)
            }
            None => records
                .range((id.to_owned(), Version::new(0, 0, 0))..)
                .take_while(|((k, _), _)| k == id)
                .map(|(_, r)| &r.entry)
                .filter(visible)
                .max_by(|a, b| a.semver().cmp(&b.semver())),
        };
        found.cloned().ok_or_else(|| RegistryError::NotFound(format!("{id} {}", version.unwrap_or("(any)"))))
    }

    /// The report the hook returned for this version, if any.
    pub fn report(&self, id: &str, version: &str) -> Result<ComplianceReport, RegistryError> {
        let missing = || RegistryError::NotFound(format!("report for {id} {version}"));
        let v = Version::parse(version).map_err(|_| missing())?;
        self.lock().get(&(id.to_owned(), v)).and_then(|r| r.report.clone()).ok_or_else(missing)
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Verified only with a report in which every check passed.
fn settle(mut entry: RegistryEntry, outcome: Result<ComplianceReport, String>) -> Record {
    match outcome {
        Ok(report) if report.all_passed() && !report.checks.is_empty() => {
            entry.verification_state = VerificationState::Verified;
            entry.compliance = report.badges.clone();
            entry.verification_detail = None;
            Record { entry, report: Some(report) }
        }
        Ok(report) => {
            entry.verification_state = VerificationState::Failed;
            entry.verification_detail = Some(if report.checks.is_empty() {
                "report has no checks".to_owned()
            } else {
                format!("failed checks: {}", report.failed().join(", "))
            });
            Record { entry, report: Some(report) }
        }
        Err(detail) => {
            entry.verification_state = VerificationState::Failed;
            entry.verification_detail = Some(detail);
            Record { entry, report: None }
        }
    }
}

fn panic_text(panic: &Box<dyn std::any::Any + Send>) -> String {
    panic
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| panic.downcast_ref::<&str>().map(|s| (*s).to_owned()))
        .unwrap_or_else(|| "non-string panic".into())
}
