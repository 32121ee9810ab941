use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::RegistryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Runtime {
    Docker,
    Apptainer,
    Vm,
    DockerRoot,
    DockerInDocker,
    Live,
}

impl Runtime {
    pub const ALL: [Runtime; 6] =
        [Runtime::Docker, Runtime::Apptainer, Runtime::Vm, Runtime::DockerRoot, Runtime::DockerInDocker, Runtime::Live];

    pub fn as_str(self) -> &'static str {
        match self {
            Runtime::Docker => "docker",
            Runtime::Apptainer => "apptainer",
            Runtime::Vm => "vm",
            Runtime::DockerRoot => "docker-root",
            Runtime::DockerInDocker => "docker-in-docker",
            Runtime::Live => "live",
        }
    }
}

impl std::str::FromStr for Runtime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Runtime::ALL.into_iter().find(|r| r.as_str() == s).ok_or_else(|| format!("unknown runtime `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hardware {
    #[serde(serialize_with = "cube_core::canonical::finite")]
    pub ram_gb: f64,
    pub gpu: bool,
    #[serde(serialize_with = "cube_core::canonical::finite")]
    pub disk_gb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerificationState {
    Pending,
    Verified,
    Failed,
}

/// What a registrant submits. Compliance and verification state are not
/// part of it; only the verification hook sets those.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registration {
    pub id: String,
    pub name: String,
    pub version: String,
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper: Option<String>,
    pub package: String,
    pub benchmark_license: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub package_license: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_notice: Option<String>,
    pub runtime: Runtime,
    pub hardware: Hardware,
    pub task_count: u64,
}

/// Field order used both for serialization checks and for "first
/// offending field" reporting.
const FIELDS: [&str; 12] = [
    "id",
    "name",
    "version",
    "authors",
    "paper",
    "package",
    "benchmark_license",
    "package_license",
    "content_notice",
    "runtime",
    "hardware",
    "task_count",
];
const HOOK_ONLY: [&str; 3] = ["compliance", "verification_state", "verification_detail"];

fn invalid(field: &str, reason: impl Into<String>) -> RegistryError {
    RegistryError::ValidationFailed { field: field.to_owned(), reason: reason.into() }
}

fn is_slug(s: &str) -> bool {
    !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'-' | b'_' | b'.'))
        && s.bytes().next().is_some_and(|b| b.is_ascii_alphanumeric())
}

fn is_url(s: &str) -> bool {
    let rest = s.strip_prefix("https://").or_else(|| s.strip_prefix("http://"));
    rest.is_some_and(|r| r.split('/').next().is_some_and(|host| !host.is_empty() && !host.contains(' ')))
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl Registration {
    /// Parses a JSON document, naming the first field that is missing,
    /// mistyped, unknown or reserved for the verification hook.
    pub fn from_value(value: Value) -> Result<Self, RegistryError> {
        let Value::Object(obj) = value else {
            return Err(invalid("entry", "expected a JSON object"));
        };
        if let Some(key) = obj.keys().find(|k| HOOK_ONLY.contains(&k.as_str())) {
            return Err(invalid(key, "set by verification only"));
        }
        if let Some(key) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(invalid(key, "unknown field"));
        }
        for field in FIELDS {
            let present = obj.get(field).filter(|v| !v.is_null());
            let optional = matches!(field, "paper" | "package_license" | "content_notice");
            match present {
                None if optional => {}
                None => return Err(invalid(field, "missing")),
                Some(v) => {
                    check_type(field, v)?;
                    check_value(field, v)?;
                }
            }
        }
        serde_json::from_value(Value::Object(obj)).map_err(|e| invalid("entry", e.to_string()))
    }

    /// Same rules as [`Registration::from_value`], for values built in code.
    pub fn validate(&self) -> Result<(), RegistryError> {
        for (field, x) in [("hardware.ram_gb", self.hardware.ram_gb), ("hardware.disk_gb", self.hardware.disk_gb)] {
            if !x.is_finite() {
                return Err(invalid(field, "must be a positive number"));
            }
        }
        let value = serde_json::to_value(self).map_err(|e| invalid("entry", e.to_string()))?;
        Self::from_value(value).map(drop)
    }

    pub fn semver(&self) -> semver::Version {
        semver::Version::parse(&self.version).expect("validated")
    }
}

fn check_type(field: &str, v: &Value) -> Result<(), RegistryError> {
    let ok = match field {
        "authors" => v.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
        "runtime" => v.as_str().is_some_and(|s| s.parse::<Runtime>().is_ok()),
        "task_count" => v.as_u64().is_some(),
        "hardware" => return check_hardware(v),
        _ => v.is_string(),
    };
    if ok {
        Ok(())
    } else {
        let reason = match field {
            "runtime" => format!("expected one of {}", Runtime::ALL.map(Runtime::as_str).join(", ")),
            "task_count" => "expected a non-negative integer".into(),
            "authors" => "expected a list of strings".into(),
            _ => "expected a string".into(),
        };
        Err(invalid(field, reason))
    }
}

/// Rules beyond the JSON type; `v` has already passed [`check_type`].
fn check_value(field: &str, v: &Value) -> Result<(), RegistryError> {
    let text = v.as_str().unwrap_or_default();
    match field {
        "id" if !is_slug(text) => Err(invalid(field, "lowercase letters, digits, '-', '_' or '.'")),
        "version" => semver::Version::parse(text)
            .map(drop)
            .map_err(|e| invalid(field, format!("`{text}` is not a semantic version: {e}"))),
        "authors" if v.as_array().is_some_and(|a| a.iter().any(|s| s.as_str().is_some_and(|s| s.trim().is_empty()))) => {
            Err(invalid(field, "empty author name"))
        }
        "paper" if !is_url(text) => Err(invalid(field, "not an http(s) URL")),
        "name" | "package" | "benchmark_license" | "package_license" if text.trim().is_empty() => {
            Err(invalid(field, "empty"))
        }
        "hardware" => {
            for key in ["ram_gb", "disk_gb"] {
                if !v[key].as_f64().is_some_and(positive) {
                    return Err(invalid(&format!("hardware.{key}"), "must be a positive number"));
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn check_hardware(v: &Value) -> Result<(), RegistryError> {
    let obj: &Map<String, Value> = v.as_object().ok_or_else(|| invalid("hardware", "expected an object"))?;
    if let Some(key) = obj.keys().find(|k| !["ram_gb", "gpu", "disk_gb"].contains(&k.as_str())) {
        return Err(invalid(&format!("hardware.{key}"), "unknown field"));
    }
    for (key, ok) in [
        ("ram_gb", obj.get("ram_gb").is_some_and(Value::is_number)),
        ("gpu", obj.get("gpu").is_some_and(Value::is_boolean)),
        ("disk_gb", obj.get("disk_gb").is_some_and(Value::is_number)),
    ] {
        if !ok {
            return Err(invalid(&format!("hardware.{key}"), "missing or mistyped"));
        }
    }
    Ok(())
}

/// One catalog record: the registration plus what verification decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryEntry {
    pub id: String,
    pub name: String,
    pub version: String,
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper: Option<String>,
    pub package: String,
    pub benchmark_license: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub package_license: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_notice: Option<String>,
    pub compliance: Vec<String>,
    pub runtime: Runtime,
    pub hardware: Hardware,
    pub task_count: u64,
    pub verification_state: VerificationState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification_detail: Option<String>,
}

impl RegistryEntry {
    pub fn pending(reg: Registration) -> Self {
        let Registration {
            id,
            name,
            version,
            authors,
            paper,
            package,
            benchmark_license,
            package_license,
            content_notice,
            runtime,
            hardware,
            task_count,
        } = reg;
        Self {
            id,
            name,
            version,
            authors,
            paper,
            package,
            benchmark_license,
            package_license,
            content_notice,
            compliance: Vec::new(),
            runtime,
            hardware,
            task_count,
            verification_state: VerificationState::Pending,
            verification_detail: None,
        }
    }

    pub fn is_verified(&self) -> bool {
        self.verification_state == VerificationState::Verified
    }

    /// Versions always parse: entries are only built from validated
    /// registrations.
    pub fn semver(&self) -> semver::Version {
        semver::Version::parse(&self.version).unwrap_or_else(|_| semver::Version::new(0, 0, 0))
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        cube_core::canonical::to_vec(self).expect("entries hold finite values only")
    }
}
