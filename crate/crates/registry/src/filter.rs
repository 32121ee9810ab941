use serde::{Deserialize, Serialize};

use crate::{RegistryEntry, RegistryError, Runtime};

/// Every present clause must match. The default filter matches all
/// verified entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistryFilter {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_any: Option<Vec<Runtime>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ram_gb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requires_gpu: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub badge_all: Option<Vec<String>>,
    /// Case-insensitive substring of id or name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Also return pending and failed entries.
    pub include_pending: bool,
}

impl RegistryFilter {
    pub fn matches(&self, e: &RegistryEntry) -> bool {
        (self.include_pending || e.is_verified())
            && self.runtime_any.as_ref().is_none_or(|rs| rs.contains(&e.runtime))
            && self.max_ram_gb.is_none_or(|max| e.hardware.ram_gb <= max)
            && self.requires_gpu.is_none_or(|gpu| e.hardware.gpu == gpu)
            && self.badge_all.as_ref().is_none_or(|bs| bs.iter().all(|b| e.compliance.contains(b)))
            && self.text.as_ref().is_none_or(|t| {
                let t = t.to_lowercase();
                e.id.to_lowercase().contains(&t) || e.name.to_lowercase().contains(&t)
            })
    }

    /// URL query string; lists are comma-separated.
    pub fn to_query(&self) -> String {
        let mut q = form_urlencoded::Serializer::new(String::new());
        if let Some(rs) = &self.runtime_any {
            q.append_pair("runtime_any", &rs.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(","));
        }
        if let Some(max) = self.max_ram_gb {
            q.append_pair("max_ram_gb", &cube_core::canonical::format_f64(max));
        }
        if let Some(gpu) = self.requires_gpu {
            q.append_pair("requires_gpu", if gpu { "true" } else { "false" });
        }
        if let Some(bs) = &self.badge_all {
            q.append_pair("badge_all", &bs.join(","));
        }
        if let Some(t) = &self.text {
            q.append_pair("text", t);
        }
        if self.include_pending {
            q.append_pair("include_pending", "true");
        }
        q.finish()
    }

    pub fn from_query(query: &str) -> Result<Self, RegistryError> {
        let bad = |field: &str, reason: String| RegistryError::ValidationFailed { field: field.to_owned(), reason };
        let list = |v: &str| v.split(',').filter(|s| !s.is_empty()).map(str::to_owned).collect::<Vec<_>>();
        let flag = |field: &str, v: &str| match v {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            _ => Err(bad(field, format!("expected true or false, got `{v}`"))),
        };
        let mut f = RegistryFilter::default();
        for (k, v) in form_urlencoded::parse(query.as_bytes()) {
            match &*k {
                "runtime_any" => {
                    let rs = list(&v).iter().map(|r| r.parse::<Runtime>()).collect::<Result<Vec<_>, _>>();
                    f.runtime_any = Some(rs.map_err(|e| bad("runtime_any", e))?);
                }
                "max_ram_gb" => {
                    let max = v.parse::<f64>().ok().filter(|x| x.is_finite());
                    f.max_ram_gb = Some(max.ok_or_else(|| bad("max_ram_gb", format!("`{v}` is not a number")))?);
                }
                "requires_gpu" => f.requires_gpu = Some(flag("requires_gpu", &v)?),
                "badge_all" => f.badge_all = Some(list(&v)),
                "text" => f.text = Some(v.into_owned()),
                "include_pending" => f.include_pending = flag("include_pending", &v)?,
                other => return Err(bad(other, "unknown filter parameter".into())),
            }
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_string_round_trip() {
        let f = RegistryFilter {
            runtime_any: Some(vec![Runtime::Docker, Runtime::DockerInDocker]),
            max_ram_gb: Some(7.5),
            requires_gpu: Some(false),
            badge_all: Some(vec!["task-isolated".into(), "debug-solvable".into()]),
            text: Some("web arena&co".into()),
            include_pending: true,
        };
        assert_eq!(RegistryFilter::from_query(&f.to_query()).unwrap(), f);
        assert_eq!(RegistryFilter::from_query("").unwrap(), RegistryFilter::default());
        assert_eq!(RegistryFilter::default().to_query(), "");
    }

    #[test]
    fn bad_parameters_name_the_field() {
        for (q, field) in [("max_ram_gb=lots", "max_ram_gb"), ("runtime_any=k8s", "runtime_any"), ("sort=id", "sort")] {
            match RegistryFilter::from_query(q) {
                Err(RegistryError::ValidationFailed { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{q}: {other:?}"),
            }
        }
    }
}
