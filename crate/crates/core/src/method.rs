use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Namespace {
    Tools,
    Resources,
    Cube,
}

impl Namespace {
    pub const ALL: [Namespace; 3] = [Namespace::Tools, Namespace::Resources, Namespace::Cube];

    pub fn prefix(self) -> &'static str {
        match self {
            Namespace::Tools => "tools/",
            Namespace::Resources => "resources/",
            Namespace::Cube => "cube/",
        }
    }

    /// The namespace a method string belongs to, if any. A bare prefix with
    /// nothing after the slash belongs to none.
    pub fn of(method: &str) -> Option<Namespace> {
        Self::ALL.into_iter().find(|ns| {
            method
                .strip_prefix(ns.prefix())
                .is_some_and(|rest| !rest.is_empty())
        })
    }
}

/// Which endpoint serves a method: each spawned task or the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodLevel {
    Task,
    Benchmark,
}

/// The complete method set. Nothing else is served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ToolsList,
    ToolsCall,
    ResourcesList,
    ResourcesRead,
    Evaluate,
    Reset,
    Step,
    Close,
    PrivilegedInfo,
    Info,
    Tasks,
    Spawn,
    Status,
    Shutdown,
}

impl Method {
    pub const TASK_LEVEL: [Method; 9] = [
        Method::ToolsList,
        Method::ToolsCall,
        Method::ResourcesList,
        Method::ResourcesRead,
        Method::Evaluate,
        Method::Reset,
        Method::Step,
        Method::Close,
        Method::PrivilegedInfo,
    ];

    pub const BENCHMARK_LEVEL: [Method; 5] =
        [Method::Info, Method::Tasks, Method::Spawn, Method::Status, Method::Shutdown];

    pub fn all() -> impl Iterator<Item = Method> {
        Self::TASK_LEVEL.into_iter().chain(Self::BENCHMARK_LEVEL)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ToolsList => "tools/list",
            Method::ToolsCall => "tools/call",
            Method::ResourcesList => "resources/list",
            Method::ResourcesRead => "resources/read",
            Method::Evaluate => "cube/evaluate",
            Method::Reset => "cube/reset",
            Method::Step => "cube/step",
            Method::Close => "cube/close",
            Method::PrivilegedInfo => "cube/privileged_info",
            Method::Info => "cube/info",
            Method::Tasks => "cube/tasks",
            Method::Spawn => "cube/spawn",
            Method::Status => "cube/status",
            Method::Shutdown => "cube/shutdown",
        }
    }

    pub fn level(self) -> MethodLevel {
        if Self::BENCHMARK_LEVEL.contains(&self) {
            MethodLevel::Benchmark
        } else {
            MethodLevel::Task
        }
    }

    pub fn namespace(self) -> Namespace {
        Namespace::of(self.as_str()).expect("every method is namespaced")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::all()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn method_set_is_exactly_the_two_tables() {
        let names: BTreeSet<_> = Method::all().map(Method::as_str).collect();
        let expected: BTreeSet<_> = [
            "tools/list",
            "tools/call",
            "resources/list",
            "resources/read",
            "cube/evaluate",
            "cube/reset",
            "cube/step",
            "cube/close",
            "cube/privileged_info",
            "cube/info",
            "cube/tasks",
            "cube/spawn",
            "cube/status",
            "cube/shutdown",
        ]
        .into_iter()
        .collect();
        assert_eq!(names, expected);
    }

    #[test]
    fn namespaces_partition_methods() {
        for m in Method::all() {
            let hits = Namespace::ALL
                .iter()
                .filter(|ns| m.as_str().starts_with(ns.prefix()))
                .count();
            assert_eq!(hits, 1, "{m}");
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn namespace_detection() {
        assert_eq!(Namespace::of("tools/list"), Some(Namespace::Tools));
        assert_eq!(Namespace::of("cube/anything"), Some(Namespace::Cube));
        assert_eq!(Namespace::of("gym/step"), None);
        assert_eq!(Namespace::of("cube/"), None);
        assert_eq!(Namespace::of("Tools/list"), None);
    }
}
