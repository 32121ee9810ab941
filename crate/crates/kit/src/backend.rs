//! Provisioning backends. Benchmarks declare what they need in a
//! [`ResourceConfig`]; a backend decides how to provide it.

use cube_core::{CubeError, ResourceConfig, ResourceKind};

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn provision(&self, requirements: &ResourceConfig) -> Result<(), CubeError>;
}

/// Runs benchmarks inside the current process. Only `local_process`
/// requirements can be satisfied.
#[derive(Debug, Default, Clone, Copy)]
pub struct LocalProcessBackend;

impl Backend for LocalProcessBackend {
    fn name(&self) -> &str {
        "local-process"
    }

    fn provision(&self, requirements: &ResourceConfig) -> Result<(), CubeError> {
        requirements.validate().map_err(CubeError::InvalidParams)?;
        match requirements.kind {
            ResourceKind::LocalProcess => Ok(()),
            kind => Err(CubeError::BackendUnsupported(format!(
                "{} backend cannot provision {kind:?}",
                self.name()
            ))),
        }
    }
}
