use std::sync::Mutex;

/// Ports handed to a benchmark for task endpoints, tried in list order.
#[derive(Debug)]
pub(crate) struct PortPool {
    slots: Mutex<Vec<(u16, bool)>>,
}

impl PortPool {
    pub fn new(ports: impl IntoIterator<Item = u16>) -> Self {
        Self { slots: Mutex::new(ports.into_iter().map(|p| (p, false)).collect()) }
    }

    /// Tries free ports in order until `bind` succeeds; the winning port is
    /// marked in use. Ports that fail to bind stay free for later attempts.
    pub fn acquire<T, E>(&self, mut bind: impl FnMut(u16) -> Result<T, E>) -> Option<(u16, T)> {
        let mut slots = self.slots.lock().unwrap();
        for (port, used) in slots.iter_mut() {
            if *used {
                continue;
            }
            if let Ok(bound) = bind(*port) {
                *used = true;
                return Some((*port, bound));
            }
        }
        None
    }

    pub fn release(&self, port: u16) {
        let mut slots = self.slots.lock().unwrap();
        if let Some(slot) = slots.iter_mut().find(|(p, _)| *p == port) {
            slot.1 = false;
        }
    }
}
