use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::{PortAddress, PortError, PortName};

/// Environment variable selecting the base TCP port for static allocation.
pub const PORT_BASE_ENV: &str = "NARRAVINE_PORT_BASE";

/// In-process name service. Live registrations shadow the static table,
/// which is consulted only for names nobody has registered.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    inner: Arc<RwLock<State>>,
}

#[derive(Debug, Default)]
struct State {
    live: BTreeMap<PortName, PortAddress>,
    fallback: BTreeMap<PortName, PortAddress>,
    port_base: Option<u16>,
    next_offset: u16,
}

#[derive(Serialize, Deserialize)]
struct Dump {
    live: Vec<PortAddress>,
    #[serde(default, rename = "static")]
    fallback: Vec<PortAddress>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ports requested as `0` are handed out sequentially from `base`.
    pub fn with_port_base(base: u16) -> Self {
        let registry = Self::new();
        registry.write().port_base = Some(base);
        registry
    }

    /// Reads [`PORT_BASE_ENV`]; an unset or unparsable value means ephemeral
    /// ports.
    pub fn from_env() -> Self {
        match std::env::var(PORT_BASE_ENV).ok().and_then(|v| v.trim().parse().ok()) {
            Some(base) => Self::with_port_base(base),
            None => Self::new(),
        }
    }

    pub fn port_base(&self) -> Option<u16> {
        self.read().port_base
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Loads a static address table (the `static` list of a registry dump).
    pub fn load_static(&self, path: &Path) -> Result<usize, PortError> {
        let text = std::fs::read_to_string(path)?;
        let dump: Dump =
            serde_json::from_str(&text).map_err(|e| PortError::RegistryFile(e.to_string()))?;
        let mut state = self.write();
        let mut count = 0;
        for addr in dump.fallback.into_iter().chain(dump.live) {
            state.fallback.insert(addr.name.clone(), addr);
            count += 1;
        }
        Ok(count)
    }

    pub(crate) fn allocate(&self, requested: u16) -> u16 {
        if requested != 0 {
            return requested;
        }
        let mut state = self.write();
        match state.port_base {
            Some(base) => {
                let port = base.saturating_add(state.next_offset);
                state.next_offset += 1;
                port
            }
            None => 0,
        }
    }

    pub(crate) fn insert(&self, addr: PortAddress) -> Result<(), PortError> {
        let mut state = self.write();
        if state.live.contains_key(&addr.name) {
            return Err(PortError::DuplicateName(addr.name.to_string()));
        }
        if let Some(owner) = state
            .live
            .values()
            .find(|a| a.host == addr.host && a.tcp_port == addr.tcp_port)
        {
            return Err(PortError::AddressInUse(addr.socket_addr(), owner.name.to_string()));
        }
        state.live.insert(addr.name.clone(), addr);
        Ok(())
    }

    pub(crate) fn contains(&self, name: &PortName) -> bool {
        self.read().live.contains_key(name)
    }

    pub fn remove(&self, name: &PortName) -> Option<PortAddress> {
        self.write().live.remove(name)
    }

    pub fn lookup(&self, name: &str) -> Option<PortAddress> {
        let name = PortName::new(name).ok()?;
        let state = self.read();
        state
            .live
            .get(&name)
            .or_else(|| state.fallback.get(&name))
            .cloned()
    }

    pub fn live(&self) -> Vec<PortAddress> {
        self.read().live.values().cloned().collect()
    }

    pub fn to_json(&self) -> String {
        let state = self.read();
        let dump = Dump {
            live: state.live.values().cloned().collect(),
            fallback: state.fallback.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&dump).expect("registry dump serializes")
    }

    /// Writes the registry as a JSON document for debugging.
    pub fn dump(&self, path: &Path) -> Result<(), PortError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
