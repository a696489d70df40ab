use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::PortError;

/// Validated port name: non-empty, starts with `/`, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PortName(String);

impl PortName {
    pub fn new(name: impl Into<String>) -> Result<Self, PortError> {
        let name = name.into();
        if name.is_empty() {
            return Err(PortError::InvalidName(name, "empty"));
        }
        if !name.starts_with('/') {
            return Err(PortError::InvalidName(name, "must start with '/'"));
        }
        if name.chars().any(char::is_whitespace) {
            return Err(PortError::InvalidName(name, "contains whitespace"));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PortName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for PortName {
    type Err = PortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for PortName {
    type Error = PortError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<PortName> for String {
    fn from(value: PortName) -> Self {
        value.0
    }
}

/// Where a named port accepts connections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortAddress {
    pub name: PortName,
    pub host: String,
    pub tcp_port: u16,
}

impl PortAddress {
    pub fn socket_addr(&self) -> String {
        format!("{}:{}", self.host, self.tcp_port)
    }
}
