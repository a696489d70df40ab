use std::io;
use std::time::Duration;

use thiserror::Error;

use crate::frame::FrameError;

#[derive(Debug, Error)]
pub enum PortError {
    #[error("invalid port name {0:?}: {1}")]
    InvalidName(String, &'static str),
    #[error("port {0} is already registered")]
    DuplicateName(String),
    #[error("address {0} is already held by {1}")]
    AddressInUse(String, String),
    #[error("cannot bind {name} on {addr}: {source}")]
    BindFailure {
        name: String,
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error("unknown port {0}")]
    UnknownPort(String),
    #[error("connecting {src} -> {dst} timed out after {after:?}")]
    ConnectTimeout {
        src: String,
        dst: String,
        after: Duration,
    },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("registry file: {0}")]
    RegistryFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
