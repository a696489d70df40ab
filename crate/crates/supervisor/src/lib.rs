//! The `narravine` supervisor: boots the modules, runs sessions, serves the
//! operator gateway and analyzes finished sessions.

pub mod analyze;
pub mod cli;
pub mod error;
pub mod gateway;
pub mod hub;
pub mod modules;

pub use error::SupervisorError;
