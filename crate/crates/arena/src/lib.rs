//! Host, configuration, run logs, aggregation and the mock provider for the
//! economics arena.

pub mod aggregate;
pub mod config;
pub mod host;
pub mod log;
pub mod mock;
pub mod provider;
pub mod report;
pub mod roster;
pub mod sampling;
