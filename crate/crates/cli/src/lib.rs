//! Command-line driver and HTTP service for pyrofront.

pub mod commands;
pub mod server;
