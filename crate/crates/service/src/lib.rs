//! Session service, event persistence, wire protocol and operator CLI.

pub mod cli;
pub mod protocol;
pub mod server;
pub mod store;
