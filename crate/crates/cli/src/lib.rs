//! HTTP and WebSocket transport for planning sessions.

pub mod server;
