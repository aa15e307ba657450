//! Library surface of the `invopt` CLI: scenario loading, command drivers,
//! and the CSV/JSON writers. The binary in `main.rs` is a thin argument
//! parser over [`commands::run`].

pub mod commands;
pub mod output;
pub mod scenario;
