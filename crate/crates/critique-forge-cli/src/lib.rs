//! Library side of the CLI: command implementations, importable by the
//! integration tests for building replay cassettes through the exact code
//! paths the binary runs.

pub mod commands;
