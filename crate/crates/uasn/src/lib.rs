//! Host-side companion of `uasn-core`: TOML configuration, binary checkpoints,
//! JSONL episode traces with an independent replay checker, thread-parallel
//! evaluation and the `train` / `evaluate` / `compare` / `replay` commands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod eval;
pub mod replay;
pub mod trace;

pub use config::{Config, Overrides};
