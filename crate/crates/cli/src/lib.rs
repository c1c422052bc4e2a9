//! Command-line front end: orchestration of corpus generation, surveys,
//! judging, analysis, simulation, and figure drawing over the core
//! library.
//!
//! Every subcommand reads one TOML [`config::RunConfig`] and is
//! deterministic given that config, its seeds, and the cache state.
//! Network traffic always flows through the core client's append-only
//! record log, so finished runs replay offline and interrupted ones
//! resume where they stopped; `analyze` never opens a connection at all.

pub mod analyze;
pub mod config;
pub mod error;
pub mod generate;
pub mod jsonl;
pub mod judge;
pub mod report;
pub mod simulate;
pub mod survey;
