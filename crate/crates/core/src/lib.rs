//! Smart parking lot: slot sensors and an entry barrier managed by a
//! per-lot controller, a binary link to a central hub, and the hub itself
//! with its event log, HTTP API and live feed.
//!
//! Module map:
//!
//! - [`lot`]: shared domain types (slots, snapshots, configuration).
//! - [`controller`]: debounce, barrier state machine, LCD, telemetry policy.
//! - [`wire`]: the frame codec.
//! - [`hub`]: ingestion, event log, replay, HTTP and TCP front ends.
//! - [`sim`]: seeded traffic and sensor simulation.
//! - [`report`]: statistics from a log.

pub mod controller;
pub mod hub;
pub mod lot;
pub mod report;
pub mod sim;
pub mod wire;
