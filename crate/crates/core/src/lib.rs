//! Decentralized multi-agent forward-search planning with novelty-based
//! filtering of the state messages agents exchange.
//!
//! Each agent runs a best-first width search over its own actions. States
//! produced by public actions are broadcast to the other agents with private
//! facts replaced by opaque tokens; the [`filter`] module decides which of
//! those states are worth sending by their *outgoing novelty* and keeps the
//! rest in a withheld list released under a configurable policy.
//!
//! Module map:
//! - [`model`]: tasks, fact privacy, states, plan validation
//! - [`io`]: JSON task format, STRIPS-subset PDDL import, reports
//! - [`heuristics`]: goal counting, relaxed-plan fact counter, depth
//! - [`novelty`]: novelty tables for search and for outgoing filtering
//! - [`filter`]: send/withhold decisions and withheld-state release
//! - [`net`]: envelopes, private-part tokens, delays, framing, transports
//! - [`engine`]: per-agent search loop, termination, plan reconstruction
//! - [`harness`]: configuration, batch runs, scoring

pub mod engine;
pub mod filter;
pub mod harness;
pub mod heuristics;
pub mod io;
pub mod model;
pub mod net;
pub mod novelty;
