//! Simulator and protocol library for distributed queuing in networks whose
//! edges are rewired every round by an adversary.
//!
//! The crate is split into the dynamic-graph model ([`dyngraph`]), the
//! per-node state machines ([`protocol`]), the synchronous round executor
//! ([`engine`]), request arrival patterns ([`workload`]), trace checkers
//! ([`verify`]) and the command-line front end ([`cli`]).

pub mod cli;
pub mod dyngraph;
pub mod engine;
pub mod protocol;
pub mod verify;
pub mod workload;
