//! Game engine, synthetic agents and behavioral analytics for the farm
//! biosecurity serious game.
//!
//! The crate is `no_std` (with `alloc`) so the engine and the numerical
//! pipeline can be embedded anywhere; file formats, the session service and
//! the command line live in the `farmgame` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod agents;
pub mod clustering;
pub mod embedding;
pub mod game;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod stats;

pub use agents::{AgentArchetype, Archetype, LatencyModel};
pub use game::{
    Action, BiosecurityLevel, Factor, GameConfig, Level, Messaging, RoundRecord, RoundState,
    Session, SessionLog, Treatment,
};
