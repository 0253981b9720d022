//! File formats, analysis pipeline, session service and command line for the
//! farm biosecurity game. The engine and numerics live in `farmgame-core`.

pub mod battery;
pub mod cli;
pub mod events;
pub mod pipeline;
pub mod plot;
pub mod service;
pub mod settings;
