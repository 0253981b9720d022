//! The 50-farm biosecurity game: treatments, world generation, infection
//! spread, player actions, information masking and scoring.

mod config;
mod infection;
mod session;
mod types;
mod view;
mod world;

pub use config::{Accounting, Arena, ConfigError, GameConfig, InfectionModelParams};
pub use infection::{infection_probability, transmission_kernel};
pub use session::{
    finalize_session, round_seed, treatment_schedule, PlayerKind, RoundRecord, Session,
    SessionError, SessionStep, SessionLog, SessionTotals, TurnAction,
};
pub use types::{Action, BiosecurityLevel, Factor, Level, Messaging, Treatment, TreatmentError};
pub use view::{player_view, FarmView, MessagePayload, Observed, PlayerView};
pub use world::{generate_world, Farm, Point, RoundState, StepError, Timing, TurnEvent, TurnOutcome};

/// Farms on the map, including the player's.
pub const FARMS: usize = 50;
/// Computer-controlled farms.
pub const NPC_FARMS: usize = FARMS - 1;
/// Maximum turns (decision points) per round.
pub const TURNS_PER_ROUND: u8 = 6;
/// Rounds per session, one per treatment.
pub const ROUNDS: usize = 32;
/// Increments needed to go from `None` to `High`.
pub const LEVEL_STEPS: u8 = 3;
/// Simulation dollars granted at the start of every round.
pub const ROUND_ENDOWMENT: i64 = 25_000;
/// Cost of one biosecurity increment.
pub const INVEST_COST: i64 = 1_000;
/// Deduction applied when the player's farm becomes infected.
pub const INFECTION_PENALTY: i64 = 25_000;
/// Payout conversion rate.
pub const SIM_DOLLARS_PER_USD: f64 = 50_000.0;
