use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, GameConfig};
use super::types::{Action, BiosecurityLevel, Treatment};
use super::view::{player_view, PlayerView};
use super::world::{generate_world, RoundState, StepError, Timing, TurnOutcome};
use super::{ROUNDS, SIM_DOLLARS_PER_USD};
use crate::rng::{derive_seed, rng_for, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnAction {
    pub turn: u8,
    pub action: Action,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_elapsed_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u8,
    pub treatment: Treatment,
    pub actions: Vec<TurnAction>,
    pub final_level: BiosecurityLevel,
    /// Turns played before the round ended, 1..=6.
    pub tau: u8,
    pub infected: bool,
    pub round_score: i64,
}

impl RoundRecord {
    /// Time spent on the round: the sum of its turn latencies.
    pub fn latency_ms(&self) -> f64 {
        self.actions.iter().map(|a| a.latency_ms).sum()
    }

    pub fn invest_count(&self) -> usize {
        self.actions.iter().filter(|a| a.action == Action::Invest).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerKind {
    Human,
    Agent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub seed: u64,
    pub player_kind: PlayerKind,
    pub started_at_ms: u64,
    pub treatment_order: Vec<u8>,
    pub rounds: Vec<RoundRecord>,
    pub session_profit: i64,
    pub payout_usd: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("session has {0} completed rounds, 32 required")]
    Incomplete(usize),
    #[error("session is already complete")]
    Finished,
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("inconsistent session log: {0}")]
    Inconsistent(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SessionTotals {
    pub session_profit: i64,
    pub payout_usd: f64,
}

/// Random presentation order of the 32 treatments.
pub fn treatment_schedule(seed: u64) -> Vec<u8> {
    let mut order: Vec<u8> = (0..Treatment::COUNT as u8).collect();
    order.shuffle(&mut rng_for(seed, Stream::Schedule, 0));
    order
}

/// World seed of round `round_index` (1-based) in a session.
pub fn round_seed(session_seed: u64, round_index: u8) -> u64 {
    derive_seed(session_seed, Stream::RoundWorld, round_index as u64)
}

pub fn finalize_session(rounds: &[RoundRecord]) -> Result<SessionTotals, SessionError> {
    if rounds.len() < ROUNDS {
        return Err(SessionError::Incomplete(rounds.len()));
    }
    let session_profit: i64 = rounds.iter().map(|r| r.round_score).sum();
    Ok(SessionTotals {
        session_profit,
        payout_usd: session_profit as f64 / SIM_DOLLARS_PER_USD,
    })
}

impl SessionLog {
    /// Check the structural invariants of a complete log.
    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: &str| Err(SessionError::Inconsistent(m.into()));
        let mut sorted = self.treatment_order.clone();
        sorted.sort_unstable();
        if sorted != (0..ROUNDS as u8).collect::<Vec<_>>() {
            return bad("treatment order is not a permutation of 0..32");
        }
        let totals = finalize_session(&self.rounds)?;
        if self.rounds.len() != ROUNDS {
            return bad("more than 32 rounds");
        }
        for (i, r) in self.rounds.iter().enumerate() {
            if r.round_index as usize != i + 1 {
                return bad("rounds out of order");
            }
            if r.treatment.index() != self.treatment_order[i] {
                return bad("round treatment differs from schedule");
            }
            if !(1..=6).contains(&r.tau) || (!r.infected && r.tau != 6) {
                return bad("round duration out of range");
            }
            if r.invest_count() != r.final_level.beta() as usize {
                return bad("invest count differs from final level");
            }
        }
        if totals.session_profit != self.session_profit {
            return bad("session profit differs from the sum of round scores");
        }
        Ok(())
    }

    pub fn infection_count(&self) -> usize {
        self.rounds.iter().filter(|r| r.infected).count()
    }
}

/// Progress report from [`Session::submit`].
#[derive(Clone, Debug, PartialEq)]
pub struct SessionStep {
    pub outcome: TurnOutcome,
    pub finished_round: Option<RoundRecord>,
    pub session_complete: bool,
}

/// A 32-round session: schedule, the round in play and finished rounds.
#[derive(Clone, Debug)]
pub struct Session {
    seed: u64,
    config: GameConfig,
    order: Vec<u8>,
    completed: Vec<RoundRecord>,
    current: RoundState,
}

impl Session {
    pub fn new(seed: u64, config: GameConfig) -> Result<Self, SessionError> {
        let order = treatment_schedule(seed);
        let current = Self::start_round(seed, &order, 1, &config)?;
        Ok(Session {
            seed,
            config,
            order,
            completed: Vec::new(),
            current,
        })
    }

    fn start_round(seed: u64, order: &[u8], round: u8, config: &GameConfig) -> Result<RoundState, ConfigError> {
        let treatment = Treatment::from_index(order[round as usize - 1]).expect("schedule holds valid indices");
        generate_world(round_seed(seed, round), round, treatment, config)
    }

    /// Rebuild a session by replaying recorded moves.
    pub fn replay(
        seed: u64,
        config: GameConfig,
        moves: impl IntoIterator<Item = (Action, Timing)>,
    ) -> Result<Self, SessionError> {
        let mut session = Session::new(seed, config)?;
        for (action, timing) in moves {
            session.submit(action, timing)?;
        }
        Ok(session)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn treatment_order(&self) -> &[u8] {
        &self.order
    }

    pub fn is_complete(&self) -> bool {
        self.completed.len() == ROUNDS
    }

    /// The round being played; after completion, the final round.
    pub fn current(&self) -> &RoundState {
        &self.current
    }

    pub fn view(&self) -> PlayerView {
        player_view(&self.current)
    }

    pub fn completed_rounds(&self) -> &[RoundRecord] {
        &self.completed
    }

    /// Sum of the scores of finished rounds.
    pub fn cumulative_score(&self) -> i64 {
        self.completed.iter().map(|r| r.round_score).sum()
    }

    pub fn submit(&mut self, action: Action, timing: Timing) -> Result<SessionStep, SessionError> {
        if self.is_complete() {
            return Err(SessionError::Finished);
        }
        let outcome = self.current.step_turn(action, timing)?;
        let mut finished_round = None;
        if outcome.terminated {
            let record = self.current.to_record()?;
            self.completed.push(record.clone());
            finished_round = Some(record);
            if !self.is_complete() {
                let next = self.completed.len() as u8 + 1;
                self.current = Self::start_round(self.seed, &self.order, next, &self.config)?;
            }
        }
        Ok(SessionStep {
            outcome,
            finished_round,
            session_complete: self.is_complete(),
        })
    }

    pub fn to_log(
        &self,
        session_id: impl Into<String>,
        player_kind: PlayerKind,
        started_at_ms: u64,
    ) -> Result<SessionLog, SessionError> {
        let totals = finalize_session(&self.completed)?;
        Ok(SessionLog {
            session_id: session_id.into(),
            seed: self.seed,
            player_kind,
            started_at_ms,
            treatment_order: self.order.clone(),
            rounds: self.completed.clone(),
            session_profit: totals.session_profit,
            payout_usd: totals.payout_usd,
        })
    }
}
