//! Canonical JSON Lines encoding of session logs. One event per line; every
//! line carries the schema version, the session id and a timestamp.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use farmgame_core::game::{
    finalize_session, Action, BiosecurityLevel, GameConfig, PlayerKind, RoundRecord, SessionLog, Treatment, TurnAction,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub schema_version: u32,
    pub session_id: String,
    pub ts_ms: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionStart {
        seed: u64,
        player_kind: PlayerKind,
        treatment_order: Vec<u8>,
        /// Present in service logs so sessions replay under their own rules.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<GameConfig>,
    },
    RoundStart {
        round_index: u8,
        treatment: Treatment,
    },
    TurnAction {
        round_index: u8,
        turn: u8,
        action: Action,
        latency_ms: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        server_elapsed_ms: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        idempotency_key: Option<String>,
    },
    Infection {
        round_index: u8,
        turn: u8,
    },
    RoundEnd {
        round_index: u8,
        final_level: BiosecurityLevel,
        tau: u8,
        infected: bool,
        round_score: i64,
    },
    SessionEnd {
        session_profit: i64,
        payout_usd: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: unsupported schema version {found}")]
    Schema { line: usize, found: u32 },
    #[error("line {line}: {event} for session {session_id} before its session_start")]
    Orphan { line: usize, session_id: String, event: &'static str },
    #[error("session {session_id}: {reason}")]
    Inconsistent { session_id: String, reason: String },
    #[error("session {session_id} is incomplete ({rounds} rounds)")]
    Incomplete { session_id: String, rounds: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn round_start_record(session_id: &str, ts_ms: u64, round: &RoundRecord) -> Record {
    Record {
        schema_version: SCHEMA_VERSION,
        session_id: session_id.into(),
        ts_ms,
        event: Event::RoundStart {
            round_index: round.round_index,
            treatment: round.treatment,
        },
    }
}

/// Events for one session. Timestamps run from `started_at_ms` by the
/// recorded latencies, so the encoding is a pure function of the log.
pub fn encode(log: &SessionLog) -> Vec<Record> {
    let id = log.session_id.as_str();
    let rec = |ts_ms: u64, event: Event| Record {
        schema_version: SCHEMA_VERSION,
        session_id: id.into(),
        ts_ms,
        event,
    };
    let mut clock = log.started_at_ms as f64;
    let ts = |clock: f64| clock.max(0.0).round() as u64;
    let mut out = vec![rec(
        ts(clock),
        Event::SessionStart {
            seed: log.seed,
            player_kind: log.player_kind,
            treatment_order: log.treatment_order.clone(),
            config: None,
        },
    )];
    for round in &log.rounds {
        out.push(round_start_record(id, ts(clock), round));
        for a in &round.actions {
            clock += a.latency_ms;
            out.push(rec(ts(clock), turn_event(round.round_index, a, None)));
        }
        if round.infected {
            out.push(rec(
                ts(clock),
                Event::Infection {
                    round_index: round.round_index,
                    turn: round.tau,
                },
            ));
        }
        out.push(rec(ts(clock), round_end_event(round)));
    }
    out.push(rec(
        ts(clock),
        Event::SessionEnd {
            session_profit: log.session_profit,
            payout_usd: log.payout_usd,
        },
    ));
    out
}

pub fn turn_event(round_index: u8, a: &TurnAction, idempotency_key: Option<String>) -> Event {
    Event::TurnAction {
        round_index,
        turn: a.turn,
        action: a.action,
        latency_ms: a.latency_ms,
        server_elapsed_ms: a.server_elapsed_ms,
        idempotency_key,
    }
}

pub fn round_end_event(round: &RoundRecord) -> Event {
    Event::RoundEnd {
        round_index: round.round_index,
        final_level: round.final_level,
        tau: round.tau,
        infected: round.infected,
        round_score: round.round_score,
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[Record]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Write sessions back to back in the canonical encoding.
pub fn write_sessions<W: Write>(mut w: W, logs: &[SessionLog]) -> std::io::Result<()> {
    for log in logs {
        write_records(&mut w, &encode(log))?;
    }
    w.flush()
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<Record>, DecodeError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|source| DecodeError::Json { line: i + 1, source })?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(DecodeError::Schema {
                line: i + 1,
                found: rec.schema_version,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// A session rebuilt from events, possibly still in progress.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialSession {
    pub session_id: String,
    pub seed: u64,
    pub player_kind: PlayerKind,
    pub started_at_ms: u64,
    pub treatment_order: Vec<u8>,
    pub config: Option<GameConfig>,
    pub rounds: Vec<RoundRecord>,
    /// Actions of the round not yet ended.
    pub pending: Vec<TurnAction>,
    pub idempotency_keys: Vec<(String, u8, u8)>,
    pub last_ts_ms: u64,
    /// Profit declared by `session_end`, once seen.
    pub declared_profit: Option<i64>,
}

impl PartialSession {
    pub fn into_log(self) -> Result<SessionLog, DecodeError> {
        let inconsistent = |reason: String| DecodeError::Inconsistent {
            session_id: self.session_id.clone(),
            reason,
        };
        if self.declared_profit.is_none() || self.rounds.len() != farmgame_core::game::ROUNDS {
            return Err(DecodeError::Incomplete {
                session_id: self.session_id.clone(),
                rounds: self.rounds.len(),
            });
        }
        let totals = finalize_session(&self.rounds).map_err(|e| inconsistent(e.to_string()))?;
        let log = SessionLog {
            session_id: self.session_id.clone(),
            seed: self.seed,
            player_kind: self.player_kind,
            started_at_ms: self.started_at_ms,
            treatment_order: self.treatment_order.clone(),
            rounds: self.rounds.clone(),
            session_profit: totals.session_profit,
            payout_usd: totals.payout_usd,
        };
        log.validate().map_err(|e| inconsistent(e.to_string()))?;
        if self.declared_profit != Some(log.session_profit) {
            return Err(inconsistent(format!(
                "session_end declares profit {:?}, rounds sum to {}",
                self.declared_profit, log.session_profit
            )));
        }
        Ok(log)
    }
}

/// Group events by session in order of first appearance.
pub fn assemble(records: Vec<Record>) -> Result<Vec<PartialSession>, DecodeError> {
    let mut order: Vec<PartialSession> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut current_treatment: HashMap<String, Treatment> = HashMap::new();
    for (line, rec) in records.into_iter().enumerate() {
        let line = line + 1;
        let sid = rec.session_id.clone();
        if let Event::SessionStart {
            seed,
            player_kind,
            treatment_order,
            config,
        } = &rec.event
        {
            index.insert(sid.clone(), order.len());
            order.push(PartialSession {
                session_id: sid,
                seed: *seed,
                player_kind: *player_kind,
                started_at_ms: rec.ts_ms,
                treatment_order: treatment_order.clone(),
                config: config.clone(),
                rounds: Vec::new(),
                pending: Vec::new(),
                idempotency_keys: Vec::new(),
                last_ts_ms: rec.ts_ms,
                declared_profit: None,
            });
            continue;
        }
        let name = match &rec.event {
            Event::SessionStart { .. } => unreachable!(),
            Event::RoundStart { .. } => "round_start",
            Event::TurnAction { .. } => "turn_action",
            Event::Infection { .. } => "infection",
            Event::RoundEnd { .. } => "round_end",
            Event::SessionEnd { .. } => "session_end",
        };
        let Some(&i) = index.get(&sid) else {
            return Err(DecodeError::Orphan {
                line,
                session_id: sid,
                event: name,
            });
        };
        let s = &mut order[i];
        s.last_ts_ms = s.last_ts_ms.max(rec.ts_ms);
        let bad = |reason: String| DecodeError::Inconsistent {
            session_id: sid.clone(),
            reason,
        };
        match rec.event {
            Event::SessionStart { .. } | Event::Infection { .. } => {}
            Event::RoundStart { round_index, treatment } => {
                if round_index as usize != s.rounds.len() + 1 {
                    return Err(bad(format!("line {line}: round {round_index} starts out of order")));
                }
                current_treatment.insert(sid.clone(), treatment);
            }
            Event::TurnAction {
                round_index,
                turn,
                action,
                latency_ms,
                server_elapsed_ms,
                idempotency_key,
            } => {
                if round_index as usize != s.rounds.len() + 1 || turn as usize != s.pending.len() + 1 {
                    return Err(bad(format!("line {line}: unexpected turn {turn} of round {round_index}")));
                }
                if let Some(k) = idempotency_key {
                    s.idempotency_keys.push((k, round_index, turn));
                }
                s.pending.push(TurnAction {
                    turn,
                    action,
                    latency_ms,
                    server_elapsed_ms,
                });
            }
            Event::RoundEnd {
                round_index,
                final_level,
                tau,
                infected,
                round_score,
            } => {
                let treatment = current_treatment
                    .get(&sid)
                    .copied()
                    .ok_or_else(|| bad(format!("line {line}: round_end without round_start")))?;
                if round_index as usize != s.rounds.len() + 1 {
                    return Err(bad(format!("line {line}: round {round_index} ends out of order")));
                }
                s.rounds.push(RoundRecord {
                    round_index,
                    treatment,
                    actions: std::mem::take(&mut s.pending),
                    final_level,
                    tau,
                    infected,
                    round_score,
                });
            }
            Event::SessionEnd { session_profit, .. } => s.declared_profit = Some(session_profit),
        }
    }
    Ok(order)
}

/// Decode complete sessions; any incomplete or inconsistent session is an error.
pub fn decode(records: Vec<Record>) -> Result<Vec<SessionLog>, DecodeError> {
    assemble(records)?.into_iter().map(PartialSession::into_log).collect()
}

pub fn read_sessions<R: BufRead>(r: R) -> Result<Vec<SessionLog>, DecodeError> {
    decode(read_records(r)?)
}

pub fn read_sessions_file(path: &std::path::Path) -> Result<Vec<SessionLog>, DecodeError> {
    let f = std::fs::File::open(path)?;
    read_sessions(std::io::BufReader::new(f))
}
