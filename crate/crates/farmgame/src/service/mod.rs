//! Live game sessions behind an append-only event log.
//!
//! Each session owns `sessions/<id>.jsonl`; `index.jsonl` lists sessions in
//! creation order. On start-up every session is rebuilt by replaying its
//! recorded actions through the engine, so the log is the only state.

mod api;

pub use api::router;

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use farmgame_core::game::{
    Action, GameConfig, PlayerKind, PlayerView, RoundRecord, Session, SessionError, SessionLog, StepError, Timing,
    TurnAction, TurnEvent, TurnOutcome,
};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

use crate::events::{self, round_end_event, turn_event, Event, Record, SCHEMA_VERSION};

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Complete,
    Abandoned,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("illegal action: {0}")]
    Illegal(#[from] StepError),
    #[error("session {id} is {status:?}")]
    NotActive { id: String, status: Status },
    #[error("idempotency key must be 1 to 128 characters")]
    BadKey,
    #[error("client_elapsed_ms must be finite and non-negative")]
    BadLatency,
    #[error("storage failure: {0}")]
    Storage(#[from] io::Error),
    #[error("cannot recover session {id}: {reason}")]
    Recovery { id: String, reason: String },
    #[error(transparent)]
    Engine(SessionError),
}

impl From<SessionError> for ServiceError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Step(s) => ServiceError::Illegal(s),
            other => ServiceError::Engine(other),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct CreateRequest {
    pub seed: Option<u64>,
    pub player_kind: Option<PlayerKind>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ActionRequest {
    pub action: Action,
    pub client_elapsed_ms: f64,
    pub idempotency_key: String,
}

/// What the player may see about a round that just ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundEnd {
    pub round_index: u8,
    pub final_level: farmgame_core::game::BiosecurityLevel,
    pub tau: u8,
    pub infected: bool,
    pub round_score: i64,
}

impl From<&RoundRecord> for RoundEnd {
    fn from(r: &RoundRecord) -> Self {
        RoundEnd {
            round_index: r.round_index,
            final_level: r.final_level,
            tau: r.tau,
            infected: r.infected,
            round_score: r.round_score,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub schema_version: u32,
    pub session_id: String,
    pub status: Status,
    pub outcome: TurnOutcome,
    pub round_end: Option<RoundEnd>,
    pub cumulative_score: i64,
    pub payout_usd: Option<f64>,
    pub state: Option<PlayerView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateResponse {
    pub schema_version: u32,
    pub session_id: String,
    pub status: Status,
    pub created_at_ms: u64,
    pub completed_rounds: usize,
    pub cumulative_score: i64,
    /// Masked view of the round in play; absent once the session is over.
    pub view: Option<PlayerView>,
    /// Set when the session is complete: where the summary lives.
    pub summary: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryResponse {
    pub schema_version: u32,
    pub session_id: String,
    pub status: Status,
    pub rounds: Vec<RoundEnd>,
    pub session_profit: i64,
    pub payout_usd: f64,
    pub infections: usize,
}

#[derive(Serialize, Deserialize)]
struct IndexLine {
    schema_version: u32,
    session_id: String,
    created_at_ms: u64,
}

struct Entry {
    id: String,
    session: Session,
    player_kind: PlayerKind,
    created_at_ms: u64,
    last_activity_ms: u64,
    file: File,
    responses: HashMap<String, StepResponse>,
}

impl Entry {
    fn status(&self, now: u64, timeout_ms: u64) -> Status {
        if self.session.is_complete() {
            Status::Complete
        } else if now.saturating_sub(self.last_activity_ms) > timeout_ms {
            Status::Abandoned
        } else {
            Status::Active
        }
    }

    fn append(&mut self, ts_ms: u64, events: Vec<Event>) -> io::Result<()> {
        let records: Vec<Record> = events
            .into_iter()
            .map(|event| Record {
                schema_version: SCHEMA_VERSION,
                session_id: self.id.clone(),
                ts_ms,
                event,
            })
            .collect();
        let mut buf = Vec::new();
        events::write_records(&mut buf, &records)?;
        self.file.write_all(&buf)?;
        self.file.sync_data()
    }

    fn log(&self) -> Result<SessionLog, SessionError> {
        self.session.to_log(self.id.clone(), self.player_kind, self.created_at_ms)
    }
}

pub struct SessionService {
    dir: PathBuf,
    config: GameConfig,
    timeout_ms: u64,
    clock: Clock,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    order: Mutex<Vec<(u64, String)>>,
}

/// Infection events about farms whose infection state is hidden are dropped.
fn mask_outcome(mut outcome: TurnOutcome, visible: &[bool]) -> TurnOutcome {
    outcome.events.retain(|e| match e {
        TurnEvent::NpcInfected { farm } => visible.get(*farm).copied().unwrap_or(false),
        _ => true,
    });
    outcome
}

impl SessionService {
    /// Open (or create) a data directory and replay every stored session.
    pub fn open(dir: &Path, config: GameConfig, timeout_minutes: u64, clock: Clock) -> Result<Self, ServiceError> {
        fs::create_dir_all(dir.join("sessions"))?;
        let svc = SessionService {
            dir: dir.to_path_buf(),
            config,
            timeout_ms: timeout_minutes.saturating_mul(60_000),
            clock,
            sessions: RwLock::new(HashMap::new()),
            order: Mutex::new(Vec::new()),
        };
        svc.recover()?;
        Ok(svc)
    }

    fn index_path(&self) -> PathBuf {
        self.dir.join("index.jsonl")
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.dir.join("sessions").join(format!("{id}.jsonl"))
    }

    fn recover(&self) -> Result<(), ServiceError> {
        let index = self.index_path();
        if !index.exists() {
            return Ok(());
        }
        let text = fs::read_to_string(&index)?;
        let mut sessions = self.sessions.try_write().expect("not shared yet");
        let mut order = self.order.try_lock().expect("not shared yet");
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let Ok(entry) = serde_json::from_str::<IndexLine>(line) else {
                continue; // torn final line of an interrupted write
            };
            let id = entry.session_id;
            let rebuilt = self.replay_file(&id, entry.created_at_ms)?;
            order.push((entry.created_at_ms, id.clone()));
            sessions.insert(id, Arc::new(Mutex::new(rebuilt)));
        }
        Ok(())
    }

    fn replay_file(&self, id: &str, created_at_ms: u64) -> Result<Entry, ServiceError> {
        let fail = |reason: String| ServiceError::Recovery { id: id.into(), reason };
        let path = self.session_path(id);
        let records = events::read_records(BufReader::new(File::open(&path)?)).map_err(|e| fail(e.to_string()))?;
        let mut partial = events::assemble(records).map_err(|e| fail(e.to_string()))?;
        let p = partial.pop().ok_or_else(|| fail("empty log".into()))?;
        let config = p.config.clone().unwrap_or_else(|| self.config.clone());
        let mut session = Session::new(p.seed, config)?;
        let keys: HashMap<(u8, u8), String> = p.idempotency_keys.iter().map(|(k, r, t)| ((*r, *t), k.clone())).collect();
        let mut responses = HashMap::new();
        let moves = p
            .rounds
            .iter()
            .flat_map(|r| r.actions.iter().map(move |a| (r.round_index, a)))
            .chain(p.pending.iter().map(|a| (p.rounds.len() as u8 + 1, a)));
        for (round, a) in moves {
            let visible: Vec<bool> = session.current().farms().iter().map(|f| f.infection_visible).collect();
            let timing = Timing {
                latency_ms: a.latency_ms,
                server_elapsed_ms: a.server_elapsed_ms,
            };
            let step = session.submit(a.action, timing)?;
            if let Some(key) = keys.get(&(round, a.turn)) {
                let status = if step.session_complete { Status::Complete } else { Status::Active };
                responses.insert(key.clone(), self.step_response(id, &session, status, &step, &visible));
            }
        }
        if session.completed_rounds() != p.rounds.as_slice() {
            return Err(fail("recorded rounds differ from engine replay".into()));
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Entry {
            id: id.into(),
            session,
            player_kind: p.player_kind,
            created_at_ms,
            last_activity_ms: p.last_ts_ms.max(created_at_ms),
            file,
            responses,
        })
    }

    fn step_response(
        &self,
        id: &str,
        session: &Session,
        status: Status,
        step: &farmgame_core::game::SessionStep,
        visible: &[bool],
    ) -> StepResponse {
        let complete = step.session_complete;
        StepResponse {
            schema_version: SCHEMA_VERSION,
            session_id: id.into(),
            status,
            outcome: mask_outcome(step.outcome.clone(), visible),
            round_end: step.finished_round.as_ref().map(RoundEnd::from),
            cumulative_score: session.cumulative_score(),
            payout_usd: complete.then(|| session.cumulative_score() as f64 / farmgame_core::game::SIM_DOLLARS_PER_USD),
            state: (!complete).then(|| session.view()),
        }
    }

    pub async fn create(&self, req: CreateRequest) -> Result<StateResponse, ServiceError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let seed = req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
        let player_kind = req.player_kind.unwrap_or(PlayerKind::Human);
        let session = Session::new(seed, self.config.clone())?;
        let now = (self.clock)();
        let path = self.session_path(&id);
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        let mut entry = Entry {
            id: id.clone(),
            session,
            player_kind,
            created_at_ms: now,
            last_activity_ms: now,
            file,
            responses: HashMap::new(),
        };
        let first_round = entry.session.current().to_record_start();
        entry.append(
            now,
            vec![
                Event::SessionStart {
                    seed,
                    player_kind,
                    treatment_order: entry.session.treatment_order().to_vec(),
                    config: Some(self.config.clone()),
                },
                first_round,
            ],
        )?;
        {
            let mut order = self.order.lock().await;
            let mut f = OpenOptions::new().create(true).append(true).open(self.index_path())?;
            let line = serde_json::to_string(&IndexLine {
                schema_version: SCHEMA_VERSION,
                session_id: id.clone(),
                created_at_ms: now,
            })
            .map_err(io::Error::other)?;
            writeln!(f, "{line}")?;
            f.sync_data()?;
            order.push((now, id.clone()));
        }
        let state = self.state_of(&entry, now);
        self.sessions.write().await.insert(id, Arc::new(Mutex::new(entry)));
        Ok(state)
    }

    async fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ServiceError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.into()))
    }

    fn state_of(&self, e: &Entry, now: u64) -> StateResponse {
        let status = e.status(now, self.timeout_ms);
        StateResponse {
            schema_version: SCHEMA_VERSION,
            session_id: e.id.clone(),
            status,
            created_at_ms: e.created_at_ms,
            completed_rounds: e.session.completed_rounds().len(),
            cumulative_score: e.session.cumulative_score(),
            view: (status == Status::Active).then(|| e.session.view()),
            summary: (status == Status::Complete).then(|| format!("/sessions/{}/summary", e.id)),
        }
    }

    pub async fn state(&self, id: &str) -> Result<StateResponse, ServiceError> {
        let entry = self.entry(id).await?;
        let e = entry.lock().await;
        Ok(self.state_of(&e, (self.clock)()))
    }

    pub async fn submit(&self, id: &str, req: ActionRequest) -> Result<StepResponse, ServiceError> {
        if req.idempotency_key.is_empty() || req.idempotency_key.len() > 128 {
            return Err(ServiceError::BadKey);
        }
        if !(req.client_elapsed_ms.is_finite() && req.client_elapsed_ms >= 0.0) {
            return Err(ServiceError::BadLatency);
        }
        let entry = self.entry(id).await?;
        let mut e = entry.lock().await;
        if let Some(prev) = e.responses.get(&req.idempotency_key) {
            return Ok(prev.clone());
        }
        let now = (self.clock)();
        let status = e.status(now, self.timeout_ms);
        if status != Status::Active {
            return Err(ServiceError::NotActive { id: id.into(), status });
        }
        let server_elapsed = now.saturating_sub(e.last_activity_ms) as f64;
        let visible: Vec<bool> = e.session.current().farms().iter().map(|f| f.infection_visible).collect();
        let round = e.session.current().round_index();
        // Validate on a copy so a rejected action or a failed write leaves no trace.
        let mut next = e.session.clone();
        let step = next.submit(
            req.action,
            Timing {
                latency_ms: req.client_elapsed_ms,
                server_elapsed_ms: Some(server_elapsed),
            },
        )?;
        let played = TurnAction {
            turn: step.outcome.turn,
            action: req.action,
            latency_ms: req.client_elapsed_ms,
            server_elapsed_ms: Some(server_elapsed),
        };
        let mut new_events = vec![turn_event(round, &played, Some(req.idempotency_key.clone()))];
        if let Some(done) = &step.finished_round {
            if done.infected {
                new_events.push(Event::Infection {
                    round_index: done.round_index,
                    turn: done.tau,
                });
            }
            new_events.push(round_end_event(done));
            if step.session_complete {
                let log = next.to_log(id, e.player_kind, e.created_at_ms)?;
                new_events.push(Event::SessionEnd {
                    session_profit: log.session_profit,
                    payout_usd: log.payout_usd,
                });
            } else {
                new_events.push(next.current().to_record_start());
            }
        }
        e.append(now, new_events)?;
        e.session = next;
        e.last_activity_ms = now;
        let status = if step.session_complete { Status::Complete } else { Status::Active };
        let resp = self.step_response(id, &e.session, status, &step, &visible);
        e.responses.insert(req.idempotency_key, resp.clone());
        Ok(resp)
    }

    pub async fn summary(&self, id: &str) -> Result<SummaryResponse, ServiceError> {
        let entry = self.entry(id).await?;
        let e = entry.lock().await;
        let rounds: Vec<RoundEnd> = e.session.completed_rounds().iter().map(RoundEnd::from).collect();
        let profit = e.session.cumulative_score();
        Ok(SummaryResponse {
            schema_version: SCHEMA_VERSION,
            session_id: e.id.clone(),
            status: e.status((self.clock)(), self.timeout_ms),
            infections: rounds.iter().filter(|r| r.infected).count(),
            rounds,
            session_profit: profit,
            payout_usd: profit as f64 / farmgame_core::game::SIM_DOLLARS_PER_USD,
        })
    }

    /// Complete sessions created at or after `since`, ordered by
    /// (created_at, session_id), in the canonical encoding.
    pub async fn export(&self, since: Option<u64>) -> Result<Vec<u8>, ServiceError> {
        let mut ids = self.order.lock().await.clone();
        ids.sort();
        let sessions = self.sessions.read().await;
        let mut logs = Vec::new();
        for (created, id) in ids {
            if since.is_some_and(|s| created < s) {
                continue;
            }
            let Some(entry) = sessions.get(&id) else { continue };
            let e = entry.lock().await;
            if e.session.is_complete() {
                logs.push(e.log()?);
            }
        }
        let mut buf = Vec::new();
        events::write_sessions(&mut buf, &logs)?;
        Ok(buf)
    }
}

trait RoundStartEvent {
    fn to_record_start(&self) -> Event;
}

impl RoundStartEvent for farmgame_core::game::RoundState {
    fn to_record_start(&self) -> Event {
        Event::RoundStart {
            round_index: self.round_index(),
            treatment: self.treatment(),
        }
    }
}

#[cfg(test)]
mod tests;
