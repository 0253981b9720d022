use std::sync::atomic::{AtomicU64, Ordering};

use farmgame_core::game::{Action, BiosecurityLevel, Level, Session, Timing};

use super::*;

struct Harness {
    _dir: tempfile::TempDir,
    path: PathBuf,
    now: Arc<AtomicU64>,
    svc: Arc<SessionService>,
}

fn clock(now: &Arc<AtomicU64>) -> Clock {
    let now = now.clone();
    Arc::new(move || now.load(Ordering::SeqCst))
}

fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_path_buf();
    let now = Arc::new(AtomicU64::new(1_000_000));
    let svc = Arc::new(SessionService::open(&path, GameConfig::default(), 30, clock(&now)).unwrap());
    Harness { _dir: dir, path, now, svc }
}

impl Harness {
    fn reopen(&self) -> SessionService {
        SessionService::open(&self.path, GameConfig::default(), 30, clock(&self.now)).unwrap()
    }

    fn tick(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }
}

fn act(action: Action, key: &str) -> ActionRequest {
    ActionRequest {
        action,
        client_elapsed_ms: 850.0,
        idempotency_key: key.into(),
    }
}

/// Invest on the first two turns of each round, hold otherwise.
async fn play_out(h: &Harness, svc: &SessionService, id: &str) -> Vec<StepResponse> {
    let mut out = Vec::new();
    let mut n = 0;
    loop {
        let st = svc.state(id).await.unwrap();
        let Some(view) = st.view else { break };
        let action = if view.turn <= 2 && view.can_invest { Action::Invest } else { Action::Hold };
        h.tick(500);
        out.push(svc.submit(id, act(action, &format!("k{n}"))).await.unwrap());
        n += 1;
    }
    out
}

#[tokio::test]
async fn create_starts_round_one() {
    let h = harness();
    let s = h.svc.create(CreateRequest::default()).await.unwrap();
    assert_eq!(s.status, Status::Active);
    let v = s.view.unwrap();
    assert_eq!((v.round_index, v.turn), (1, 1));
    assert_eq!(v.level, BiosecurityLevel::None);
    assert_eq!(s.completed_rounds, 0);
}

#[tokio::test]
async fn same_seed_same_schedule() {
    let h = harness();
    let a = h.svc.create(CreateRequest { seed: Some(42), player_kind: None }).await.unwrap();
    let b = h.svc.create(CreateRequest { seed: Some(42), player_kind: None }).await.unwrap();
    assert_ne!(a.session_id, b.session_id);
    let map = h.svc.sessions.read().await;
    let oa = map[&a.session_id].lock().await.session.treatment_order().to_vec();
    let ob = map[&b.session_id].lock().await.session.treatment_order().to_vec();
    assert_eq!(oa, ob);
}

#[tokio::test]
async fn concurrent_creations_get_distinct_ids() {
    let h = harness();
    let tasks: Vec<_> = (0..100)
        .map(|_| {
            let svc = h.svc.clone();
            tokio::spawn(async move { svc.create(CreateRequest::default()).await.unwrap().session_id })
        })
        .collect();
    let mut ids = std::collections::HashSet::new();
    for t in tasks {
        ids.insert(t.await.unwrap());
    }
    assert_eq!(ids.len(), 100);
    assert_eq!(fs::read_to_string(h.path.join("index.jsonl")).unwrap().lines().count(), 100);
}

#[tokio::test]
async fn hidden_counts_follow_treatment() {
    let h = harness();
    for seed in 0..8 {
        let s = h.svc.create(CreateRequest { seed: Some(seed), player_kind: None }).await.unwrap();
        let map = h.svc.sessions.read().await;
        let e = map[&s.session_id].lock().await;
        let t = e.session.current().treatment();
        let v = s.view.unwrap();
        let expect = |l: Level| if l == Level::High { 29 } else { 4 };
        assert_eq!(v.hidden_biosecurity(), expect(t.biosecurity_uncertainty));
        assert_eq!(v.hidden_infection(), expect(t.disease_uncertainty));
    }
}

#[tokio::test]
async fn invest_at_high_is_rejected_without_side_effects() {
    let h = harness();
    let id = h.svc.create(CreateRequest::default()).await.unwrap().session_id;
    for i in 0..3 {
        let r = h.svc.submit(&id, act(Action::Invest, &format!("i{i}"))).await;
        if r.as_ref().is_ok_and(|r| r.round_end.is_some()) {
            return; // infected before reaching High; nothing left to check in this round
        }
    }
    let before = h.svc.state(&id).await.unwrap();
    let file_before = fs::read(h.path.join("sessions").join(format!("{id}.jsonl"))).unwrap();
    let err = h.svc.submit(&id, act(Action::Invest, "again")).await.unwrap_err();
    assert!(matches!(err, ServiceError::Illegal(StepError::AlreadyAtHigh)));
    assert_eq!(h.svc.state(&id).await.unwrap(), before);
    assert_eq!(fs::read(h.path.join("sessions").join(format!("{id}.jsonl"))).unwrap(), file_before);
    // The rejected key was not consumed.
    assert!(h.svc.submit(&id, act(Action::Hold, "again")).await.is_ok());
}

#[tokio::test]
async fn duplicate_key_replays_prior_result() {
    let h = harness();
    let id = h.svc.create(CreateRequest::default()).await.unwrap().session_id;
    let first = h.svc.submit(&id, act(Action::Invest, "dup")).await.unwrap();
    let again = h.svc.submit(&id, act(Action::Hold, "dup")).await.unwrap();
    assert_eq!(first, again);
    let st = h.svc.state(&id).await.unwrap();
    if first.round_end.is_none() {
        assert_eq!(st.view.unwrap().turn, 2);
    }
}

#[tokio::test]
async fn bad_requests() {
    let h = harness();
    let id = h.svc.create(CreateRequest::default()).await.unwrap().session_id;
    assert!(matches!(h.svc.submit(&id, act(Action::Hold, "")).await, Err(ServiceError::BadKey)));
    let neg = ActionRequest {
        client_elapsed_ms: -1.0,
        ..act(Action::Hold, "x")
    };
    assert!(matches!(h.svc.submit(&id, neg).await, Err(ServiceError::BadLatency)));
    assert!(matches!(h.svc.state("nope").await, Err(ServiceError::NotFound(_))));
}

#[tokio::test]
async fn full_session_completes_and_exports() {
    let h = harness();
    let id = h
        .svc
        .create(CreateRequest { seed: Some(7), player_kind: None })
        .await
        .unwrap()
        .session_id;
    let steps = play_out(&h, &h.svc, &id).await;
    let last = steps.last().unwrap();
    assert_eq!(last.status, Status::Complete);
    assert_eq!(last.payout_usd, Some(last.cumulative_score as f64 / 50_000.0));
    for s in steps.iter().filter(|s| s.round_end.as_ref().is_some_and(|r| r.infected)) {
        let r = s.round_end.as_ref().unwrap();
        assert_eq!(r.round_score, -1000 * r.final_level.beta() as i64);
    }
    let st = h.svc.state(&id).await.unwrap();
    assert_eq!(st.status, Status::Complete);
    assert!(st.view.is_none());
    assert_eq!(st.summary.as_deref(), Some(format!("/sessions/{id}/summary").as_str()));
    let summary = h.svc.summary(&id).await.unwrap();
    assert_eq!(summary.rounds.len(), 32);
    assert_eq!(summary.session_profit, last.cumulative_score);

    let bytes = h.svc.export(None).await.unwrap();
    let logs = events::read_sessions(&bytes[..]).unwrap();
    assert_eq!(logs.len(), 1);
    assert_eq!(logs[0].rounds.len(), 32);
    assert_eq!(h.svc.export(None).await.unwrap(), bytes);
    assert!(h.svc.export(Some(u64::MAX)).await.unwrap().is_empty());

    // The recorded actions alone rebuild the same log.
    let moves = logs[0]
        .rounds
        .iter()
        .flat_map(|r| r.actions.iter())
        .map(|a| {
            (
                a.action,
                Timing {
                    latency_ms: a.latency_ms,
                    server_elapsed_ms: a.server_elapsed_ms,
                },
            )
        });
    let replayed = Session::replay(7, GameConfig::default(), moves).unwrap();
    assert_eq!(replayed.to_log(id.clone(), PlayerKind::Human, logs[0].started_at_ms).unwrap(), logs[0]);
    assert!(logs[0].rounds[0].actions[0].server_elapsed_ms.is_some());

    let err = h.svc.submit(&id, act(Action::Hold, "late")).await.unwrap_err();
    assert!(matches!(err, ServiceError::NotActive { status: Status::Complete, .. }));
}

#[tokio::test]
async fn restart_resumes_from_the_log() {
    let h = harness();
    let id = h.svc.create(CreateRequest::default()).await.unwrap().session_id;
    let mut keys = Vec::new();
    for i in 0..9 {
        h.tick(100);
        let k = format!("r{i}");
        h.svc.submit(&id, act(Action::Hold, &k)).await.unwrap();
        keys.push(k);
    }
    let before = h.svc.state(&id).await.unwrap();
    let first = h.svc.submit(&id, act(Action::Hold, "r9")).await.unwrap();

    let reopened = h.reopen();
    let after = reopened.state(&id).await.unwrap();
    assert_eq!(after.completed_rounds, h.svc.state(&id).await.unwrap().completed_rounds);
    assert_ne!(after, before);
    assert_eq!(reopened.submit(&id, act(Action::Invest, "r9")).await.unwrap(), first);

    let done = play_out(&h, &reopened, &id).await;
    assert_eq!(done.last().unwrap().status, Status::Complete);
}

#[tokio::test]
async fn export_survives_restart_byte_for_byte() {
    let h = harness();
    for seed in [3, 1, 2] {
        let id = h.svc.create(CreateRequest { seed: Some(seed), player_kind: None }).await.unwrap().session_id;
        h.tick(10);
        play_out(&h, &h.svc, &id).await;
    }
    h.svc.create(CreateRequest::default()).await.unwrap();
    let before = h.svc.export(None).await.unwrap();
    assert_eq!(events::read_sessions(&before[..]).unwrap().len(), 3);
    assert_eq!(h.reopen().export(None).await.unwrap(), before);
}

#[tokio::test]
async fn idle_sessions_are_abandoned() {
    let h = harness();
    let id = h.svc.create(CreateRequest::default()).await.unwrap().session_id;
    h.tick(29 * 60_000);
    assert_eq!(h.svc.state(&id).await.unwrap().status, Status::Active);
    h.svc.submit(&id, act(Action::Hold, "a")).await.unwrap();
    h.tick(31 * 60_000);
    let st = h.svc.state(&id).await.unwrap();
    assert_eq!(st.status, Status::Abandoned);
    assert!(st.view.is_none());
    assert!(matches!(
        h.svc.submit(&id, act(Action::Hold, "b")).await,
        Err(ServiceError::NotActive { status: Status::Abandoned, .. })
    ));
    assert!(h.svc.export(None).await.unwrap().is_empty());
    assert_eq!(h.reopen().state(&id).await.unwrap().status, Status::Abandoned);
}

#[tokio::test]
async fn responses_never_carry_hidden_values() {
    let h = harness();
    for seed in 0..4 {
        let id = h.svc.create(CreateRequest { seed: Some(seed), player_kind: None }).await.unwrap().session_id;
        let map = h.svc.sessions.read().await;
        let entry = map[&id].clone();
        drop(map);
        loop {
            let (hidden_bio, hidden_inf) = {
                let e = entry.lock().await;
                if e.session.is_complete() {
                    break;
                }
                let farms = e.session.current().farms();
                let hb: Vec<usize> = farms.iter().filter(|f| !f.biosecurity_visible).map(|f| f.id).collect();
                let hi: Vec<usize> = farms.iter().filter(|f| !f.infection_visible).map(|f| f.id).collect();
                (hb, hi)
            };
            let st = serde_json::to_value(h.svc.state(&id).await.unwrap()).unwrap();
            let farms = st["view"]["farms"].as_array().unwrap();
            for f in &hidden_bio {
                assert_eq!(farms[*f]["biosecurity"], "hidden");
            }
            for f in &hidden_inf {
                assert_eq!(farms[*f]["infected"], "hidden");
            }
            let step = h.svc.submit(&id, act(Action::Hold, &step_key(&st))).await.unwrap();
            let v = serde_json::to_value(&step).unwrap();
            for e in v["outcome"]["events"].as_array().unwrap() {
                if e["kind"] == "npc_infected" {
                    assert!(!hidden_inf.contains(&(e["farm"].as_u64().unwrap() as usize)));
                }
            }
        }
    }
}

fn step_key(st: &serde_json::Value) -> String {
    format!("{}-{}-{}", st["completed_rounds"], st["view"]["turn"], st["session_id"])
}
