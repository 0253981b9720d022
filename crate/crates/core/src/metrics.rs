//! Per-round risk aversion, trajectories, session summaries and decision-time
//! statistics derived from session logs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::game::{BiosecurityLevel, SessionLog, Treatment, LEVEL_STEPS, ROUNDS, TURNS_PER_ROUND};
use crate::stats::{mean, median, population_std, TreatmentTable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("round duration {0} outside 1..=6")]
    TauOutOfRange(u8),
    #[error("session {id} has {rounds} rounds, 32 required")]
    IncompleteSession { id: String, rounds: usize },
    #[error("no sessions to analyze")]
    Empty,
    #[error("group assignment has {got} entries for {expected} players")]
    GroupMismatch { expected: usize, got: usize },
}

/// ρ_r = β(final level) / min(3, τ_r).
pub fn rho_round(final_level: BiosecurityLevel, tau: u8) -> Result<f64, MetricsError> {
    if !(1..=TURNS_PER_ROUND).contains(&tau) {
        return Err(MetricsError::TauOutOfRange(tau));
    }
    Ok(final_level.beta() as f64 / LEVEL_STEPS.min(tau) as f64)
}

/// The 32 per-round ρ values of one player, in play order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskTrajectory {
    pub player_id: String,
    pub rho: Vec<f64>,
}

fn require_complete(session: &SessionLog) -> Result<(), MetricsError> {
    if session.rounds.len() != ROUNDS {
        return Err(MetricsError::IncompleteSession {
            id: session.session_id.clone(),
            rounds: session.rounds.len(),
        });
    }
    Ok(())
}

pub fn trajectory(session: &SessionLog) -> Result<RiskTrajectory, MetricsError> {
    require_complete(session)?;
    let mut rounds: Vec<_> = session.rounds.iter().collect();
    rounds.sort_by_key(|r| r.round_index);
    let rho = rounds
        .iter()
        .map(|r| rho_round(r.final_level, r.tau))
        .collect::<Result<_, _>>()?;
    Ok(RiskTrajectory {
        player_id: session.session_id.clone(),
        rho,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerSummary {
    pub player_id: String,
    pub session_profit: i64,
    pub mean_rho: f64,
    pub infection_count: usize,
}

pub fn summarize(session: &SessionLog) -> Result<PlayerSummary, MetricsError> {
    let t = trajectory(session)?;
    Ok(PlayerSummary {
        player_id: session.session_id.clone(),
        session_profit: session.session_profit,
        mean_rho: mean(&t.rho).unwrap_or(0.0),
        infection_count: session.infection_count(),
    })
}

/// ρ observations keyed by the treatment they were played under.
pub fn treatment_table(sessions: &[SessionLog]) -> Result<TreatmentTable, MetricsError> {
    let mut table = TreatmentTable::new();
    for s in sessions {
        require_complete(s)?;
        for r in &s.rounds {
            table.push(r.treatment, rho_round(r.final_level, r.tau)?);
        }
    }
    Ok(table)
}

/// Per-round time (sum of the round's turn latencies), in play order.
pub fn round_latencies(session: &SessionLog) -> Result<Vec<f64>, MetricsError> {
    require_complete(session)?;
    let mut rounds: Vec<_> = session.rounds.iter().collect();
    rounds.sort_by_key(|r| r.round_index);
    Ok(rounds.iter().map(|r| r.latency_ms()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumStats {
    pub treatment: u8,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerTime {
    pub player_id: String,
    /// `t − μ_T` per round, in play order.
    pub differences: Vec<f64>,
    /// `(t − μ_T) / σ_T` per round; `None` where σ_T = 0.
    pub z: Vec<Option<f64>>,
    /// Treatment index of each round.
    pub treatments: Vec<u8>,
    pub median_difference: f64,
    pub median_z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeTable {
    pub strata: Vec<StratumStats>,
    pub players: Vec<PlayerTime>,
}

/// Decision time relative to the population mean of the same treatment.
pub fn time_table(sessions: &[SessionLog]) -> Result<TimeTable, MetricsError> {
    if sessions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut by_treatment = vec![Vec::new(); Treatment::COUNT];
    let mut per_player = Vec::with_capacity(sessions.len());
    for s in sessions {
        let lat = round_latencies(s)?;
        let mut rounds: Vec<_> = s.rounds.iter().collect();
        rounds.sort_by_key(|r| r.round_index);
        let treatments: Vec<u8> = rounds.iter().map(|r| r.treatment.index()).collect();
        for (t, &ms) in treatments.iter().zip(&lat) {
            by_treatment[*t as usize].push(ms);
        }
        per_player.push((s.session_id.clone(), lat, treatments));
    }
    let strata: Vec<StratumStats> = by_treatment
        .iter()
        .enumerate()
        .map(|(t, v)| StratumStats {
            treatment: t as u8,
            mean_ms: mean(v).unwrap_or(0.0),
            std_ms: population_std(v).unwrap_or(0.0),
            count: v.len(),
        })
        .collect();
    let players = per_player
        .into_iter()
        .map(|(player_id, lat, treatments)| {
            let differences: Vec<f64> = lat
                .iter()
                .zip(&treatments)
                .map(|(ms, t)| ms - strata[*t as usize].mean_ms)
                .collect();
            let z: Vec<Option<f64>> = differences
                .iter()
                .zip(&treatments)
                .map(|(d, t)| {
                    let sd = strata[*t as usize].std_ms;
                    (sd > 0.0).then(|| d / sd)
                })
                .collect();
            let defined: Vec<f64> = z.iter().flatten().copied().collect();
            PlayerTime {
                player_id,
                median_difference: median(&differences).unwrap_or(0.0),
                median_z: median(&defined),
                differences,
                z,
                treatments,
            }
        })
        .collect();
    Ok(TimeTable { strata, players })
}

/// Decision-time aggregates of one behavioral group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupTimeStats {
    pub group: usize,
    pub players: usize,
    /// Median over players of their median difference.
    pub median_difference: f64,
    /// Median over players of their median z (undefined z dropped).
    pub median_z: Option<f64>,
    /// Per treatment, the median difference over the group's player-rounds.
    pub treatment_medians: Vec<Option<f64>>,
    /// Mean and population std of `treatment_medians`.
    pub treatment_mean_ms: f64,
    pub treatment_std_ms: f64,
    /// Per round, the median z over the group's players.
    pub round_median_z: Vec<Option<f64>>,
}

pub fn group_time_stats(table: &TimeTable, groups: &[usize], group_count: usize) -> Result<Vec<GroupTimeStats>, MetricsError> {
    if groups.len() != table.players.len() {
        return Err(MetricsError::GroupMismatch {
            expected: table.players.len(),
            got: groups.len(),
        });
    }
    let out = (0..group_count)
        .map(|g| {
            let members: Vec<&PlayerTime> = table
                .players
                .iter()
                .zip(groups)
                .filter(|(_, &gg)| gg == g)
                .map(|(p, _)| p)
                .collect();
            let med_diffs: Vec<f64> = members.iter().map(|p| p.median_difference).collect();
            let med_z: Vec<f64> = members.iter().filter_map(|p| p.median_z).collect();
            let treatment_medians: Vec<Option<f64>> = (0..Treatment::COUNT as u8)
                .map(|t| {
                    let v: Vec<f64> = members
                        .iter()
                        .flat_map(|p| p.treatments.iter().zip(&p.differences).filter(move |(tt, _)| **tt == t).map(|(_, d)| *d))
                        .collect();
                    median(&v)
                })
                .collect();
            let defined: Vec<f64> = treatment_medians.iter().flatten().copied().collect();
            let round_median_z = (0..ROUNDS)
                .map(|r| {
                    let v: Vec<f64> = members.iter().filter_map(|p| p.z.get(r).copied().flatten()).collect();
                    median(&v)
                })
                .collect();
            GroupTimeStats {
                group: g,
                players: members.len(),
                median_difference: median(&med_diffs).unwrap_or(0.0),
                median_z: median(&med_z),
                treatment_mean_ms: mean(&defined).unwrap_or(0.0),
                treatment_std_ms: population_std(&defined).unwrap_or(0.0),
                treatment_medians,
                round_median_z,
            }
        })
        .collect();
    Ok(out)
}

/// Median per-round time of one group. Round 1 is kept in `medians_ms` but
/// flagged as excluded from curve fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundCurve {
    pub group: usize,
    pub players: usize,
    pub medians_ms: Vec<f64>,
    pub excluded_rounds: Vec<u8>,
}

impl RoundCurve {
    /// `(round, median seconds)` for every round not excluded.
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.medians_ms
            .iter()
            .enumerate()
            .map(|(i, ms)| ((i + 1) as u8, *ms))
            .filter(|(r, _)| !self.excluded_rounds.contains(r))
            .map(|(r, ms)| (r as f64, ms / 1000.0))
            .collect()
    }
}

/// Per-group median of per-round latencies. `latencies[p]` holds player p's
/// 32 round times; `groups[p]` its group. Empty groups are skipped.
pub fn round_median_curve(latencies: &[Vec<f64>], groups: &[usize]) -> Result<Vec<RoundCurve>, MetricsError> {
    if groups.len() != latencies.len() {
        return Err(MetricsError::GroupMismatch {
            expected: latencies.len(),
            got: groups.len(),
        });
    }
    let group_count = groups.iter().max().map_or(0, |g| g + 1);
    let mut curves = Vec::new();
    for g in 0..group_count {
        let members: Vec<&Vec<f64>> = latencies.iter().zip(groups).filter(|(_, &gg)| gg == g).map(|(l, _)| l).collect();
        if members.is_empty() {
            continue;
        }
        let rounds = members.iter().map(|l| l.len()).min().unwrap_or(0);
        let medians_ms = (0..rounds)
            .map(|r| median(&members.iter().map(|l| l[r]).collect::<Vec<_>>()).unwrap_or(0.0))
            .collect();
        curves.push(RoundCurve {
            group: g,
            players: members.len(),
            medians_ms,
            excluded_rounds: vec![1],
        });
    }
    Ok(curves)
}

/// Median ρ at each round over a set of trajectories.
pub fn round_medians(trajectories: &[&RiskTrajectory]) -> Vec<f64> {
    let rounds = trajectories.iter().map(|t| t.rho.len()).min().unwrap_or(0);
    (0..rounds)
        .map(|r| median(&trajectories.iter().map(|t| t.rho[r]).collect::<Vec<_>>()).unwrap_or(0.0))
        .collect()
}
