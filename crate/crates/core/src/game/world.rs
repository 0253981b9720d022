use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::config::{Accounting, ConfigError, GameConfig, InfectionModelParams};
use super::infection::{pair_probability, transmission_kernel};
use super::session::{RoundRecord, TurnAction};
use super::types::{Action, BiosecurityLevel, Treatment};
use super::{FARMS, INFECTION_PENALTY, INVEST_COST, ROUND_ENDOWMENT, TURNS_PER_ROUND};
use crate::rng::GameRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Farm {
    pub id: usize,
    pub position: Point,
    pub biosecurity: BiosecurityLevel,
    pub infected: bool,
    pub biosecurity_visible: bool,
    pub infection_visible: bool,
    pub player_controlled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("cannot invest: biosecurity is already at the highest level")]
    AlreadyAtHigh,
    #[error("round {0} has already ended")]
    RoundOver(u8),
    #[error("round {0} has not ended yet")]
    RoundInProgress(u8),
}

/// Client-side and server-side timing attached to an action.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timing {
    pub latency_ms: f64,
    pub server_elapsed_ms: Option<f64>,
}

impl Timing {
    pub fn client(latency_ms: f64) -> Self {
        Timing {
            latency_ms,
            server_elapsed_ms: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TurnEvent {
    Invested { level: BiosecurityLevel },
    NpcInfected { farm: usize },
    PlayerInfected,
    RoundEnded { tau: u8, infected: bool, round_score: i64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub round_index: u8,
    pub turn: u8,
    pub action: Action,
    pub events: Vec<TurnEvent>,
    pub terminated: bool,
}

/// State of one round in play. Fields are read-only from outside; the only
/// way to change the state is [`RoundState::step_turn`].
#[derive(Clone, Debug)]
pub struct RoundState {
    round_index: u8,
    turn: u8,
    farms: Vec<Farm>,
    treatment: Treatment,
    budget: i64,
    terminated: bool,
    infected_player: bool,
    tau: Option<u8>,
    actions: Vec<TurnAction>,
    params: InfectionModelParams,
    accounting: Accounting,
    npc_spread: bool,
    kernel: Vec<f64>,
    rng: GameRng,
}

/// Build the world for one round. Farm 0 belongs to the player.
pub fn generate_world(
    seed: u64,
    round_index: u8,
    treatment: Treatment,
    config: &GameConfig,
) -> Result<RoundState, ConfigError> {
    config.validate()?;
    let mut rng = GameRng::seed_from_u64(seed);
    let arena = config.arena;

    let mut farms: Vec<Farm> = (0..FARMS)
        .map(|id| Farm {
            id,
            position: Point {
                x: rng.random::<f64>() * arena.width,
                y: rng.random::<f64>() * arena.height,
            },
            biosecurity: BiosecurityLevel::None,
            infected: false,
            biosecurity_visible: true,
            infection_visible: true,
            player_controlled: id == 0,
        })
        .collect();

    let weights = WeightedIndex::new(config.npc_level_weights(treatment.avg_biosecurity))
        .map_err(|_| ConfigError::LevelDistribution { which: "npc" })?;
    for farm in farms.iter_mut().skip(1) {
        farm.biosecurity = BiosecurityLevel::ALL[weights.sample(&mut rng)];
    }

    let seed_farm = rng.random_range(1..FARMS);
    farms[seed_farm].infected = true;

    let npcs = FARMS - 1;
    let hide_bio = config.hidden_count(treatment.biosecurity_uncertainty);
    for i in index::sample(&mut rng, npcs, hide_bio) {
        farms[i + 1].biosecurity_visible = false;
    }
    let hide_inf = config.hidden_count(treatment.disease_uncertainty);
    for i in index::sample(&mut rng, npcs, hide_inf) {
        farms[i + 1].infection_visible = false;
    }

    let params = config.infection;
    let mut kernel = alloc::vec![0.0; FARMS * FARMS];
    for i in 0..FARMS {
        for j in (i + 1)..FARMS {
            let k = transmission_kernel(farms[i].position.distance(&farms[j].position), &params);
            kernel[i * FARMS + j] = k;
            kernel[j * FARMS + i] = k;
        }
    }

    Ok(RoundState {
        round_index,
        turn: 1,
        farms,
        treatment,
        budget: ROUND_ENDOWMENT,
        terminated: false,
        infected_player: false,
        tau: None,
        actions: Vec::new(),
        params,
        accounting: config.accounting,
        npc_spread: config.npc_spread,
        kernel,
        rng,
    })
}

impl RoundState {
    pub fn round_index(&self) -> u8 {
        self.round_index
    }

    /// Turn about to be played (the last played turn once terminated).
    pub fn turn(&self) -> u8 {
        self.turn
    }

    pub fn farms(&self) -> &[Farm] {
        &self.farms
    }

    pub fn player(&self) -> &Farm {
        &self.farms[0]
    }

    pub fn treatment(&self) -> Treatment {
        self.treatment
    }

    pub fn budget(&self) -> i64 {
        self.budget
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn infected_player(&self) -> bool {
        self.infected_player
    }

    pub fn params(&self) -> &InfectionModelParams {
        &self.params
    }

    pub fn actions(&self) -> &[TurnAction] {
        &self.actions
    }

    /// Score under the configured accounting, given the current level.
    pub fn round_score(&self) -> i64 {
        score_round(
            self.accounting,
            self.player().biosecurity,
            self.infected_player,
        )
    }

    /// Probability that farm `i` is infected this turn, given the current
    /// infected set.
    pub fn infection_chance(&self, i: usize) -> f64 {
        let rate = self.params.rate(self.treatment.contagion_rate);
        let level = self.farms[i].biosecurity;
        let escape: f64 = self
            .farms
            .iter()
            .filter(|f| f.infected)
            .map(|j| 1.0 - pair_probability(rate, self.kernel[i * FARMS + j.id], level, &self.params))
            .product();
        (1.0 - escape).clamp(0.0, 1.0)
    }

    /// Apply the player's action, then sample one turn of infection spread.
    pub fn step_turn(&mut self, action: Action, timing: Timing) -> Result<TurnOutcome, StepError> {
        if self.terminated {
            return Err(StepError::RoundOver(self.round_index));
        }
        let mut events = Vec::new();
        if action == Action::Invest {
            let next = self.farms[0]
                .biosecurity
                .next()
                .ok_or(StepError::AlreadyAtHigh)?;
            self.farms[0].biosecurity = next;
            self.budget -= INVEST_COST;
            events.push(TurnEvent::Invested { level: next });
        }
        self.actions.push(TurnAction {
            turn: self.turn,
            action,
            latency_ms: timing.latency_ms,
            server_elapsed_ms: timing.server_elapsed_ms,
        });

        // Synchronous update: every susceptible farm is tested against the
        // infected set as it stood at the start of the turn. One uniform is
        // drawn per tested farm so the stream does not depend on outcomes.
        let mut newly = Vec::new();
        for i in 0..FARMS {
            if self.farms[i].infected || (i != 0 && !self.npc_spread) {
                continue;
            }
            let p = self.infection_chance(i);
            let u: f64 = self.rng.random();
            if u < p {
                newly.push(i);
            }
        }
        for &i in &newly {
            self.farms[i].infected = true;
            if i == 0 {
                self.infected_player = true;
            } else {
                events.push(TurnEvent::NpcInfected { farm: i });
            }
        }

        if self.infected_player {
            events.push(TurnEvent::PlayerInfected);
            self.finish(&mut events);
        } else if self.turn == TURNS_PER_ROUND {
            self.finish(&mut events);
        } else {
            self.turn += 1;
        }
        let played = self.actions.last().map_or(self.turn, |a| a.turn);
        Ok(TurnOutcome {
            round_index: self.round_index,
            turn: played,
            action,
            events,
            terminated: self.terminated,
        })
    }

    fn finish(&mut self, events: &mut Vec<TurnEvent>) {
        self.terminated = true;
        self.tau = Some(self.turn);
        events.push(TurnEvent::RoundEnded {
            tau: self.turn,
            infected: self.infected_player,
            round_score: self.round_score(),
        });
    }

    /// The completed round as a record.
    pub fn to_record(&self) -> Result<RoundRecord, StepError> {
        let tau = self.tau.ok_or(StepError::RoundInProgress(self.round_index))?;
        Ok(RoundRecord {
            round_index: self.round_index,
            treatment: self.treatment,
            actions: self.actions.clone(),
            final_level: self.player().biosecurity,
            tau,
            infected: self.infected_player,
            round_score: self.round_score(),
        })
    }
}

pub(crate) fn score_round(accounting: Accounting, level: BiosecurityLevel, infected: bool) -> i64 {
    let base = ROUND_ENDOWMENT - INVEST_COST * level.beta() as i64;
    match accounting {
        Accounting::Deduct if infected => base - INFECTION_PENALTY,
        _ => base,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Level, NPC_FARMS};

    fn treatment(index: u8) -> Treatment {
        Treatment::from_index(index).unwrap()
    }

    /// C = 0 under every Low-contagion treatment.
    fn no_contagion() -> GameConfig {
        let mut cfg = GameConfig::default();
        cfg.infection.rate_low = 0.0;
        cfg
    }

    #[test]
    fn same_seed_same_world() {
        let cfg = GameConfig::default();
        for idx in [0u8, 13, 31] {
            let a = generate_world(7, 1, treatment(idx), &cfg).unwrap();
            let b = generate_world(7, 1, treatment(idx), &cfg).unwrap();
            assert_eq!(a.farms(), b.farms());
        }
        let c = generate_world(8, 1, treatment(0), &cfg).unwrap();
        assert_ne!(generate_world(7, 1, treatment(0), &cfg).unwrap().farms(), c.farms());
    }

    #[test]
    fn one_seed_infection_and_one_player() {
        let cfg = GameConfig::default();
        for seed in 0..50 {
            let w = generate_world(seed, 1, treatment((seed % 32) as u8), &cfg).unwrap();
            assert_eq!(w.farms().iter().filter(|f| f.infected).count(), 1);
            assert!(!w.player().infected);
            assert_eq!(w.farms().iter().filter(|f| f.player_controlled).count(), 1);
            assert_eq!(w.player().biosecurity, BiosecurityLevel::None);
            for f in w.farms() {
                assert!((0.0..cfg.arena.width).contains(&f.position.x));
                assert!((0.0..cfg.arena.height).contains(&f.position.y));
            }
        }
    }

    #[test]
    fn mask_counts_match_uncertainty() {
        let cfg = GameConfig::default();
        for t in Treatment::all() {
            let w = generate_world(3, 1, t, &cfg).unwrap();
            let hidden_bio = w.farms().iter().filter(|f| !f.biosecurity_visible).count();
            let hidden_inf = w.farms().iter().filter(|f| !f.infection_visible).count();
            let expect = |l: Level| if l == Level::High { 29 } else { 4 };
            assert_eq!(hidden_bio, expect(t.biosecurity_uncertainty));
            assert_eq!(hidden_inf, expect(t.disease_uncertainty));
            assert!(w.player().biosecurity_visible && w.player().infection_visible);
        }
    }

    #[test]
    fn npc_level_means_follow_avg_biosecurity() {
        let cfg = GameConfig::default();
        let mean = |avg_high: bool| {
            let t = treatment(if avg_high { 1 } else { 0 });
            let mut total = 0.0;
            for seed in 0..200 {
                let w = generate_world(seed, 1, t, &cfg).unwrap();
                total += w.farms()[1..].iter().map(|f| f.biosecurity.beta() as f64).sum::<f64>();
            }
            total / (200.0 * NPC_FARMS as f64)
        };
        let (low, high) = (mean(false), mean(true));
        assert!((low - 0.9).abs() < 0.05, "{low}");
        assert!((high - 2.1).abs() < 0.05, "{high}");
    }

    #[test]
    fn invest_three_then_hold_scores_22000() {
        let mut w = generate_world(1, 1, treatment(0), &no_contagion()).unwrap();
        for turn in 1..=6 {
            let a = if turn <= 3 { Action::Invest } else { Action::Hold };
            w.step_turn(a, Timing::client(100.0)).unwrap();
        }
        let r = w.to_record().unwrap();
        assert_eq!(r.final_level, BiosecurityLevel::High);
        assert_eq!(r.tau, 6);
        assert_eq!(r.round_score, 22_000);
        assert_eq!(w.budget(), 22_000);
    }

    #[test]
    fn invest_at_high_is_rejected_and_state_unchanged() {
        let mut w = generate_world(1, 1, treatment(0), &no_contagion()).unwrap();
        for _ in 0..3 {
            w.step_turn(Action::Invest, Timing::client(1.0)).unwrap();
        }
        let before = w.turn();
        assert_eq!(w.step_turn(Action::Invest, Timing::client(1.0)), Err(StepError::AlreadyAtHigh));
        assert_eq!(w.turn(), before);
        assert_eq!(w.actions().len(), 3);
    }

    #[test]
    fn acting_after_termination_fails() {
        let mut w = generate_world(1, 1, treatment(0), &no_contagion()).unwrap();
        for _ in 0..6 {
            w.step_turn(Action::Hold, Timing::client(1.0)).unwrap();
        }
        assert!(w.is_terminated());
        assert_eq!(w.step_turn(Action::Hold, Timing::client(1.0)), Err(StepError::RoundOver(1)));
    }

    #[test]
    fn zero_contagion_never_infects() {
        let cfg = no_contagion();
        let low_contagion: Vec<Treatment> =
            Treatment::all().filter(|t| t.contagion_rate == Level::Low).collect();
        for seed in 0..100u64 {
            let t = low_contagion[(seed % 16) as usize];
            let mut w = generate_world(seed, 1, t, &cfg).unwrap();
            while !w.is_terminated() {
                w.step_turn(Action::Hold, Timing::client(0.0)).unwrap();
            }
            assert!(!w.infected_player());
            assert_eq!(w.farms().iter().filter(|f| f.infected).count(), 1);
            assert_eq!(w.to_record().unwrap().tau, 6);
        }
    }

    #[test]
    fn infected_round_accounting() {
        assert_eq!(score_round(Accounting::Deduct, BiosecurityLevel::Low, true), -1_000);
        assert_eq!(score_round(Accounting::Deduct, BiosecurityLevel::None, true), 0);
        assert_eq!(score_round(Accounting::NoPenalty, BiosecurityLevel::Low, true), 24_000);
        assert_eq!(score_round(Accounting::Deduct, BiosecurityLevel::High, false), 22_000);
    }

    #[test]
    fn infection_ends_round_with_tau_at_that_turn() {
        let mut cfg = GameConfig::default();
        cfg.infection.rate_low = 0.9;
        cfg.infection.rate_high = 1.0;
        cfg.infection.distance_scale = 100.0;
        let mut found = false;
        for seed in 0..200 {
            let mut w = generate_world(seed, 1, treatment(4), &cfg).unwrap();
            w.step_turn(Action::Invest, Timing::client(0.0)).unwrap();
            if w.is_terminated() {
                continue;
            }
            w.step_turn(Action::Hold, Timing::client(0.0)).unwrap();
            if w.infected_player() {
                let r = w.to_record().unwrap();
                assert_eq!(r.tau, 2);
                assert_eq!(r.final_level, BiosecurityLevel::Low);
                assert_eq!(r.round_score, -1_000);
                found = true;
                break;
            }
        }
        assert!(found);
    }

    #[test]
    fn kernel_cache_matches_public_probability() {
        let cfg = GameConfig::default();
        let w = generate_world(11, 1, treatment(4), &cfg).unwrap();
        let infected: Vec<&Farm> = w.farms().iter().filter(|f| f.infected).collect();
        for i in 0..FARMS {
            if w.farms()[i].infected {
                continue;
            }
            let direct = crate::game::infection_probability(&w.farms()[i], infected.iter().copied(), &w.treatment(), &cfg.infection);
            assert!((direct - w.infection_chance(i)).abs() < 1e-14);
        }
    }
}
