//! Seeded generative policies for the four behavioral archetypes and their
//! decision-time model. Used to drive headless sessions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::game::{
    Action, BiosecurityLevel, GameConfig, Level, PlayerKind, PlayerView, RoundState, Session, SessionError, SessionLog,
    Timing, LEVEL_STEPS, ROUNDS,
};
use crate::rng::{derive_seed, rng_for, GameRng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Archetype {
    RA,
    RT,
    LRA,
    LRT,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [Archetype::RA, Archetype::RT, Archetype::LRA, Archetype::LRT];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::RA => "RA",
            Archetype::RT => "RT",
            Archetype::LRA => "LRA",
            Archetype::LRT => "LRT",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown archetype {0:?} (expected RA, RT, LRA or LRT)")]
pub struct ParseArchetypeError(pub String);

impl FromStr for Archetype {
    type Err = ParseArchetypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ParseArchetypeError(s.into()))
    }
}

/// Invest-probability ramp of one archetype.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentArchetype {
    pub name: Archetype,
    pub p_start: f64,
    pub p_end: f64,
    pub noise_sd: f64,
    /// Added to the invest probability when the contagion rate is High.
    pub contagion_sensitivity: f64,
}

impl AgentArchetype {
    pub fn default_for(name: Archetype) -> Self {
        let (p_start, p_end) = match name {
            Archetype::RA => (0.95, 0.95),
            Archetype::RT => (0.05, 0.05),
            Archetype::LRA => (0.15, 0.90),
            Archetype::LRT => (0.90, 0.15),
        };
        AgentArchetype {
            name,
            p_start,
            p_end,
            noise_sd: 0.1,
            contagion_sensitivity: 0.0,
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_sd = 0.0;
        self
    }

    /// Linear ramp value at `round_index` (1-based), before noise.
    pub fn ramp(&self, round_index: u8) -> f64 {
        let frac = (round_index.clamp(1, ROUNDS as u8) - 1) as f64 / (ROUNDS - 1) as f64;
        clamp01(clamp01(self.p_start) + (clamp01(self.p_end) - clamp01(self.p_start)) * frac)
    }
}

fn clamp01(p: f64) -> f64 {
    if p.is_nan() {
        0.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

/// `clamp(ramp + noise + sensitivity·1[High])`.
pub fn invest_probability(archetype: &AgentArchetype, round_index: u8, contagion: Level, noise: f64) -> f64 {
    let bump = if contagion == Level::High { archetype.contagion_sensitivity } else { 0.0 };
    clamp01(archetype.ramp(round_index) + noise + bump)
}

/// What an agent may look at: its own level and the contagion message.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub level: BiosecurityLevel,
    pub contagion: Level,
}

impl From<&PlayerView> for Observation {
    fn from(v: &PlayerView) -> Self {
        Observation {
            level: v.level,
            contagion: v.message.contagion_level(),
        }
    }
}

impl From<&RoundState> for Observation {
    fn from(s: &RoundState) -> Self {
        Observation {
            level: s.player().biosecurity,
            contagion: s.treatment().contagion_rate,
        }
    }
}

/// One turn of the policy. An agent gets one invest opportunity on each of
/// the first three turns and draws Invest with probability `p_r` there, so
/// an uninfected round ends with β ~ Binomial(3, p_r) and E[ρ_r] = p_r.
pub fn decide(
    archetype: &AgentArchetype,
    round_index: u8,
    turn: u8,
    observation: Observation,
    noise: f64,
    rng: &mut impl Rng,
) -> Action {
    if observation.level == BiosecurityLevel::High || turn > LEVEL_STEPS {
        return Action::Hold;
    }
    let p = invest_probability(archetype, round_index, observation.contagion, noise);
    if rng.random::<f64>() < p {
        Action::Invest
    } else {
        Action::Hold
    }
}

/// Per-round decision time: `a·1000·t^(−k)` ms, inflated in round 1, with
/// multiplicative lognormal noise and a signed group offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub a: f64,
    pub k: f64,
    pub round1_inflation: f64,
    pub lognormal_sd: f64,
    pub group_offset_ms: f64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LatencyModelError {
    #[error("latency scale a must be positive, got {0}")]
    Scale(f64),
    #[error("decay exponent k must be non-negative, got {0}")]
    Exponent(f64),
    #[error("round-1 inflation must be at least 1, got {0}")]
    Inflation(f64),
    #[error("lognormal sd must be non-negative, got {0}")]
    Noise(f64),
}

impl LatencyModel {
    /// Fitted curve parameters and offsets per archetype.
    pub fn default_for(name: Archetype) -> Self {
        let (a, k, group_offset_ms) = match name {
            Archetype::RT => (4.2603, 0.3321, -555.87),
            Archetype::LRT => (4.3152, 0.3282, 686.51),
            Archetype::LRA => (4.2547, 0.2810, 274.00),
            Archetype::RA => (4.3068, 0.3650, -326.90),
        };
        LatencyModel {
            a,
            k,
            round1_inflation: 2.5,
            lognormal_sd: 0.3,
            group_offset_ms,
        }
    }

    pub fn validate(&self) -> Result<(), LatencyModelError> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(LatencyModelError::Scale(self.a));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(LatencyModelError::Exponent(self.k));
        }
        if !(self.round1_inflation >= 1.0 && self.round1_inflation.is_finite()) {
            return Err(LatencyModelError::Inflation(self.round1_inflation));
        }
        if !(self.lognormal_sd >= 0.0 && self.lognormal_sd.is_finite()) {
            return Err(LatencyModelError::Noise(self.lognormal_sd));
        }
        Ok(())
    }

    /// Noise-free round time in ms, without the group offset.
    pub fn curve_ms(&self, round_index: u8) -> f64 {
        let t = round_index.max(1) as f64;
        let base = self.a * 1000.0 * libm::pow(t, -self.k);
        if round_index <= 1 {
            base * self.round1_inflation
        } else {
            base
        }
    }
}

pub fn sample_latency(model: &LatencyModel, round_index: u8, rng: &mut impl Rng) -> f64 {
    let z: f64 = if model.lognormal_sd > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
    let ms = model.curve_ms(round_index) * libm::exp(model.lognormal_sd * z) + model.group_offset_ms;
    ms.max(0.0)
}

/// Everything needed to play one synthetic agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub archetype: AgentArchetype,
    pub latency: LatencyModel,
}

impl AgentSpec {
    pub fn default_for(name: Archetype) -> Self {
        AgentSpec {
            archetype: AgentArchetype::default_for(name),
            latency: LatencyModel::default_for(name),
        }
    }
}

/// Play a full 32-round session. The agent's policy and latency draws come
/// from streams derived from `agent_seed`, which is also the session seed.
pub fn play_agent_session(
    spec: &AgentSpec,
    agent_seed: u64,
    session_id: impl Into<String>,
    config: &GameConfig,
) -> Result<SessionLog, SessionError> {
    let mut session = Session::new(agent_seed, config.clone())?;
    let mut policy: GameRng = rng_for(agent_seed, Stream::AgentPolicy, 0);
    let mut timing: GameRng = rng_for(agent_seed, Stream::AgentLatency, 0);
    while !session.is_complete() {
        let round = session.current().round_index();
        let noise = if spec.archetype.noise_sd > 0.0 {
            spec.archetype.noise_sd * policy.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        loop {
            let state = session.current();
            let action = decide(&spec.archetype, round, state.turn(), Observation::from(state), noise, &mut policy);
            if session.submit(action, Timing::client(0.0))?.finished_round.is_some() {
                break;
            }
        }
    }
    let mut log = session.to_log(session_id, PlayerKind::Agent, 0)?;
    // Round time is drawn once and spread evenly over the turns played.
    for record in &mut log.rounds {
        let total = sample_latency(&spec.latency, record.round_index, &mut timing);
        let n = record.actions.len().max(1) as f64;
        for a in &mut record.actions {
            a.latency_ms = total / n;
        }
    }
    Ok(log)
}

/// Agent counts per archetype and the specs they play with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryPlan {
    pub agents: Vec<(AgentSpec, usize)>,
}

impl BatteryPlan {
    /// Default specs with the given counts in RA, RT, LRA, LRT order.
    pub fn with_counts(counts: [usize; 4]) -> Self {
        BatteryPlan {
            agents: Archetype::ALL.iter().zip(counts).map(|(a, n)| (AgentSpec::default_for(*a), n)).collect(),
        }
    }

    pub fn map_specs(mut self, f: impl Fn(AgentSpec) -> AgentSpec) -> Self {
        for (spec, _) in &mut self.agents {
            *spec = f(*spec);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.agents.iter().map(|(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Agents in battery order with their global indices.
    pub fn roster(&self) -> Vec<(u64, AgentSpec)> {
        let mut out = Vec::with_capacity(self.len());
        for (spec, n) in &self.agents {
            for _ in 0..*n {
                out.push((out.len() as u64, *spec));
            }
        }
        out
    }
}

/// A finished agent session with its ground-truth archetype.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSession {
    pub log: SessionLog,
    pub archetype: Archetype,
}

pub fn agent_session_id(index: u64) -> String {
    format!("agent-{index:05}")
}

/// Play agent `index` of a battery seeded with `battery_seed`.
pub fn play_battery_agent(
    spec: &AgentSpec,
    index: u64,
    battery_seed: u64,
    config: &GameConfig,
) -> Result<LabeledSession, SessionError> {
    let seed = derive_seed(battery_seed, Stream::BatteryAgent, index);
    let log = play_agent_session(spec, seed, agent_session_id(index), config)?;
    Ok(LabeledSession {
        log,
        archetype: spec.archetype.name,
    })
}

pub fn run_battery(plan: &BatteryPlan, seed: u64, config: &GameConfig) -> Result<Vec<LabeledSession>, SessionError> {
    plan.roster()
        .iter()
        .map(|(i, spec)| play_battery_agent(spec, *i, seed, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Accounting;
    use crate::metrics::trajectory;
    use rand::SeedableRng;

    fn obs(level: BiosecurityLevel) -> Observation {
        Observation {
            level,
            contagion: Level::Low,
        }
    }

    #[test]
    fn ramp_endpoints() {
        let ra = AgentArchetype::default_for(Archetype::RA).noiseless();
        assert_eq!(invest_probability(&ra, 1, Level::Low, 0.0), 0.95);
        let lra = AgentArchetype::default_for(Archetype::LRA).noiseless();
        assert!((invest_probability(&lra, 32, Level::Low, 0.0) - 0.90).abs() < 1e-15);
        assert!((invest_probability(&lra, 1, Level::Low, 0.0) - 0.15).abs() < 1e-15);
        let lrt = AgentArchetype::default_for(Archetype::LRT);
        assert!((lrt.ramp(16) - (0.90 - 0.75 * 15.0 / 31.0)).abs() < 1e-15);
    }

    #[test]
    fn probabilities_clamp() {
        let mut a = AgentArchetype::default_for(Archetype::RA);
        assert_eq!(invest_probability(&a, 5, Level::Low, 0.5), 1.0);
        assert_eq!(invest_probability(&a, 5, Level::Low, -3.0), 0.0);
        a.p_start = 1.7;
        a.p_end = -0.2;
        assert_eq!(a.ramp(1), 1.0);
        assert_eq!(a.ramp(32), 0.0);
        let rt = AgentArchetype {
            contagion_sensitivity: 0.3,
            ..AgentArchetype::default_for(Archetype::RT)
        };
        assert!((invest_probability(&rt, 3, Level::High, 0.0) - 0.35).abs() < 1e-15);
        assert!((invest_probability(&rt, 3, Level::Low, 0.0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn high_level_always_holds() {
        let a = AgentArchetype {
            p_start: 1.0,
            p_end: 1.0,
            ..AgentArchetype::default_for(Archetype::RA)
        };
        let mut rng = GameRng::seed_from_u64(1);
        for turn in 1..=6 {
            assert_eq!(decide(&a, 4, turn, obs(BiosecurityLevel::High), 0.0, &mut rng), Action::Hold);
        }
        assert_eq!(decide(&a, 4, 1, obs(BiosecurityLevel::Low), 0.0, &mut rng), Action::Invest);
        assert_eq!(decide(&a, 4, 4, obs(BiosecurityLevel::Low), 0.0, &mut rng), Action::Hold);
    }

    #[test]
    fn latency_examples() {
        let mut rng = GameRng::seed_from_u64(3);
        let m = LatencyModel {
            a: 4.3068,
            k: 0.3650,
            round1_inflation: 2.5,
            lognormal_sd: 0.0,
            group_offset_ms: 0.0,
        };
        let t2 = sample_latency(&m, 2, &mut rng);
        assert!((t2 - 3343.0).abs() < 2.0, "{t2}");
        assert_eq!(t2, 4306.8 * libm::pow(2.0, -0.365));

        let flat = LatencyModel { k: 0.0, ..m };
        for t in 2..=32 {
            assert_eq!(sample_latency(&flat, t, &mut rng), 4306.8);
        }

        let infl = LatencyModel { round1_inflation: 2.0, ..m };
        assert_eq!(sample_latency(&infl, 1, &mut rng), 2.0 * 4306.8);
    }

    #[test]
    fn latency_median_follows_curve() {
        let m = LatencyModel {
            lognormal_sd: 0.3,
            group_offset_ms: 0.0,
            ..LatencyModel::default_for(Archetype::LRA)
        };
        let mut rng = GameRng::seed_from_u64(11);
        let mut v: Vec<f64> = (0..4001).map(|_| sample_latency(&m, 9, &mut rng)).collect();
        v.sort_by(f64::total_cmp);
        let med = v[2000];
        // Standard error of the median of a lognormal with sd 0.3 is about 0.6%.
        assert!((med / m.curve_ms(9) - 1.0).abs() < 0.025, "{med}");
    }

    #[test]
    fn latency_validation() {
        let m = LatencyModel::default_for(Archetype::RA);
        assert!(m.validate().is_ok());
        assert!(LatencyModel { a: 0.0, ..m }.validate().is_err());
        assert!(LatencyModel { k: -0.1, ..m }.validate().is_err());
        assert!(LatencyModel { round1_inflation: 0.5, ..m }.validate().is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("lra".parse::<Archetype>().unwrap(), Archetype::LRA);
        assert!("XX".parse::<Archetype>().is_err());
    }

    #[test]
    fn battery_shape_and_determinism() {
        let cfg = GameConfig::default();
        let plan = BatteryPlan::with_counts([1, 1, 1, 1]);
        let a = run_battery(&plan, 42, &cfg).unwrap();
        let b = run_battery(&plan, 42, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        for (i, s) in a.iter().enumerate() {
            assert_eq!(s.log.rounds.len(), 32);
            s.log.validate().unwrap();
            assert_eq!(s.archetype, Archetype::ALL[i]);
            assert_eq!(s.log.session_id, agent_session_id(i as u64));
        }
        let c = run_battery(&plan, 43, &cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn battery_logs_replay() {
        let cfg = GameConfig::default();
        let s = run_battery(&BatteryPlan::with_counts([0, 0, 1, 0]), 5, &cfg).unwrap().remove(0);
        let moves = s
            .log
            .rounds
            .iter()
            .flat_map(|r| r.actions.iter().map(|a| (a.action, Timing::client(a.latency_ms))))
            .collect::<Vec<_>>();
        let replayed = Session::replay(s.log.seed, cfg, moves).unwrap();
        assert_eq!(replayed.to_log(s.log.session_id.clone(), PlayerKind::Agent, 0).unwrap(), s.log);
    }

    fn zero_contagion() -> GameConfig {
        let mut cfg = GameConfig::default();
        cfg.infection.rate_low = 0.0;
        cfg.infection.rate_high = 0.0;
        cfg.accounting = Accounting::Deduct;
        cfg
    }

    #[test]
    fn certain_investor_in_zero_contagion_world_is_all_ones() {
        let cfg = zero_contagion();
        let spec = AgentSpec {
            archetype: AgentArchetype {
                p_start: 1.0,
                p_end: 1.0,
                ..AgentArchetype::default_for(Archetype::RA).noiseless()
            },
            latency: LatencyModel::default_for(Archetype::RA),
        };
        let log = play_agent_session(&spec, 9, "x", &cfg).unwrap();
        assert_eq!(trajectory(&log).unwrap().rho, alloc::vec![1.0; 32]);
        assert!(log.rounds.iter().all(|r| r.tau == 6 && !r.infected));
    }

    #[test]
    fn mean_trajectory_matches_ramp() {
        let cfg = zero_contagion();
        let n = 1000;
        let plan = BatteryPlan::with_counts([0, 0, n, 0]).map_specs(|mut s| {
            s.archetype.noise_sd = 0.0;
            s
        });
        let runs = run_battery(&plan, 77, &cfg).unwrap();
        let ramp = AgentArchetype::default_for(Archetype::LRA);
        for r in 0..32 {
            let mean: f64 = runs.iter().map(|s| trajectory(&s.log).unwrap().rho[r]).sum::<f64>() / n as f64;
            let p = ramp.ramp(r as u8 + 1);
            // ρ = B/3 with B ~ Binomial(3, p): sd of the mean is sqrt(p(1−p)/3n).
            let se = libm::sqrt(p * (1.0 - p) / (3.0 * n as f64));
            assert!((mean - p).abs() < 4.5 * se, "round {} mean {mean} ramp {p}", r + 1);
        }
    }

    #[test]
    fn learning_groups_are_slower() {
        let cfg = GameConfig::default();
        let runs = run_battery(&BatteryPlan::with_counts([100, 100, 100, 100]), 3, &cfg).unwrap();
        let mut medians = [0.0; 4];
        for a in Archetype::ALL {
            let mut v: Vec<f64> = runs
                .iter()
                .filter(|s| s.archetype == a)
                .flat_map(|s| s.log.rounds.iter().map(|r| r.latency_ms()))
                .collect();
            v.sort_by(f64::total_cmp);
            medians[a.index()] = v[v.len() / 2];
        }
        let [ra, rt, lra, lrt] = medians;
        assert!(lra > ra && lra > rt && lrt > ra && lrt > rt, "{medians:?}");
    }
}
