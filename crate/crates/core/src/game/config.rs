use serde::{Deserialize, Serialize};

use super::types::{BiosecurityLevel, Level};
use super::NPC_FARMS;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("contagion rates must satisfy 0 <= low <= high <= 1 (got low={low}, high={high})")]
    Rates { low: f64, high: f64 },
    #[error("distance scale must be positive and finite (got {0})")]
    DistanceScale(f64),
    #[error("biosecurity modifiers must lie in [0,1], start at 1 and be non-increasing (got {0:?})")]
    Modifiers([f64; 4]),
    #[error("arena dimensions must be positive and finite")]
    Arena,
    #[error("{which} NPC level distribution must be non-negative weights with positive sum")]
    LevelDistribution { which: &'static str },
    #[error("mask fraction {0} outside [0,1]")]
    MaskFraction(f64),
}

/// Rectangle the farms are placed in. Defaults to width 1 with a 16:9 aspect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Arena {
            width: 1.0,
            height: 9.0 / 16.0,
        }
    }
}

impl Arena {
    pub fn diagonal(&self) -> f64 {
        libm::hypot(self.width, self.height)
    }
}

/// Parameters of the per-pair transmission kernel
/// `p_ij = C · exp(−d_ij / λ) · s(b_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfectionModelParams {
    pub rate_low: f64,
    pub rate_high: f64,
    /// λ, in arena units.
    pub distance_scale: f64,
    /// s(level) for None, Low, Medium, High.
    pub biosecurity_modifiers: [f64; 4],
}

impl InfectionModelParams {
    pub fn for_arena(arena: &Arena) -> Self {
        InfectionModelParams {
            rate_low: 0.08,
            rate_high: 0.25,
            distance_scale: 0.2 * arena.diagonal(),
            biosecurity_modifiers: [1.0, 0.7, 0.45, 0.25],
        }
    }

    pub fn rate(&self, contagion: Level) -> f64 {
        match contagion {
            Level::Low => self.rate_low,
            Level::High => self.rate_high,
        }
    }

    pub fn modifier(&self, level: BiosecurityLevel) -> f64 {
        self.biosecurity_modifiers[level.beta() as usize]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (low, high) = (self.rate_low, self.rate_high);
        if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low > high {
            return Err(ConfigError::Rates { low, high });
        }
        if !(self.distance_scale.is_finite() && self.distance_scale > 0.0) {
            return Err(ConfigError::DistanceScale(self.distance_scale));
        }
        let s = self.biosecurity_modifiers;
        let in_range = s.iter().all(|v| (0.0..=1.0).contains(v));
        let non_increasing = s.windows(2).all(|w| w[1] <= w[0]);
        if !in_range || !non_increasing || s[0] != 1.0 {
            return Err(ConfigError::Modifiers(s));
        }
        Ok(())
    }
}

impl Default for InfectionModelParams {
    fn default() -> Self {
        Self::for_arena(&Arena::default())
    }
}

/// How an infected round is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// `25000 − 1000·β − 25000` when infected.
    #[default]
    Deduct,
    /// Infection ends the round without a penalty: `25000 − 1000·β`.
    NoPenalty,
}

/// Everything that parameterizes a game beyond the fixed rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub arena: Arena,
    pub infection: InfectionModelParams,
    /// Categorical NPC level weights when average biosecurity is Low.
    pub npc_levels_low: [f64; 4],
    /// Categorical NPC level weights when average biosecurity is High.
    pub npc_levels_high: [f64; 4],
    /// Fraction of NPC farms whose property is hidden under Low uncertainty.
    pub mask_fraction_low: f64,
    /// Fraction hidden under High uncertainty.
    pub mask_fraction_high: f64,
    /// Let the disease spread between NPC farms.
    pub npc_spread: bool,
    pub accounting: Accounting,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            arena: Arena::default(),
            infection: InfectionModelParams::default(),
            npc_levels_low: [0.4, 0.35, 0.2, 0.05],
            npc_levels_high: [0.05, 0.2, 0.35, 0.4],
            mask_fraction_low: 0.1,
            mask_fraction_high: 0.6,
            npc_spread: true,
            accounting: Accounting::Deduct,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let a = self.arena;
        if !(a.width.is_finite() && a.height.is_finite() && a.width > 0.0 && a.height > 0.0) {
            return Err(ConfigError::Arena);
        }
        self.infection.validate()?;
        for (which, w) in [("low", &self.npc_levels_low), ("high", &self.npc_levels_high)] {
            let ok = w.iter().all(|v| v.is_finite() && *v >= 0.0) && w.iter().sum::<f64>() > 0.0;
            if !ok {
                return Err(ConfigError::LevelDistribution { which });
            }
        }
        for f in [self.mask_fraction_low, self.mask_fraction_high] {
            if !(0.0..=1.0).contains(&f) {
                return Err(ConfigError::MaskFraction(f));
            }
        }
        Ok(())
    }

    pub fn npc_level_weights(&self, avg: Level) -> &[f64; 4] {
        match avg {
            Level::Low => &self.npc_levels_low,
            Level::High => &self.npc_levels_high,
        }
    }

    /// Number of NPC farms hidden for an uncertainty level: ⌊fraction · 49⌋.
    pub fn hidden_count(&self, uncertainty: Level) -> usize {
        let fraction = match uncertainty {
            Level::Low => self.mask_fraction_low,
            Level::High => self.mask_fraction_high,
        };
        libm::floor(fraction * NPC_FARMS as f64) as usize
    }
}
