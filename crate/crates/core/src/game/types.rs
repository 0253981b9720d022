use core::fmt;

use serde::{Deserialize, Serialize};

/// Ordinal biosecurity state of a farm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiosecurityLevel {
    #[default]
    None = 0,
    Low = 1,
    Medium = 2,
    High = 3,
}

impl BiosecurityLevel {
    pub const ALL: [BiosecurityLevel; 4] = [Self::None, Self::Low, Self::Medium, Self::High];

    /// Numeric mapping β: None=0, Low=1, Medium=2, High=3.
    pub fn beta(self) -> u8 {
        self as u8
    }

    pub fn from_beta(beta: u8) -> Option<Self> {
        Self::ALL.get(beta as usize).copied()
    }

    /// The level one increment above, if any.
    pub fn next(self) -> Option<Self> {
        Self::from_beta(self.beta() + 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        }
    }
}

/// Player decision at a turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Invest,
    Hold,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Invest => "invest",
            Action::Hold => "hold",
        }
    }
}

/// Two-level treatment factor setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Low,
    High,
}

impl Level {
    fn from_bit(bit: bool) -> Self {
        if bit {
            Level::High
        } else {
            Level::Low
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::High => "high",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Messaging {
    Verbal,
    Gauge,
}

/// The five binary treatment factors, in bit order of [`Treatment::index`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    AvgBiosecurity = 0,
    BiosecurityUncertainty = 1,
    ContagionRate = 2,
    DiseaseUncertainty = 3,
    Messaging = 4,
}

impl Factor {
    pub const ALL: [Factor; 5] = [
        Factor::AvgBiosecurity,
        Factor::BiosecurityUncertainty,
        Factor::ContagionRate,
        Factor::DiseaseUncertainty,
        Factor::Messaging,
    ];

    pub fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn name(self) -> &'static str {
        match self {
            Factor::AvgBiosecurity => "avg_biosecurity",
            Factor::BiosecurityUncertainty => "biosecurity_uncertainty",
            Factor::ContagionRate => "contagion_rate",
            Factor::DiseaseUncertainty => "disease_uncertainty",
            Factor::Messaging => "messaging",
        }
    }

    /// Human label of the factor's "low" and "high" bit values.
    pub fn level_names(self) -> (&'static str, &'static str) {
        match self {
            Factor::Messaging => ("verbal", "gauge"),
            _ => ("low", "high"),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("treatment index {0} out of range 0..32")]
pub struct TreatmentError(pub u8);

/// One of the 32 factorial scenarios.
///
/// `index` packs the factors as bits: avg biosecurity (bit 0), biosecurity
/// uncertainty (1), contagion rate (2), disease uncertainty (3), messaging
/// (4, set for gauge). Serialized as the index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Treatment {
    pub avg_biosecurity: Level,
    pub biosecurity_uncertainty: Level,
    pub contagion_rate: Level,
    pub disease_uncertainty: Level,
    pub messaging: Messaging,
}

impl Treatment {
    pub const COUNT: usize = 32;

    pub fn from_index(index: u8) -> Result<Self, TreatmentError> {
        if index as usize >= Self::COUNT {
            return Err(TreatmentError(index));
        }
        let bit = |f: Factor| index & f.bit() != 0;
        Ok(Treatment {
            avg_biosecurity: Level::from_bit(bit(Factor::AvgBiosecurity)),
            biosecurity_uncertainty: Level::from_bit(bit(Factor::BiosecurityUncertainty)),
            contagion_rate: Level::from_bit(bit(Factor::ContagionRate)),
            disease_uncertainty: Level::from_bit(bit(Factor::DiseaseUncertainty)),
            messaging: if bit(Factor::Messaging) {
                Messaging::Gauge
            } else {
                Messaging::Verbal
            },
        })
    }

    pub fn index(&self) -> u8 {
        Factor::ALL
            .iter()
            .filter(|f| self.is_high(**f))
            .fold(0, |acc, f| acc | f.bit())
    }

    /// Whether `factor` sits at its "high" bit (gauge for messaging).
    pub fn is_high(&self, factor: Factor) -> bool {
        match factor {
            Factor::AvgBiosecurity => self.avg_biosecurity == Level::High,
            Factor::BiosecurityUncertainty => self.biosecurity_uncertainty == Level::High,
            Factor::ContagionRate => self.contagion_rate == Level::High,
            Factor::DiseaseUncertainty => self.disease_uncertainty == Level::High,
            Factor::Messaging => self.messaging == Messaging::Gauge,
        }
    }

    pub fn all() -> impl Iterator<Item = Treatment> {
        (0..Self::COUNT as u8).map(|i| Treatment::from_index(i).expect("index in range"))
    }
}

impl From<Treatment> for u8 {
    fn from(t: Treatment) -> u8 {
        t.index()
    }
}

impl TryFrom<u8> for Treatment {
    type Error = TreatmentError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Treatment::from_index(value)
    }
}
