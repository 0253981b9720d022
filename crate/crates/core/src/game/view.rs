use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::types::{BiosecurityLevel, Level, Messaging};
use super::world::RoundState;

/// A farm property as the player sees it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observed<T> {
    Hidden,
    Known(T),
}

impl<T> Observed<T> {
    pub fn known(&self) -> Option<&T> {
        match self {
            Observed::Hidden => None,
            Observed::Known(v) => Some(v),
        }
    }

    pub fn is_hidden(&self) -> bool {
        matches!(self, Observed::Hidden)
    }
}

impl<T: Serialize> Serialize for Observed<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Observed::Hidden => s.serialize_str("hidden"),
            Observed::Known(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Observed<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Known(T),
            Marker(String),
        }
        match Repr::<T>::deserialize(d)? {
            Repr::Known(v) => Ok(Observed::Known(v)),
            Repr::Marker(m) if m == "hidden" => Ok(Observed::Hidden),
            Repr::Marker(m) => Err(serde::de::Error::custom(format!("unexpected marker {m:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarmView {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub player: bool,
    pub biosecurity: Observed<BiosecurityLevel>,
    pub infected: Observed<bool>,
}

/// Contagion-rate message. Both kinds carry the same underlying level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessagePayload {
    Verbal { text: String, contagion_level: Level },
    /// `value` is the per-contact contagion rate, a fraction in [0, 1].
    Gauge { value: f64, contagion_level: Level },
}

impl MessagePayload {
    pub fn contagion_level(&self) -> Level {
        match self {
            MessagePayload::Verbal { contagion_level, .. }
            | MessagePayload::Gauge { contagion_level, .. } => *contagion_level,
        }
    }
}

/// What the player is allowed to see.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerView {
    pub round_index: u8,
    pub turn: u8,
    pub budget: i64,
    pub level: BiosecurityLevel,
    pub can_invest: bool,
    pub terminated: bool,
    pub infected: bool,
    pub message: MessagePayload,
    pub farms: Vec<FarmView>,
}

impl PlayerView {
    pub fn hidden_biosecurity(&self) -> usize {
        self.farms.iter().filter(|f| f.biosecurity.is_hidden()).count()
    }

    pub fn hidden_infection(&self) -> usize {
        self.farms.iter().filter(|f| f.infected.is_hidden()).count()
    }
}

/// Masked observation of a round. The player's own farm is always visible.
pub fn player_view(state: &RoundState) -> PlayerView {
    let treatment = state.treatment();
    let level = treatment.contagion_rate;
    let rate = state.params().rate(level);
    let message = match treatment.messaging {
        Messaging::Verbal => MessagePayload::Verbal {
            text: format!("Contagion rate: {:.0}% ({})", rate * 100.0, level.name()),
            contagion_level: level,
        },
        Messaging::Gauge => MessagePayload::Gauge {
            value: rate,
            contagion_level: level,
        },
    };
    let farms = state
        .farms()
        .iter()
        .map(|f| {
            let own = f.player_controlled;
            FarmView {
                id: f.id,
                x: f.position.x,
                y: f.position.y,
                player: own,
                biosecurity: if own || f.biosecurity_visible {
                    Observed::Known(f.biosecurity)
                } else {
                    Observed::Hidden
                },
                infected: if own || f.infection_visible {
                    Observed::Known(f.infected)
                } else {
                    Observed::Hidden
                },
            }
        })
        .collect();
    let player = state.player();
    PlayerView {
        round_index: state.round_index(),
        turn: state.turn(),
        budget: state.budget(),
        level: player.biosecurity,
        can_invest: !state.is_terminated() && player.biosecurity != BiosecurityLevel::High,
        terminated: state.is_terminated(),
        infected: state.infected_player(),
        message,
        farms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_world, GameConfig, Treatment};

    fn world_with(f: impl Fn(&mut Treatment), config: &GameConfig) -> RoundState {
        let mut t = Treatment::from_index(0).unwrap();
        f(&mut t);
        generate_world(5, 1, t, config).unwrap()
    }

    #[test]
    fn low_disease_uncertainty_hides_four() {
        let w = world_with(|_| {}, &GameConfig::default());
        let v = player_view(&w);
        assert_eq!(v.hidden_infection(), 4);
        assert_eq!(v.hidden_biosecurity(), 4);
    }

    #[test]
    fn high_uncertainty_hides_twenty_nine() {
        let w = world_with(
            |t| {
                t.biosecurity_uncertainty = Level::High;
                t.disease_uncertainty = Level::High;
            },
            &GameConfig::default(),
        );
        let v = player_view(&w);
        assert_eq!(v.hidden_biosecurity(), 29);
        assert_eq!(v.hidden_infection(), 29);
    }

    #[test]
    fn player_farm_always_visible() {
        let mut cfg = GameConfig::default();
        cfg.mask_fraction_low = 1.0;
        cfg.mask_fraction_high = 1.0;
        let v = player_view(&world_with(|_| {}, &cfg));
        let own = v.farms.iter().find(|f| f.player).unwrap();
        assert_eq!(own.biosecurity, Observed::Known(BiosecurityLevel::None));
        assert_eq!(own.infected, Observed::Known(false));
        assert_eq!(v.hidden_biosecurity(), 49);
    }

    #[test]
    fn messaging_formats_share_level() {
        let cfg = GameConfig::default();
        let gauge = player_view(&world_with(
            |t| {
                t.messaging = Messaging::Gauge;
                t.contagion_rate = Level::High;
            },
            &cfg,
        ));
        match &gauge.message {
            MessagePayload::Gauge { value, contagion_level } => {
                assert!((0.0..=1.0).contains(value));
                assert_eq!(*contagion_level, Level::High);
            }
            other => panic!("expected gauge, got {other:?}"),
        }
        let verbal = player_view(&world_with(|t| t.contagion_rate = Level::High, &cfg));
        match &verbal.message {
            MessagePayload::Verbal { text, contagion_level } => {
                assert!(text.contains("25%"), "{text}");
                assert_eq!(*contagion_level, Level::High);
            }
            other => panic!("expected verbal, got {other:?}"),
        }
    }
}
