//! TOML configuration file with `FARMGAME_*` environment overrides.

use std::path::{Path, PathBuf};

use farmgame_core::game::{ConfigError, GameConfig};
use serde::{Deserialize, Serialize};

use crate::pipeline::AnalysisOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceSettings {
    pub port: u16,
    pub data_dir: PathBuf,
    /// Minutes without an action before a session counts as abandoned.
    pub abandon_after_minutes: u64,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        ServiceSettings {
            port: 8080,
            data_dir: PathBuf::from("data"),
            abandon_after_minutes: 30,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSettings {
    pub agents: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub game: GameConfig,
    pub service: ServiceSettings,
    pub analysis: AnalysisOptions,
    pub simulate: SimulateSettings,
}

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {name}={value:?} is invalid")]
    Env { name: String, value: String },
    #[error("invalid game config: {0}")]
    Game(#[from] ConfigError),
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, SettingsError> {
        let text = std::fs::read_to_string(path).map_err(|source| SettingsError::Read {
            path: path.into(),
            source,
        })?;
        let s: Settings = toml::from_str(&text).map_err(|source| SettingsError::Parse {
            path: path.into(),
            source,
        })?;
        s.game.validate()?;
        Ok(s)
    }

    /// File (if any), then environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, SettingsError> {
        let mut s = match path {
            Some(p) => Self::from_file(p)?,
            None => Settings::default(),
        };
        s.apply_env(|k| std::env::var(k).ok())?;
        Ok(s)
    }

    /// `FARMGAME_PORT`, `FARMGAME_DATA_DIR`, `FARMGAME_GAME_CONFIG` (a TOML
    /// file holding only game settings) and `FARMGAME_TIMEOUT_MINUTES`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), SettingsError> {
        let bad = |name: &str, value: String| SettingsError::Env {
            name: name.into(),
            value,
        };
        if let Some(v) = get("FARMGAME_PORT") {
            self.service.port = v.parse().map_err(|_| bad("FARMGAME_PORT", v))?;
        }
        if let Some(v) = get("FARMGAME_DATA_DIR") {
            self.service.data_dir = v.into();
        }
        if let Some(v) = get("FARMGAME_TIMEOUT_MINUTES") {
            self.service.abandon_after_minutes = v.parse().map_err(|_| bad("FARMGAME_TIMEOUT_MINUTES", v))?;
        }
        if let Some(v) = get("FARMGAME_GAME_CONFIG") {
            self.game = load_game_config(Path::new(&v))?;
        }
        Ok(())
    }
}

pub fn load_game_config(path: &Path) -> Result<GameConfig, SettingsError> {
    let text = std::fs::read_to_string(path).map_err(|source| SettingsError::Read {
        path: path.into(),
        source,
    })?;
    let cfg: GameConfig = toml::from_str(&text).map_err(|source| SettingsError::Parse {
        path: path.into(),
        source,
    })?;
    cfg.validate()?;
    Ok(cfg)
}
