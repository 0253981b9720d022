//! Parallel agent batteries and the ground-truth label sidecar.

use std::io::{self, Write};
use std::path::Path;

use farmgame_core::agents::{play_battery_agent, Archetype, BatteryPlan, LabeledSession, ParseArchetypeError};
use farmgame_core::game::{GameConfig, SessionError};
use rayon::prelude::*;

/// Same output as the sequential core battery, computed across threads.
pub fn run_battery(plan: &BatteryPlan, seed: u64, config: &GameConfig) -> Result<Vec<LabeledSession>, SessionError> {
    plan.roster()
        .par_iter()
        .map(|(i, spec)| play_battery_agent(spec, *i, seed, config))
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum CountsError {
    #[error("expected NAME=COUNT, got {0:?}")]
    Shape(String),
    #[error(transparent)]
    Name(#[from] ParseArchetypeError),
    #[error("count for {0} is not a non-negative integer")]
    Count(String),
    #[error("{0} given more than once")]
    Duplicate(String),
}

/// Parse `RA=250,RT=250,LRA=250,LRT=250` into counts in RA, RT, LRA, LRT order.
pub fn parse_counts(spec: &str) -> Result<[usize; 4], CountsError> {
    let mut counts = [None; 4];
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, count) = part.split_once('=').ok_or_else(|| CountsError::Shape(part.into()))?;
        let a: Archetype = name.parse()?;
        let n: usize = count.trim().parse().map_err(|_| CountsError::Count(a.name().into()))?;
        if counts[a.index()].replace(n).is_some() {
            return Err(CountsError::Duplicate(a.name().into()));
        }
    }
    if counts.iter().all(Option::is_none) {
        return Err(CountsError::Shape(spec.into()));
    }
    Ok(counts.map(|c| c.unwrap_or(0)))
}

/// `session_id,archetype` per line, with a header.
pub fn write_labels<W: Write>(w: W, sessions: &[LabeledSession]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["session_id", "archetype"])?;
    for s in sessions {
        w.write_record([s.log.session_id.as_str(), s.archetype.name()])?;
    }
    w.flush()
}

#[derive(Debug, thiserror::Error)]
pub enum LabelsError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Name(#[from] ParseArchetypeError),
}

pub fn read_labels(path: &Path) -> Result<Vec<(String, Archetype)>, LabelsError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        out.push((row[0].to_string(), row[1].parse()?));
    }
    Ok(out)
}
