use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{mann_whitney, mean, RankTestResult, StatsError};
use crate::game::{Factor, Level, Treatment};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// ρ observations grouped by treatment index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TreatmentTable {
    values: Vec<Vec<f64>>,
}

impl TreatmentTable {
    pub fn new() -> Self {
        TreatmentTable {
            values: alloc::vec![Vec::new(); Treatment::COUNT],
        }
    }

    pub fn push(&mut self, treatment: Treatment, rho: f64) {
        self.values[treatment.index() as usize].push(rho);
    }

    pub fn observations(&self, treatment: u8) -> &[f64] {
        &self.values[treatment as usize]
    }

    /// Mean per treatment, failing on the first treatment with no data.
    pub fn means(&self) -> Result<Vec<f64>, StatsError> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| mean(v).ok_or(StatsError::MissingTreatment(i as u8)))
            .collect()
    }
}

/// Restrict the analysis to treatments where `factor` sits at `level`
/// (for messaging, `High` stands for gauge).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub factor: Factor,
    pub level: Level,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorComparison {
    pub factor: Factor,
    /// Per-treatment mean ρ at the factor's low (verbal) level.
    pub low_values: Vec<f64>,
    pub high_values: Vec<f64>,
    pub low_mean: f64,
    pub high_mean: f64,
    /// Low group tested against high group.
    pub test: RankTestResult,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub condition: Option<Condition>,
    pub alpha: f64,
    pub comparisons: Vec<FactorComparison>,
}

impl SensitivityReport {
    pub fn significant_factors(&self) -> Vec<Factor> {
        self.comparisons.iter().filter(|c| c.significant).map(|c| c.factor).collect()
    }

    pub fn comparison(&self, factor: Factor) -> Option<&FactorComparison> {
        self.comparisons.iter().find(|c| c.factor == factor)
    }
}

/// Compare per-treatment mean ρ between the two levels of every factor:
/// 16 treatments per side, or 8 when conditioned on another factor's level.
pub fn sensitivity(table: &TreatmentTable, condition: Option<Condition>, alpha: f64) -> Result<SensitivityReport, StatsError> {
    let means = table.means()?;
    let keep = |t: &Treatment| match condition {
        None => true,
        Some(c) => t.is_high(c.factor) == (c.level == Level::High),
    };
    let mut comparisons = Vec::new();
    for factor in Factor::ALL {
        if condition.is_some_and(|c| c.factor == factor) {
            continue;
        }
        let (mut low, mut high) = (Vec::new(), Vec::new());
        for t in Treatment::all().filter(keep) {
            let m = means[t.index() as usize];
            if t.is_high(factor) {
                high.push(m);
            } else {
                low.push(m);
            }
        }
        let test = mann_whitney(&low, &high)?;
        comparisons.push(FactorComparison {
            factor,
            low_mean: mean(&low).unwrap_or(0.0),
            high_mean: mean(&high).unwrap_or(0.0),
            low_values: low,
            high_values: high,
            significant: test.p_two_sided < alpha,
            test,
        });
    }
    Ok(SensitivityReport { condition, alpha, comparisons })
}
