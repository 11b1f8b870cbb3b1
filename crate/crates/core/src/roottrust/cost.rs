//! Cost of rewriting chain history back to a given depth.

use chrono::TimeDelta;
use serde::{Deserialize, Serialize};

/// Attack cost scales linearly in elapsed time and in the ratio of the
/// current network hash rate to the reference rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttackCostModel {
    /// EH/s at which `reference_cost_rate` was measured.
    pub reference_hash_rate: f64,
    /// USD per hour at the reference hash rate.
    pub reference_cost_rate: f64,
    /// EH/s.
    pub current_hash_rate: f64,
}

impl Default for AttackCostModel {
    fn default() -> Self {
        AttackCostModel {
            reference_hash_rate: 300.0,
            reference_cost_rate: 700_000.0,
            current_hash_rate: 300.0,
        }
    }
}

impl AttackCostModel {
    pub fn at_hash_rate(current_hash_rate: f64) -> Self {
        AttackCostModel {
            current_hash_rate,
            ..Self::default()
        }
    }

    fn usd_per_hour(&self) -> f64 {
        self.reference_cost_rate * (self.current_hash_rate / self.reference_hash_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("elapsed time is negative")]
    NegativeDuration,
    #[error("target cost must be positive and finite")]
    NonPositiveCost,
}

fn seconds(d: TimeDelta) -> f64 {
    d.num_seconds() as f64 + f64::from(d.subsec_nanos()) * 1e-9
}

/// USD cost of rewriting `elapsed` worth of chain history.
pub fn attack_cost(elapsed: TimeDelta, model: &AttackCostModel) -> Result<f64, CostError> {
    if elapsed < TimeDelta::zero() {
        return Err(CostError::NegativeDuration);
    }
    Ok(seconds(elapsed) * model.usd_per_hour() / 3600.0)
}

/// Waiting period after which rewriting history costs `target_cost` USD,
/// rounded to the nearest second.
pub fn waiting_period(target_cost: f64, model: &AttackCostModel) -> Result<TimeDelta, CostError> {
    if !(target_cost.is_finite() && target_cost > 0.0) {
        return Err(CostError::NonPositiveCost);
    }
    let secs = (target_cost * 3600.0 / model.usd_per_hour()).round();
    Ok(TimeDelta::seconds(secs as i64))
}
