use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rng::SplitMix64;
use crate::lot::SlotId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("arrival_rate must be finite and >= 0, got {0}")]
    ArrivalRate(f64),
    #[error("mean_stay_s must be finite and > 0, got {0}")]
    MeanStay(f64),
    #[error("horizon_ms must be > 0")]
    Horizon,
    #[error("flicker_p must be in [0, 1], got {0}")]
    Flicker(f64),
    #[error("explicit event {index}: {reason}")]
    Event { index: usize, reason: &'static str },
    #[error("invalid scenario file: {0}")]
    Parse(String),
}

/// One scripted arrival in a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledArrival {
    pub at_ms: u64,
    pub stay_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    /// Expected arrivals per second.
    pub arrival_rate: f64,
    pub mean_stay_s: f64,
    pub horizon_ms: u64,
    #[serde(default)]
    pub flicker_p: f64,
    /// When present, replaces the generated arrivals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_events: Option<Vec<ScheduledArrival>>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 42,
            arrival_rate: 0.05,
            mean_stay_s: 600.0,
            horizon_ms: 3_600_000,
            flicker_p: 0.0,
            explicit_events: None,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.arrival_rate.is_finite() || self.arrival_rate < 0.0 {
            return Err(ScenarioError::ArrivalRate(self.arrival_rate));
        }
        if !self.mean_stay_s.is_finite() || self.mean_stay_s <= 0.0 {
            return Err(ScenarioError::MeanStay(self.mean_stay_s));
        }
        if self.horizon_ms == 0 {
            return Err(ScenarioError::Horizon);
        }
        if !(0.0..=1.0).contains(&self.flicker_p) {
            return Err(ScenarioError::Flicker(self.flicker_p));
        }
        for (index, e) in self.explicit_events.iter().flatten().enumerate() {
            if e.at_ms >= self.horizon_ms {
                return Err(ScenarioError::Event {
                    index,
                    reason: "at_ms must be before the horizon",
                });
            }
            if e.stay_ms == 0 {
                return Err(ScenarioError::Event {
                    index,
                    reason: "stay_ms must be > 0",
                });
            }
        }
        Ok(())
    }

    /// The arrivals this scenario drives, sorted by time.
    pub fn events(&self) -> Vec<VehicleEvent> {
        match &self.explicit_events {
            Some(list) => {
                let mut events: Vec<VehicleEvent> = list
                    .iter()
                    .map(|a| VehicleEvent::new(a.at_ms, a.stay_ms))
                    .collect();
                events.sort_by_key(|e| e.at_ms);
                events
            }
            None => generate_scenario_events(
                self.seed,
                self.arrival_rate,
                self.mean_stay_s,
                self.horizon_ms,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleOutcome {
    Parked(SlotId),
    Denied,
    Balked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VehicleEvent {
    pub at_ms: u64,
    pub stay_ms: u64,
    pub outcome: Option<VehicleOutcome>,
}

impl VehicleEvent {
    pub fn new(at_ms: u64, stay_ms: u64) -> Self {
        VehicleEvent {
            at_ms,
            stay_ms,
            outcome: None,
        }
    }
}

/// Poisson arrivals over `[0, horizon_ms)` with exponential stays.
///
/// Draw order per vehicle is fixed: one uniform for the inter-arrival gap,
/// then one for the stay. Arrival times accumulate in seconds and are
/// floored to milliseconds; stays are rounded and at least 1 ms.
pub fn generate_scenario_events(
    seed: u64,
    arrival_rate: f64,
    mean_stay_s: f64,
    horizon_ms: u64,
) -> Vec<VehicleEvent> {
    if arrival_rate <= 0.0 || !arrival_rate.is_finite() {
        return Vec::new();
    }
    let mut rng = SplitMix64::new(seed);
    let mut t_s = 0.0f64;
    let mut events = Vec::new();
    loop {
        t_s += -rng.next_unit().ln() / arrival_rate;
        let stay_ms = (rng.exponential(mean_stay_s) * 1000.0).round().max(1.0) as u64;
        let at_ms = (t_s * 1000.0).floor();
        if at_ms >= horizon_ms as f64 {
            break;
        }
        events.push(VehicleEvent::new(at_ms as u64, stay_ms));
    }
    events
}
