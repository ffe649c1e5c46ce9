//! Domain types shared by the controller, the simulator, the wire codec and
//! the hub, plus the occupancy arithmetic every display and report uses.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest lot a single controller (and one telemetry frame) can describe.
pub const MAX_SLOTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("slot_count must be in 1..={MAX_SLOTS}, got {0}")]
    SlotCount(usize),
    #[error("debounce_k must be at least 1")]
    Debounce,
    #[error("{0} must be greater than zero")]
    ZeroDuration(&'static str),
    #[error("slot index {index} outside 1..={slot_count}")]
    SlotIndex { index: usize, slot_count: usize },
}

/// 1-based slot number as painted on the bay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotId(u8);

impl SlotId {
    pub fn new(index: usize, slot_count: usize) -> Result<Self, ConfigError> {
        if index == 0 || index > slot_count || index > MAX_SLOTS {
            return Err(ConfigError::SlotIndex { index, slot_count });
        }
        Ok(SlotId(index as u8))
    }

    /// Slot for a 0-based position in a status list.
    pub(crate) fn from_position(pos: usize) -> Self {
        debug_assert!(pos < MAX_SLOTS);
        SlotId(pos as u8 + 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn position(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Occupancy of one slot. `OutOfService` is set by an operator and removes
/// the slot from availability regardless of what its sensor reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SlotStatus {
    #[default]
    Vacant,
    Occupied,
    OutOfService,
}

impl SlotStatus {
    /// Binary occupancy indicator: 1 when a car is detected, 0 otherwise.
    pub fn indicator(self) -> usize {
        matches!(self, SlotStatus::Occupied) as usize
    }

    pub fn label(self) -> &'static str {
        status_label(self)
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "Fill" => Some(SlotStatus::Occupied),
            "Empty" => Some(SlotStatus::Vacant),
            "Serv" => Some(SlotStatus::OutOfService),
            _ => None,
        }
    }
}

impl Serialize for SlotStatus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for SlotStatus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let label = String::deserialize(d)?;
        SlotStatus::from_label(&label)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown slot status {label:?}")))
    }
}

/// Raw IR reading: 1 when the beam is blocked by a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SensorBit(bool);

impl SensorBit {
    pub const CLEAR: SensorBit = SensorBit(false);
    pub const BLOCKED: SensorBit = SensorBit(true);

    pub fn new(value: u8) -> Option<Self> {
        match value {
            0 => Some(SensorBit(false)),
            1 => Some(SensorBit(true)),
            _ => None,
        }
    }

    pub fn value(self) -> u8 {
        self.0 as u8
    }

    pub fn is_blocked(self) -> bool {
        self.0
    }

    pub fn inverted(self) -> Self {
        SensorBit(!self.0)
    }

    /// Status the bit asserts when it is accepted by the debouncer.
    pub fn status(self) -> SlotStatus {
        if self.0 {
            SlotStatus::Occupied
        } else {
            SlotStatus::Vacant
        }
    }
}

impl From<bool> for SensorBit {
    fn from(b: bool) -> Self {
        SensorBit(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotConfig {
    pub lot_id: u8,
    pub slot_count: usize,
    pub debounce_k: u32,
    pub sample_period_ms: u64,
    pub barrier_open_ms: u64,
    pub barrier_hold_ms: u64,
    pub barrier_close_ms: u64,
    pub heartbeat_ms: u64,
}

impl Default for LotConfig {
    fn default() -> Self {
        LotConfig {
            lot_id: 1,
            slot_count: 4,
            debounce_k: 3,
            sample_period_ms: 100,
            barrier_open_ms: 2000,
            barrier_hold_ms: 8000,
            barrier_close_ms: 2000,
            heartbeat_ms: 5000,
        }
    }
}

impl LotConfig {
    pub fn with_slots(slot_count: usize) -> Self {
        LotConfig {
            slot_count,
            ..LotConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.slot_count == 0 || self.slot_count > MAX_SLOTS {
            return Err(ConfigError::SlotCount(self.slot_count));
        }
        if self.debounce_k == 0 {
            return Err(ConfigError::Debounce);
        }
        for (name, v) in [
            ("sample_period_ms", self.sample_period_ms),
            ("barrier_open_ms", self.barrier_open_ms),
            ("barrier_hold_ms", self.barrier_hold_ms),
            ("barrier_close_ms", self.barrier_close_ms),
            ("heartbeat_ms", self.heartbeat_ms),
        ] {
            if v == 0 {
                return Err(ConfigError::ZeroDuration(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierMotion {
    #[default]
    Closed,
    Opening,
    Open,
    Closing,
}

impl BarrierMotion {
    pub fn code(self) -> u8 {
        match self {
            BarrierMotion::Closed => 0,
            BarrierMotion::Opening => 1,
            BarrierMotion::Open => 2,
            BarrierMotion::Closing => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => BarrierMotion::Closed,
            1 => BarrierMotion::Opening,
            2 => BarrierMotion::Open,
            3 => BarrierMotion::Closing,
            _ => return None,
        })
    }

    /// True while a vehicle could pass or is being let through.
    pub fn admits(self) -> bool {
        matches!(self, BarrierMotion::Opening | BarrierMotion::Open)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideMode {
    #[default]
    Auto,
    ForcedOpen,
    ForcedClosed,
}

impl OverrideMode {
    pub fn code(self) -> u8 {
        match self {
            OverrideMode::Auto => 0,
            OverrideMode::ForcedOpen => 1,
            OverrideMode::ForcedClosed => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => OverrideMode::Auto,
            1 => OverrideMode::ForcedOpen,
            2 => OverrideMode::ForcedClosed,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BarrierState {
    pub state: BarrierMotion,
    #[serde(rename = "override")]
    pub override_mode: OverrideMode,
}

impl BarrierState {
    pub fn new(state: BarrierMotion, override_mode: OverrideMode) -> Self {
        BarrierState {
            state,
            override_mode,
        }
    }
}

impl fmt::Display for BarrierState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}/{:?}", self.state, self.override_mode)
    }
}

/// Full lot state at one controller tick.
///
/// Fields are private so that `available` can never drift from `statuses`;
/// build one with [`LotSnapshot::new`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LotSnapshot {
    lot_id: u8,
    tick_ms: u64,
    seq: u16,
    statuses: Vec<SlotStatus>,
    available: usize,
    barrier: BarrierState,
}

impl LotSnapshot {
    pub fn new(
        lot_id: u8,
        tick_ms: u64,
        seq: u16,
        statuses: Vec<SlotStatus>,
        barrier: BarrierState,
    ) -> Self {
        let available = available_count(&statuses);
        LotSnapshot {
            lot_id,
            tick_ms,
            seq,
            statuses,
            available,
            barrier,
        }
    }

    /// All-vacant, closed-barrier state a lot starts in.
    pub fn initial(lot_id: u8, slot_count: usize) -> Self {
        LotSnapshot::new(
            lot_id,
            0,
            0,
            vec![SlotStatus::Vacant; slot_count],
            BarrierState::default(),
        )
    }

    pub fn lot_id(&self) -> u8 {
        self.lot_id
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    pub fn seq(&self) -> u16 {
        self.seq
    }

    pub fn statuses(&self) -> &[SlotStatus] {
        &self.statuses
    }

    pub fn slot_count(&self) -> usize {
        self.statuses.len()
    }

    pub fn status(&self, slot: SlotId) -> SlotStatus {
        self.statuses[slot.position()]
    }

    pub fn available(&self) -> usize {
        self.available
    }

    pub fn occupied(&self) -> usize {
        occupied_total(&self.statuses)
    }

    pub fn out_of_service(&self) -> usize {
        count_status(&self.statuses, SlotStatus::OutOfService)
    }

    pub fn barrier(&self) -> BarrierState {
        self.barrier
    }

    pub fn is_full(&self) -> bool {
        self.available == 0
    }

    pub(crate) fn with_status(mut self, slot: SlotId, status: SlotStatus) -> Self {
        self.statuses[slot.position()] = status;
        self.available = available_count(&self.statuses);
        self
    }

    pub(crate) fn with_barrier(mut self, barrier: BarrierState) -> Self {
        self.barrier = barrier;
        self
    }

    pub(crate) fn with_frame(mut self, seq: u16, tick_ms: u64) -> Self {
        self.seq = seq;
        self.tick_ms = tick_ms;
        self
    }
}

/// Number of occupied slots: the sum of the per-slot 0/1 indicators.
pub fn occupied_total(statuses: &[SlotStatus]) -> usize {
    statuses.iter().map(|s| s.indicator()).sum()
}

/// Number of slots a driver can park in right now.
pub fn available_count(statuses: &[SlotStatus]) -> usize {
    count_status(statuses, SlotStatus::Vacant)
}

pub fn count_status(statuses: &[SlotStatus], which: SlotStatus) -> usize {
    statuses.iter().filter(|&&s| s == which).count()
}

pub fn status_label(status: SlotStatus) -> &'static str {
    match status {
        SlotStatus::Occupied => "Fill",
        SlotStatus::Vacant => "Empty",
        SlotStatus::OutOfService => "Serv",
    }
}
