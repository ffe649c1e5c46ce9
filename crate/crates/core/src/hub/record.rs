//! Persisted event records and their JSON Lines form.
//!
//! One record per line with a flat field set: `record_seq`,
//! `received_at_ms`, `lot_id`, `kind`, then `slot`, `from`, `to`,
//! `source_frame_seq`, `source_tick_ms` and `payload` where the kind uses
//! them.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::lot::{BarrierState, SlotId, SlotStatus, MAX_SLOTS};
use crate::sim::SimEvent;
use crate::wire::{AckStatus, Command};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    /// First record of every lot; fixes its size.
    LotRegistered {
        slot_count: usize,
    },
    SlotChanged {
        slot: SlotId,
        from: SlotStatus,
        to: SlotStatus,
    },
    BarrierChanged {
        from: BarrierState,
        to: BarrierState,
    },
    AvailabilityChanged {
        from: usize,
        to: usize,
    },
    HeartbeatMissed,
    HeartbeatResumed,
    CommandIssued {
        command_id: u16,
        command: Command,
    },
    CommandAcked {
        command_id: u16,
        status: AckStatus,
    },
    VehicleArrived {
        vehicle: u32,
        stay_ms: u64,
    },
    VehicleParked {
        vehicle: u32,
        slot: SlotId,
    },
    VehicleDeparted {
        vehicle: u32,
        slot: SlotId,
    },
    EntryDenied {
        vehicle: u32,
    },
    VehicleBalked {
        vehicle: u32,
    },
    SimFinished {
        horizon_ms: u64,
        slot_count: usize,
    },
}

impl RecordKind {
    pub fn name(&self) -> &'static str {
        match self {
            RecordKind::LotRegistered { .. } => "lot_registered",
            RecordKind::SlotChanged { .. } => "slot_changed",
            RecordKind::BarrierChanged { .. } => "barrier_changed",
            RecordKind::AvailabilityChanged { .. } => "availability_changed",
            RecordKind::HeartbeatMissed => "heartbeat_missed",
            RecordKind::HeartbeatResumed => "heartbeat_resumed",
            RecordKind::CommandIssued { .. } => "command_issued",
            RecordKind::CommandAcked { .. } => "command_acked",
            RecordKind::VehicleArrived { .. } => "vehicle_arrived",
            RecordKind::VehicleParked { .. } => "vehicle_parked",
            RecordKind::VehicleDeparted { .. } => "vehicle_departed",
            RecordKind::EntryDenied { .. } => "entry_denied",
            RecordKind::VehicleBalked { .. } => "vehicle_balked",
            RecordKind::SimFinished { .. } => "sim_finished",
        }
    }

    /// Records that move the lot's occupancy or barrier state.
    pub fn is_state_change(&self) -> bool {
        matches!(
            self,
            RecordKind::SlotChanged { .. }
                | RecordKind::BarrierChanged { .. }
                | RecordKind::AvailabilityChanged { .. }
        )
    }
}

impl From<SimEvent> for RecordKind {
    fn from(e: SimEvent) -> Self {
        match e {
            SimEvent::Arrived { vehicle, stay_ms } => {
                RecordKind::VehicleArrived { vehicle, stay_ms }
            }
            SimEvent::Parked { vehicle, slot } => RecordKind::VehicleParked { vehicle, slot },
            SimEvent::Departed { vehicle, slot } => RecordKind::VehicleDeparted { vehicle, slot },
            SimEvent::Denied { vehicle } => RecordKind::EntryDenied { vehicle },
            SimEvent::Balked { vehicle } => RecordKind::VehicleBalked { vehicle },
        }
    }
}

/// Frame a record was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameRef {
    pub seq: u16,
    pub tick_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LotEventRecord {
    pub record_seq: u64,
    pub received_at_ms: u64,
    pub lot_id: u8,
    pub kind: RecordKind,
    pub source: Option<FrameRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct RecordFormatError(pub String);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    record_seq: u64,
    received_at_ms: u64,
    lot_id: u8,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_frame_seq: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_tick_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload: Option<Value>,
}

fn err(msg: impl Into<String>) -> RecordFormatError {
    RecordFormatError(msg.into())
}

fn field<T: serde::de::DeserializeOwned>(
    v: Option<&Value>,
    name: &str,
) -> Result<T, RecordFormatError> {
    let v = v.ok_or_else(|| err(format!("missing {name}")))?;
    serde_json::from_value(v.clone()).map_err(|e| err(format!("bad {name}: {e}")))
}

fn slot_of(line: &RecordLine) -> Result<SlotId, RecordFormatError> {
    let index = line.slot.ok_or_else(|| err("missing slot"))?;
    SlotId::new(index, MAX_SLOTS).map_err(|e| err(e.to_string()))
}

impl RecordLine {
    fn payload(&self, key: &str) -> Option<&Value> {
        self.payload.as_ref().and_then(|p| p.get(key))
    }
}

impl Serialize for LotEventRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut line = RecordLine {
            record_seq: self.record_seq,
            received_at_ms: self.received_at_ms,
            lot_id: self.lot_id,
            kind: self.kind.name().to_string(),
            slot: None,
            from: None,
            to: None,
            source_frame_seq: self.source.map(|f| f.seq),
            source_tick_ms: self.source.map(|f| f.tick_ms),
            payload: None,
        };
        match self.kind {
            RecordKind::LotRegistered { slot_count } => {
                line.payload = Some(json!({ "slot_count": slot_count }))
            }
            RecordKind::SlotChanged { slot, from, to } => {
                line.slot = Some(slot.index());
                line.from = Some(json!(from));
                line.to = Some(json!(to));
            }
            RecordKind::BarrierChanged { from, to } => {
                line.from = Some(json!(from));
                line.to = Some(json!(to));
            }
            RecordKind::AvailabilityChanged { from, to } => {
                line.from = Some(json!(from));
                line.to = Some(json!(to));
            }
            RecordKind::HeartbeatMissed | RecordKind::HeartbeatResumed => {}
            RecordKind::CommandIssued {
                command_id,
                command,
            } => line.payload = Some(json!({ "command_id": command_id, "command": command })),
            RecordKind::CommandAcked { command_id, status } => {
                line.payload = Some(json!({ "command_id": command_id, "status": status }))
            }
            RecordKind::VehicleArrived { vehicle, stay_ms } => {
                line.payload = Some(json!({ "vehicle": vehicle, "stay_ms": stay_ms }))
            }
            RecordKind::VehicleParked { vehicle, slot }
            | RecordKind::VehicleDeparted { vehicle, slot } => {
                line.slot = Some(slot.index());
                line.payload = Some(json!({ "vehicle": vehicle }));
            }
            RecordKind::EntryDenied { vehicle } | RecordKind::VehicleBalked { vehicle } => {
                line.payload = Some(json!({ "vehicle": vehicle }))
            }
            RecordKind::SimFinished {
                horizon_ms,
                slot_count,
            } => line.payload = Some(json!({ "horizon_ms": horizon_ms, "slot_count": slot_count })),
        }
        line.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LotEventRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let line = RecordLine::deserialize(d)?;
        LotEventRecord::from_line(line).map_err(serde::de::Error::custom)
    }
}

impl LotEventRecord {
    fn from_line(line: RecordLine) -> Result<Self, RecordFormatError> {
        let kind = match line.kind.as_str() {
            "lot_registered" => RecordKind::LotRegistered {
                slot_count: field(line.payload("slot_count"), "slot_count")?,
            },
            "slot_changed" => RecordKind::SlotChanged {
                slot: slot_of(&line)?,
                from: field(line.from.as_ref(), "from")?,
                to: field(line.to.as_ref(), "to")?,
            },
            "barrier_changed" => RecordKind::BarrierChanged {
                from: field(line.from.as_ref(), "from")?,
                to: field(line.to.as_ref(), "to")?,
            },
            "availability_changed" => RecordKind::AvailabilityChanged {
                from: field(line.from.as_ref(), "from")?,
                to: field(line.to.as_ref(), "to")?,
            },
            "heartbeat_missed" => RecordKind::HeartbeatMissed,
            "heartbeat_resumed" => RecordKind::HeartbeatResumed,
            "command_issued" => RecordKind::CommandIssued {
                command_id: field(line.payload("command_id"), "command_id")?,
                command: field(line.payload("command"), "command")?,
            },
            "command_acked" => RecordKind::CommandAcked {
                command_id: field(line.payload("command_id"), "command_id")?,
                status: field(line.payload("status"), "status")?,
            },
            "vehicle_arrived" => RecordKind::VehicleArrived {
                vehicle: field(line.payload("vehicle"), "vehicle")?,
                stay_ms: field(line.payload("stay_ms"), "stay_ms")?,
            },
            "vehicle_parked" => RecordKind::VehicleParked {
                vehicle: field(line.payload("vehicle"), "vehicle")?,
                slot: slot_of(&line)?,
            },
            "vehicle_departed" => RecordKind::VehicleDeparted {
                vehicle: field(line.payload("vehicle"), "vehicle")?,
                slot: slot_of(&line)?,
            },
            "entry_denied" => RecordKind::EntryDenied {
                vehicle: field(line.payload("vehicle"), "vehicle")?,
            },
            "vehicle_balked" => RecordKind::VehicleBalked {
                vehicle: field(line.payload("vehicle"), "vehicle")?,
            },
            "sim_finished" => RecordKind::SimFinished {
                horizon_ms: field(line.payload("horizon_ms"), "horizon_ms")?,
                slot_count: field(line.payload("slot_count"), "slot_count")?,
            },
            other => return Err(err(format!("unknown record kind {other:?}"))),
        };
        if let RecordKind::SlotChanged { from, to, .. } = kind {
            if from == to {
                return Err(err("slot_changed with from == to"));
            }
        }
        if let RecordKind::BarrierChanged { from, to } = kind {
            if from == to {
                return Err(err("barrier_changed with from == to"));
            }
        }
        if let RecordKind::AvailabilityChanged { from, to } = kind {
            if from == to {
                return Err(err("availability_changed with from == to"));
            }
        }
        let source = match (line.source_frame_seq, line.source_tick_ms) {
            (Some(seq), Some(tick_ms)) => Some(FrameRef { seq, tick_ms }),
            (None, None) => None,
            _ => {
                return Err(err(
                    "source_frame_seq and source_tick_ms must appear together",
                ))
            }
        };
        Ok(LotEventRecord {
            record_seq: line.record_seq,
            received_at_ms: line.received_at_ms,
            lot_id: line.lot_id,
            kind,
            source,
        })
    }

    /// One JSON Lines line, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self, RecordFormatError> {
        serde_json::from_str(line).map_err(|e| err(e.to_string()))
    }
}

/// Serialises records as JSON Lines, `\n` after every record.
pub fn to_jsonl(records: &[LotEventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lot::{BarrierMotion, OverrideMode};
    use proptest::prelude::*;

    fn slot(i: usize) -> SlotId {
        SlotId::new(i, 64).unwrap()
    }

    fn samples() -> Vec<RecordKind> {
        vec![
            RecordKind::LotRegistered { slot_count: 4 },
            RecordKind::SlotChanged {
                slot: slot(2),
                from: SlotStatus::Vacant,
                to: SlotStatus::Occupied,
            },
            RecordKind::BarrierChanged {
                from: BarrierState::default(),
                to: BarrierState::new(BarrierMotion::Opening, OverrideMode::ForcedOpen),
            },
            RecordKind::AvailabilityChanged { from: 4, to: 3 },
            RecordKind::HeartbeatMissed,
            RecordKind::HeartbeatResumed,
            RecordKind::CommandIssued {
                command_id: 7,
                command: Command::SlotService {
                    slot: 2,
                    out_of_service: true,
                },
            },
            RecordKind::CommandAcked {
                command_id: 7,
                status: AckStatus::Applied,
            },
            RecordKind::VehicleArrived {
                vehicle: 3,
                stay_ms: 1000,
            },
            RecordKind::VehicleParked {
                vehicle: 3,
                slot: slot(1),
            },
            RecordKind::VehicleDeparted {
                vehicle: 3,
                slot: slot(1),
            },
            RecordKind::EntryDenied { vehicle: 4 },
            RecordKind::VehicleBalked { vehicle: 5 },
            RecordKind::SimFinished {
                horizon_ms: 10_000,
                slot_count: 4,
            },
        ]
    }

    #[test]
    fn slot_changed_line_shape() {
        let r = LotEventRecord {
            record_seq: 3,
            received_at_ms: 1200,
            lot_id: 1,
            kind: samples()[1],
            source: Some(FrameRef {
                seq: 5,
                tick_ms: 1200,
            }),
        };
        assert_eq!(
            r.to_json_line(),
            r#"{"record_seq":3,"received_at_ms":1200,"lot_id":1,"kind":"slot_changed","slot":2,"from":"Empty","to":"Fill","source_frame_seq":5,"source_tick_ms":1200}"#
        );
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(LotEventRecord::from_json_line("{").is_err());
        assert!(LotEventRecord::from_json_line(
            r#"{"record_seq":1,"received_at_ms":0,"lot_id":1,"kind":"slot_changed","slot":1,"from":"Empty","to":"Empty"}"#
        )
        .is_err());
        assert!(LotEventRecord::from_json_line(
            r#"{"record_seq":1,"received_at_ms":0,"lot_id":1,"kind":"teleport"}"#
        )
        .is_err());
        assert!(LotEventRecord::from_json_line(
            r#"{"record_seq":1,"received_at_ms":0,"lot_id":1,"kind":"heartbeat_missed","extra":1}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn json_line_roundtrip(
            which in 0usize..14,
            record_seq in any::<u64>(),
            at in any::<u64>(),
            lot in any::<u8>(),
            src in proptest::option::of((any::<u16>(), any::<u64>())),
        ) {
            let r = LotEventRecord {
                record_seq,
                received_at_ms: at,
                lot_id: lot,
                kind: samples()[which],
                source: src.map(|(seq, tick_ms)| FrameRef { seq, tick_ms }),
            };
            let back = LotEventRecord::from_json_line(&r.to_json_line()).unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
