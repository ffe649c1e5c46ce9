use serde::{Deserialize, Serialize};

use crate::lot::{BarrierState, LotSnapshot, SlotStatus};

/// What the hub knows about one lot: the last reported state plus when it
/// last changed and whether the controller is currently heard from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LotView {
    pub snapshot: LotSnapshot,
    pub updated_at_ms: u64,
    pub online: bool,
}

impl LotView {
    pub fn initial(lot_id: u8, slot_count: usize) -> Self {
        LotView {
            snapshot: LotSnapshot::initial(lot_id, slot_count),
            updated_at_ms: 0,
            online: false,
        }
    }

    pub fn summary(&self) -> LotSummary {
        LotSummary {
            lot_id: self.snapshot.lot_id(),
            available: self.snapshot.available(),
            slot_count: self.snapshot.slot_count(),
            online: self.online,
            updated_at_ms: self.updated_at_ms,
        }
    }
}

/// Entry of the lot index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LotSummary {
    pub lot_id: u8,
    pub available: usize,
    pub slot_count: usize,
    pub online: bool,
    pub updated_at_ms: u64,
}

#[derive(Serialize, Deserialize)]
struct SlotJson {
    index: usize,
    status: SlotStatus,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LotViewJson {
    lot_id: u8,
    seq: u16,
    tick_ms: u64,
    slots: Vec<SlotJson>,
    available: usize,
    barrier: BarrierState,
    online: bool,
    updated_at_ms: u64,
}

impl Serialize for LotView {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let snap = &self.snapshot;
        LotViewJson {
            lot_id: snap.lot_id(),
            seq: snap.seq(),
            tick_ms: snap.tick_ms(),
            slots: snap
                .statuses()
                .iter()
                .enumerate()
                .map(|(i, &status)| SlotJson {
                    index: i + 1,
                    status,
                })
                .collect(),
            available: snap.available(),
            barrier: snap.barrier(),
            online: self.online,
            updated_at_ms: self.updated_at_ms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LotView {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = LotViewJson::deserialize(d)?;
        if j.slots.iter().enumerate().any(|(i, s)| s.index != i + 1) {
            return Err(serde::de::Error::custom(
                "slot indices must be 1..=n in order",
            ));
        }
        let snapshot = LotSnapshot::new(
            j.lot_id,
            j.tick_ms,
            j.seq,
            j.slots.into_iter().map(|s| s.status).collect(),
            j.barrier,
        );
        if snapshot.available() != j.available {
            return Err(serde::de::Error::custom("available disagrees with slots"));
        }
        Ok(LotView {
            snapshot,
            updated_at_ms: j.updated_at_ms,
            online: j.online,
        })
    }
}
