//! Run statistics computed from an event log alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hub::{LotEventRecord, RecordKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub occupancy_rate: f64,
    pub arrived_count: u64,
    pub parked_count: u64,
    pub denied_count: u64,
    pub balked_count: u64,
    /// Mean length of the stays that ended before the horizon; 0 if none did.
    pub mean_stay_observed_ms: f64,
    pub slot_occupied_ms: Vec<u64>,
}

impl ReportSummary {
    pub fn empty(slot_count: usize) -> Self {
        ReportSummary {
            occupancy_rate: 0.0,
            arrived_count: 0,
            parked_count: 0,
            denied_count: 0,
            balked_count: 0,
            mean_stay_observed_ms: 0.0,
            slot_occupied_ms: vec![0; slot_count],
        }
    }

    pub fn from_parts(
        horizon_ms: u64,
        arrived_count: u64,
        parked_count: u64,
        denied_count: u64,
        balked_count: u64,
        completed_stays_ms: &[u64],
        slot_occupied_ms: Vec<u64>,
    ) -> Self {
        let capacity = slot_occupied_ms.len() as u64 * horizon_ms;
        let occupied: u64 = slot_occupied_ms.iter().sum();
        let occupancy_rate = if capacity == 0 {
            0.0
        } else {
            occupied as f64 / capacity as f64
        };
        let mean_stay_observed_ms = if completed_stays_ms.is_empty() {
            0.0
        } else {
            completed_stays_ms.iter().sum::<u64>() as f64 / completed_stays_ms.len() as f64
        };
        ReportSummary {
            occupancy_rate,
            arrived_count,
            parked_count,
            denied_count,
            balked_count,
            mean_stay_observed_ms,
            slot_occupied_ms,
        }
    }

    /// Plain-text table for humans.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "occupancy rate      {:>12.4}", self.occupancy_rate);
        let _ = writeln!(s, "arrived             {:>12}", self.arrived_count);
        let _ = writeln!(s, "parked              {:>12}", self.parked_count);
        let _ = writeln!(s, "denied              {:>12}", self.denied_count);
        let _ = writeln!(s, "balked              {:>12}", self.balked_count);
        let _ = writeln!(
            s,
            "mean stay (ms)      {:>12.1}",
            self.mean_stay_observed_ms
        );
        for (i, ms) in self.slot_occupied_ms.iter().enumerate() {
            let _ = writeln!(s, "slot {:<2} occupied ms {:>12}", i + 1, ms);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("log holds several lots ({0:?}); choose one")]
    AmbiguousLot(Vec<u8>),
    #[error("lot {0} does not appear in the log")]
    UnknownLot(u8),
}

/// Summary for one lot of a log. With `lot_id` unset the log must hold at
/// most one lot.
pub fn summarize_log(
    records: &[LotEventRecord],
    lot_id: Option<u8>,
) -> Result<ReportSummary, ReportError> {
    let lots: Vec<u8> = records
        .iter()
        .map(|r| r.lot_id)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let lot = match (lot_id, lots.as_slice()) {
        (Some(id), _) if lots.contains(&id) => id,
        (Some(id), _) => return Err(ReportError::UnknownLot(id)),
        (None, []) => return Ok(ReportSummary::empty(0)),
        (None, [id]) => *id,
        (None, _) => return Err(ReportError::AmbiguousLot(lots)),
    };
    let mine: Vec<LotEventRecord> = records
        .iter()
        .filter(|r| r.lot_id == lot)
        .cloned()
        .collect();
    Ok(summarize(&mine))
}

/// Summary of a single lot's records. The horizon comes from the closing
/// `sim_finished` record, or the last receipt time when there is none.
pub fn summarize(records: &[LotEventRecord]) -> ReportSummary {
    let mut slot_count = 0usize;
    let mut horizon_ms = records.last().map_or(0, |r| r.received_at_ms);
    let mut arrived = 0;
    let mut parked = 0;
    let mut denied = 0;
    let mut balked = 0;
    let mut since: BTreeMap<usize, u64> = BTreeMap::new();
    let mut stays = Vec::new();
    let mut slot_ms: Vec<u64> = Vec::new();

    let grow = |v: &mut Vec<u64>, n: usize| {
        if v.len() < n {
            v.resize(n, 0);
        }
    };

    for r in records {
        match r.kind {
            RecordKind::LotRegistered { slot_count: n } => {
                slot_count = n;
                grow(&mut slot_ms, n);
            }
            RecordKind::SimFinished {
                horizon_ms: h,
                slot_count: n,
            } => {
                horizon_ms = h;
                slot_count = n;
                grow(&mut slot_ms, n);
            }
            RecordKind::VehicleArrived { .. } => arrived += 1,
            RecordKind::VehicleParked { slot, .. } => {
                parked += 1;
                since.insert(slot.position(), r.received_at_ms);
                grow(&mut slot_ms, slot.index());
            }
            RecordKind::VehicleDeparted { slot, .. } => {
                if let Some(t0) = since.remove(&slot.position()) {
                    let stayed = r.received_at_ms.saturating_sub(t0);
                    grow(&mut slot_ms, slot.index());
                    slot_ms[slot.position()] += stayed;
                    stays.push(stayed);
                }
            }
            RecordKind::EntryDenied { .. } => denied += 1,
            RecordKind::VehicleBalked { .. } => balked += 1,
            _ => {}
        }
    }
    for (pos, t0) in since {
        slot_ms[pos] += horizon_ms.saturating_sub(t0);
    }
    grow(&mut slot_ms, slot_count);

    ReportSummary::from_parts(horizon_ms, arrived, parked, denied, balked, &stays, slot_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lot::SlotId;

    fn rec(seq: u64, at: u64, kind: RecordKind) -> LotEventRecord {
        LotEventRecord {
            record_seq: seq,
            received_at_ms: at,
            lot_id: 1,
            kind,
            source: None,
        }
    }

    #[test]
    fn empty_log_is_all_zero() {
        let s = summarize(&[]);
        assert_eq!(s, ReportSummary::empty(0));
        assert_eq!(summarize_log(&[], None).unwrap(), ReportSummary::empty(0));
    }

    #[test]
    fn one_car_half_the_horizon() {
        let slot = SlotId::new(1, 4).unwrap();
        let log = [
            rec(1, 0, RecordKind::LotRegistered { slot_count: 4 }),
            rec(
                2,
                0,
                RecordKind::VehicleArrived {
                    vehicle: 0,
                    stay_ms: 50_000,
                },
            ),
            rec(3, 0, RecordKind::VehicleParked { vehicle: 0, slot }),
            rec(4, 50_000, RecordKind::VehicleDeparted { vehicle: 0, slot }),
            rec(
                5,
                100_000,
                RecordKind::SimFinished {
                    horizon_ms: 100_000,
                    slot_count: 4,
                },
            ),
        ];
        let s = summarize(&log);
        assert_eq!(s.occupancy_rate, 0.125);
        assert_eq!(s.mean_stay_observed_ms, 50_000.0);
        assert_eq!(s.slot_occupied_ms, vec![50_000, 0, 0, 0]);
        assert_eq!((s.arrived_count, s.parked_count), (1, 1));
    }

    #[test]
    fn open_stays_count_to_horizon() {
        let slot = SlotId::new(2, 2).unwrap();
        let log = [
            rec(1, 0, RecordKind::LotRegistered { slot_count: 2 }),
            rec(2, 10, RecordKind::VehicleParked { vehicle: 0, slot }),
            rec(
                3,
                110,
                RecordKind::SimFinished {
                    horizon_ms: 110,
                    slot_count: 2,
                },
            ),
        ];
        let s = summarize(&log);
        assert_eq!(s.slot_occupied_ms, vec![0, 100]);
        assert_eq!(s.mean_stay_observed_ms, 0.0);
    }

    #[test]
    fn multi_lot_logs_need_a_choice() {
        let mut b = rec(1, 0, RecordKind::LotRegistered { slot_count: 4 });
        b.lot_id = 2;
        let log = [rec(1, 0, RecordKind::LotRegistered { slot_count: 4 }), b];
        assert_eq!(
            summarize_log(&log, None),
            Err(ReportError::AmbiguousLot(vec![1, 2]))
        );
        assert_eq!(
            summarize_log(&log, Some(3)),
            Err(ReportError::UnknownLot(3))
        );
        assert!(summarize_log(&log, Some(2)).is_ok());
    }
}
