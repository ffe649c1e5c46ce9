use std::collections::BTreeMap;
use std::io::BufRead;

use thiserror::Error;

use super::record::{LotEventRecord, RecordKind};
use super::view::LotView;
use crate::lot::available_count;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("lot {lot_id}: expected record_seq {expected}, found {found}")]
    GapDetected {
        lot_id: u8,
        expected: u64,
        found: u64,
    },
    #[error("line {line}: corrupt record: {reason}")]
    CorruptRecord { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(String),
}

impl ReplayError {
    pub fn name(&self) -> &'static str {
        match self {
            ReplayError::GapDetected { .. } => "GapDetected",
            ReplayError::CorruptRecord { .. } => "CorruptRecord",
            ReplayError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone)]
struct Folded {
    view: LotView,
    next_seq: u64,
    reported_available: usize,
}

impl Folded {
    fn new(view: LotView) -> Self {
        Folded {
            reported_available: view.snapshot.available(),
            view,
            next_seq: 1,
        }
    }
}

/// Rebuilds lot views by folding event records in order.
///
/// Each change record is checked against the state folded so far (the
/// `from` side has to match), so a log that was edited or reordered is
/// reported as corrupt rather than silently producing a wrong view.
#[derive(Debug, Clone, Default)]
pub struct Replayer {
    lots: BTreeMap<u8, Folded>,
    line: usize,
}

impl Replayer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from configured lots: all vacant, barrier closed, offline.
    pub fn with_lots(lots: &[(u8, usize)]) -> Self {
        let mut r = Replayer::new();
        for &(lot_id, slot_count) in lots {
            r.lots
                .insert(lot_id, Folded::new(LotView::initial(lot_id, slot_count)));
        }
        r
    }

    pub fn views(&self) -> BTreeMap<u8, LotView> {
        self.lots
            .iter()
            .map(|(&id, f)| (id, f.view.clone()))
            .collect()
    }

    pub fn view(&self, lot_id: u8) -> Option<&LotView> {
        self.lots.get(&lot_id).map(|f| &f.view)
    }

    fn corrupt(&self, reason: impl Into<String>) -> ReplayError {
        ReplayError::CorruptRecord {
            line: self.line,
            reason: reason.into(),
        }
    }

    pub fn apply_line(&mut self, text: &str) -> Result<(), ReplayError> {
        self.line += 1;
        let record = LotEventRecord::from_json_line(text).map_err(|e| self.corrupt(e.0))?;
        self.fold(&record)
    }

    pub fn apply(&mut self, record: &LotEventRecord) -> Result<(), ReplayError> {
        self.line += 1;
        self.fold(record)
    }

    fn fold(&mut self, r: &LotEventRecord) -> Result<(), ReplayError> {
        if let RecordKind::LotRegistered { slot_count } = r.kind {
            if slot_count == 0 || slot_count > crate::lot::MAX_SLOTS {
                return Err(self.corrupt(format!("slot_count {slot_count} out of range")));
            }
            let expected = self.lots.get(&r.lot_id).map_or(1, |f| f.next_seq);
            if r.record_seq != expected {
                return Err(ReplayError::GapDetected {
                    lot_id: r.lot_id,
                    expected,
                    found: r.record_seq,
                });
            }
            let mut f = Folded::new(LotView::initial(r.lot_id, slot_count));
            f.next_seq = expected + 1;
            self.lots.insert(r.lot_id, f);
            return Ok(());
        }

        let line = self.line;
        let corrupt = |reason: String| ReplayError::CorruptRecord { line, reason };
        let Some(f) = self.lots.get_mut(&r.lot_id) else {
            return Err(corrupt(format!("record for unregistered lot {}", r.lot_id)));
        };
        if r.record_seq != f.next_seq {
            return Err(ReplayError::GapDetected {
                lot_id: r.lot_id,
                expected: f.next_seq,
                found: r.record_seq,
            });
        }
        let n = f.view.snapshot.slot_count();
        match r.kind {
            RecordKind::SlotChanged { slot, from, to } => {
                if slot.index() > n {
                    return Err(corrupt(format!("slot {slot} beyond lot size {n}")));
                }
                let current = f.view.snapshot.status(slot);
                if current != from {
                    return Err(corrupt(format!(
                        "slot {slot} is {current:?}, record says {from:?}"
                    )));
                }
                f.view.snapshot = f.view.snapshot.clone().with_status(slot, to);
            }
            RecordKind::BarrierChanged { from, to } => {
                let current = f.view.snapshot.barrier();
                if current != from {
                    return Err(corrupt(format!("barrier is {current}, record says {from}")));
                }
                f.view.snapshot = f.view.snapshot.clone().with_barrier(to);
            }
            RecordKind::AvailabilityChanged { from, to } => {
                if f.reported_available != from {
                    return Err(corrupt(format!(
                        "availability was {}, record says {from}",
                        f.reported_available
                    )));
                }
                let derived = available_count(f.view.snapshot.statuses());
                if derived != to {
                    return Err(corrupt(format!(
                        "availability {to} disagrees with slot states ({derived})"
                    )));
                }
                f.reported_available = to;
            }
            RecordKind::HeartbeatMissed => f.view.online = false,
            RecordKind::HeartbeatResumed => f.view.online = true,
            RecordKind::VehicleParked { slot, .. } | RecordKind::VehicleDeparted { slot, .. }
                if slot.index() > n =>
            {
                return Err(corrupt(format!("slot {slot} beyond lot size {n}")));
            }
            _ => {}
        }
        if r.kind.is_state_change() {
            let src = r
                .source
                .ok_or_else(|| corrupt("state change without source frame".into()))?;
            f.view.snapshot = f.view.snapshot.clone().with_frame(src.seq, src.tick_ms);
            f.view.updated_at_ms = r.received_at_ms;
        }
        f.next_seq += 1;
        Ok(())
    }
}

pub fn replay<'a>(
    records: impl IntoIterator<Item = &'a LotEventRecord>,
    configured: &[(u8, usize)],
) -> Result<BTreeMap<u8, LotView>, ReplayError> {
    let mut r = Replayer::with_lots(configured);
    for rec in records {
        r.apply(rec)?;
    }
    Ok(r.views())
}

/// Replays a JSON Lines log. Errors carry the 1-based line number.
pub fn replay_jsonl(
    reader: impl BufRead,
    configured: &[(u8, usize)],
) -> Result<BTreeMap<u8, LotView>, ReplayError> {
    let mut r = Replayer::with_lots(configured);
    for line in reader.lines() {
        let line = line.map_err(|e| ReplayError::Io(e.to_string()))?;
        r.apply_line(&line)?;
    }
    Ok(r.views())
}

/// Parses a JSON Lines log into records without folding it.
pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<LotEventRecord>, ReplayError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ReplayError::Io(e.to_string()))?;
        out.push(LotEventRecord::from_json_line(&line).map_err(|e| {
            ReplayError::CorruptRecord {
                line: i + 1,
                reason: e.0,
            }
        })?);
    }
    Ok(out)
}
