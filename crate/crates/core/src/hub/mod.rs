//! Central hub: ingests controller frames, keeps one view per lot, appends
//! every observed change to an event log, and relays operator commands.
//!
//! Ingestion for a lot is serialised by that lot's mutex; readers clone the
//! view under the same lock, so a view is never torn. Records are written
//! to the persistent sink before the in-memory view moves, and a failed
//! write leaves the view untouched.

pub mod http;
mod record;
mod replay;
mod seq;
pub mod tcp;
mod view;

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, RwLock};

use thiserror::Error;
use tokio::sync::broadcast;

pub use record::{to_jsonl, FrameRef, LotEventRecord, RecordFormatError, RecordKind};
pub use replay::{read_jsonl, replay, replay_jsonl, ReplayError, Replayer};
pub use seq::{SeqTracker, SeqVerdict, DEFAULT_SEQ_WINDOW};
pub use view::{LotSummary, LotView};

use crate::lot::{LotSnapshot, SlotId, MAX_SLOTS};
use crate::sim::SimControl;
use crate::wire::{self, Command, DecodeError, Frame, FrameBody};

pub const MAX_HISTORY_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HubConfig {
    pub heartbeat_ms: u64,
    /// A controller is offline after this many silent heartbeat intervals.
    pub liveness_factor: u64,
    pub seq_window: u16,
    pub subscriber_buffer: usize,
}

impl Default for HubConfig {
    fn default() -> Self {
        HubConfig {
            heartbeat_ms: 5000,
            liveness_factor: 3,
            seq_window: DEFAULT_SEQ_WINDOW,
            subscriber_buffer: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HubError {
    #[error("unknown lot {0}")]
    UnknownLot(u8),
    #[error("lot {0} is already registered")]
    AlreadyRegistered(u8),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("event log write failed: {0}")]
    Persist(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestResult {
    Accepted(Vec<LotEventRecord>),
    Duplicate,
    Stale,
    /// Decoded fine but cannot be applied (unknown lot, wrong lot size, a
    /// frame type the hub does not take from devices).
    Rejected(String),
    Error(DecodeError),
}

impl IngestResult {
    pub fn records(&self) -> &[LotEventRecord] {
        match self {
            IngestResult::Accepted(r) => r,
            _ => &[],
        }
    }
}

#[derive(Debug, Default)]
struct Metrics {
    accepted: AtomicU64,
    duplicate: AtomicU64,
    stale: AtomicU64,
    rejected: AtomicU64,
    decode_errors: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestMetrics {
    pub accepted: u64,
    pub duplicate: u64,
    pub stale: u64,
    pub rejected: u64,
    pub decode_errors: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubscriptionError {
    #[error("subscriber fell more than the buffer behind; {missed} records dropped")]
    Overflow { missed: u64 },
    #[error("hub closed")]
    Closed,
}

/// Live feed of one lot's records, in append order.
pub struct Subscription {
    lot_id: u8,
    rx: broadcast::Receiver<LotEventRecord>,
    overflowed: Option<u64>,
}

impl Subscription {
    pub fn lot_id(&self) -> u8 {
        self.lot_id
    }

    fn map(
        &mut self,
        r: Result<LotEventRecord, broadcast::error::RecvError>,
    ) -> Result<LotEventRecord, SubscriptionError> {
        match r {
            Ok(rec) => Ok(rec),
            Err(broadcast::error::RecvError::Lagged(missed)) => {
                self.overflowed = Some(missed);
                Err(SubscriptionError::Overflow { missed })
            }
            Err(broadcast::error::RecvError::Closed) => Err(SubscriptionError::Closed),
        }
    }

    pub async fn recv(&mut self) -> Result<LotEventRecord, SubscriptionError> {
        if let Some(missed) = self.overflowed {
            return Err(SubscriptionError::Overflow { missed });
        }
        let r = self.rx.recv().await;
        self.map(r)
    }

    /// Next buffered record, if any. Never blocks.
    pub fn try_recv(&mut self) -> Result<Option<LotEventRecord>, SubscriptionError> {
        if let Some(missed) = self.overflowed {
            return Err(SubscriptionError::Overflow { missed });
        }
        match self.rx.try_recv() {
            Ok(rec) => Ok(Some(rec)),
            Err(broadcast::error::TryRecvError::Empty) => Ok(None),
            Err(broadcast::error::TryRecvError::Lagged(missed)) => {
                self.overflowed = Some(missed);
                Err(SubscriptionError::Overflow { missed })
            }
            Err(broadcast::error::TryRecvError::Closed) => Err(SubscriptionError::Closed),
        }
    }

    /// Blocking receive for non-async callers. Must not be called from
    /// inside a tokio runtime.
    pub fn blocking_recv(&mut self) -> Result<LotEventRecord, SubscriptionError> {
        if let Some(missed) = self.overflowed {
            return Err(SubscriptionError::Overflow { missed });
        }
        let r = self.rx.blocking_recv();
        self.map(r)
    }
}

struct LotState {
    view: LotView,
    tracker: SeqTracker,
    records: Vec<LotEventRecord>,
    last_heard_ms: Option<u64>,
    outbound: VecDeque<Vec<u8>>,
    pending_commands: BTreeMap<u16, Command>,
    next_command_seq: u16,
    feed: broadcast::Sender<LotEventRecord>,
}

impl LotState {
    fn next_record_seq(&self) -> u64 {
        self.records.len() as u64 + 1
    }
}

struct Inner {
    config: HubConfig,
    lots: RwLock<BTreeMap<u8, Arc<Mutex<LotState>>>>,
    sink: Mutex<Option<Box<dyn Write + Send>>>,
    metrics: Metrics,
    sim_control: Mutex<Option<mpsc::Sender<SimControl>>>,
}

/// Shared handle to the hub; clones refer to the same state.
#[derive(Clone)]
pub struct Hub {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Hub {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hub")
            .field("config", &self.inner.config)
            .field("lots", &self.lot_ids())
            .finish()
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Hub {
    pub fn new(config: HubConfig) -> Self {
        Hub {
            inner: Arc::new(Inner {
                config,
                lots: RwLock::new(BTreeMap::new()),
                sink: Mutex::new(None),
                metrics: Metrics::default(),
                sim_control: Mutex::new(None),
            }),
        }
    }

    /// Hub that also appends every record to `sink` as JSON Lines.
    pub fn with_log(config: HubConfig, sink: Box<dyn Write + Send>) -> Self {
        let hub = Hub::new(config);
        *lock(&hub.inner.sink) = Some(sink);
        hub
    }

    pub fn config(&self) -> &HubConfig {
        &self.inner.config
    }

    pub fn lot_ids(&self) -> Vec<u8> {
        self.read_lots().keys().copied().collect()
    }

    fn read_lots(&self) -> std::sync::RwLockReadGuard<'_, BTreeMap<u8, Arc<Mutex<LotState>>>> {
        self.inner.lots.read().unwrap_or_else(|e| e.into_inner())
    }

    fn lot(&self, lot_id: u8) -> Result<Arc<Mutex<LotState>>, HubError> {
        self.read_lots()
            .get(&lot_id)
            .cloned()
            .ok_or(HubError::UnknownLot(lot_id))
    }

    pub fn set_sim_control(&self, tx: mpsc::Sender<SimControl>) {
        *lock(&self.inner.sim_control) = Some(tx);
    }

    /// Channel into an embedded simulation, when the hub runs one.
    pub fn sim_control(&self) -> Option<mpsc::Sender<SimControl>> {
        lock(&self.inner.sim_control).clone()
    }

    pub fn metrics(&self) -> IngestMetrics {
        let m = &self.inner.metrics;
        IngestMetrics {
            accepted: m.accepted.load(Ordering::Relaxed),
            duplicate: m.duplicate.load(Ordering::Relaxed),
            stale: m.stale.load(Ordering::Relaxed),
            rejected: m.rejected.load(Ordering::Relaxed),
            decode_errors: m.decode_errors.load(Ordering::Relaxed),
        }
    }

    /// Persists, stores and publishes `kinds` as the lot's next records.
    fn commit(
        &self,
        lot: &mut LotState,
        lot_id: u8,
        kinds: Vec<(RecordKind, Option<FrameRef>)>,
        now_ms: u64,
    ) -> Result<Vec<LotEventRecord>, HubError> {
        let first = lot.next_record_seq();
        let records: Vec<LotEventRecord> = kinds
            .into_iter()
            .enumerate()
            .map(|(i, (kind, source))| LotEventRecord {
                record_seq: first + i as u64,
                received_at_ms: now_ms,
                lot_id,
                kind,
                source,
            })
            .collect();
        if records.is_empty() {
            return Ok(records);
        }
        if let Some(sink) = lock(&self.inner.sink).as_mut() {
            let text = to_jsonl(&records);
            sink.write_all(text.as_bytes())
                .and_then(|_| sink.flush())
                .map_err(|e| HubError::Persist(e.to_string()))?;
        }
        for r in &records {
            lot.records.push(r.clone());
            // no subscribers is fine
            let _ = lot.feed.send(r.clone());
        }
        Ok(records)
    }

    /// Adds a lot in its initial state. Appends its `LotRegistered` record.
    pub fn register_lot(&self, lot_id: u8, slot_count: usize, now_ms: u64) -> Result<(), HubError> {
        if slot_count == 0 || slot_count > MAX_SLOTS {
            return Err(HubError::InvalidArgument(format!(
                "slot_count {slot_count} outside 1..={MAX_SLOTS}"
            )));
        }
        let mut lots = self.inner.lots.write().unwrap_or_else(|e| e.into_inner());
        if lots.contains_key(&lot_id) {
            return Err(HubError::AlreadyRegistered(lot_id));
        }
        let (feed, _) = broadcast::channel(self.inner.config.subscriber_buffer.max(1));
        let mut state = LotState {
            view: LotView::initial(lot_id, slot_count),
            tracker: SeqTracker::new(self.inner.config.seq_window),
            records: Vec::new(),
            last_heard_ms: None,
            outbound: VecDeque::new(),
            pending_commands: BTreeMap::new(),
            next_command_seq: 1,
            feed,
        };
        self.commit(
            &mut state,
            lot_id,
            vec![(RecordKind::LotRegistered { slot_count }, None)],
            now_ms,
        )?;
        lots.insert(lot_id, Arc::new(Mutex::new(state)));
        Ok(())
    }

    pub fn lots(&self) -> Vec<LotSummary> {
        self.read_lots()
            .values()
            .map(|l| lock(l).view.summary())
            .collect()
    }

    pub fn snapshot(&self, lot_id: u8) -> Result<LotView, HubError> {
        let lot = self.lot(lot_id)?;
        let view = lock(&lot).view.clone();
        Ok(view)
    }

    /// Records with `record_seq > from_seq`, oldest first, at most `limit`.
    pub fn history(
        &self,
        lot_id: u8,
        from_seq: u64,
        limit: usize,
    ) -> Result<Vec<LotEventRecord>, HubError> {
        if limit == 0 || limit > MAX_HISTORY_LIMIT {
            return Err(HubError::InvalidArgument(format!(
                "limit must be in 1..={MAX_HISTORY_LIMIT}"
            )));
        }
        let lot = self.lot(lot_id)?;
        let lot = lock(&lot);
        let start = (from_seq as usize).min(lot.records.len());
        Ok(lot.records[start..].iter().take(limit).cloned().collect())
    }

    /// Every record of the lot.
    pub fn records(&self, lot_id: u8) -> Result<Vec<LotEventRecord>, HubError> {
        let lot = self.lot(lot_id)?;
        let records = lock(&lot).records.clone();
        Ok(records)
    }

    pub fn subscribe(&self, lot_id: u8) -> Result<Subscription, HubError> {
        let lot = self.lot(lot_id)?;
        let rx = lock(&lot).feed.subscribe();
        Ok(Subscription {
            lot_id,
            rx,
            overflowed: None,
        })
    }

    /// Backlog after `from_seq` plus a live feed starting right after it,
    /// taken atomically so nothing is missed or repeated in between.
    pub fn subscribe_from(
        &self,
        lot_id: u8,
        from_seq: u64,
    ) -> Result<(Vec<LotEventRecord>, Subscription), HubError> {
        let lot = self.lot(lot_id)?;
        let lot = lock(&lot);
        let start = (from_seq as usize).min(lot.records.len());
        let backlog = lot.records[start..].to_vec();
        let rx = lot.feed.subscribe();
        Ok((
            backlog,
            Subscription {
                lot_id,
                rx,
                overflowed: None,
            },
        ))
    }

    /// Appends records that did not come from a frame (simulation ground
    /// truth, for instance).
    pub fn append(
        &self,
        lot_id: u8,
        kinds: Vec<RecordKind>,
        now_ms: u64,
    ) -> Result<Vec<LotEventRecord>, HubError> {
        if kinds.iter().any(|k| {
            k.is_state_change()
                || matches!(
                    k,
                    RecordKind::LotRegistered { .. }
                        | RecordKind::HeartbeatMissed
                        | RecordKind::HeartbeatResumed
                        | RecordKind::CommandIssued { .. }
                        | RecordKind::CommandAcked { .. }
                )
        }) {
            return Err(HubError::InvalidArgument(
                "lot state records are produced by ingestion only".into(),
            ));
        }
        let lot = self.lot(lot_id)?;
        let mut lot = lock(&lot);
        self.commit(
            &mut lot,
            lot_id,
            kinds.into_iter().map(|k| (k, None)).collect(),
            now_ms,
        )
    }

    pub fn ingest_frame(&self, bytes: &[u8], now_ms: u64) -> IngestResult {
        let m = &self.inner.metrics;
        let frame = match wire::decode_frame(bytes) {
            Ok((frame, _)) => frame,
            Err(e) => {
                m.decode_errors.fetch_add(1, Ordering::Relaxed);
                return IngestResult::Error(e);
            }
        };
        let result = self.apply_frame(frame, now_ms);
        let counter = match &result {
            IngestResult::Accepted(_) => &m.accepted,
            IngestResult::Duplicate => &m.duplicate,
            IngestResult::Stale => &m.stale,
            IngestResult::Rejected(_) => &m.rejected,
            IngestResult::Error(_) => &m.decode_errors,
        };
        counter.fetch_add(1, Ordering::Relaxed);
        result
    }

    fn apply_frame(&self, frame: Frame, now_ms: u64) -> IngestResult {
        let lot_id = frame.lot_id;
        if let FrameBody::Telemetry(p) = &frame.body {
            if self.lot(lot_id).is_err() {
                match self.register_lot(lot_id, p.statuses.len(), now_ms) {
                    Ok(()) | Err(HubError::AlreadyRegistered(_)) => {}
                    Err(e) => return IngestResult::Rejected(e.to_string()),
                }
            }
        }
        let lot = match self.lot(lot_id) {
            Ok(l) => l,
            Err(e) => return IngestResult::Rejected(e.to_string()),
        };
        let mut lot = lock(&lot);
        let source = FrameRef {
            seq: frame.seq,
            tick_ms: frame.tick_ms,
        };
        let outcome = match &frame.body {
            FrameBody::Telemetry(_) => {
                let snap = frame.snapshot().expect("telemetry frame");
                self.apply_telemetry(&mut lot, snap, source, now_ms)
            }
            FrameBody::Heartbeat => match lot.tracker.classify(frame.seq) {
                SeqVerdict::Stale => IngestResult::Stale,
                // Same seq as the last snapshot is the normal idle case; a
                // seq ahead means telemetry went missing, but the controller
                // is alive either way.
                SeqVerdict::Duplicate | SeqVerdict::Accepted => {
                    let kinds = if lot.view.online {
                        vec![]
                    } else {
                        vec![(RecordKind::HeartbeatResumed, Some(source))]
                    };
                    match self.commit(&mut lot, lot_id, kinds, now_ms) {
                        Ok(records) => {
                            lot.view.online = true;
                            lot.last_heard_ms = Some(now_ms);
                            IngestResult::Accepted(records)
                        }
                        Err(e) => IngestResult::Rejected(e.to_string()),
                    }
                }
            },
            FrameBody::CommandAck(status) => match lot.pending_commands.remove(&frame.seq) {
                Some(cmd) => {
                    let kinds = vec![(
                        RecordKind::CommandAcked {
                            command_id: frame.seq,
                            status: *status,
                        },
                        Some(source),
                    )];
                    match self.commit(&mut lot, lot_id, kinds, now_ms) {
                        Ok(records) => IngestResult::Accepted(records),
                        Err(e) => {
                            lot.pending_commands.insert(frame.seq, cmd);
                            IngestResult::Rejected(e.to_string())
                        }
                    }
                }
                None => IngestResult::Duplicate,
            },
            FrameBody::Command(_) => {
                IngestResult::Rejected("hub does not accept command frames".into())
            }
        };
        if let IngestResult::Accepted(_) = outcome {
            lot.last_heard_ms = Some(now_ms);
        }
        outcome
    }

    fn apply_telemetry(
        &self,
        lot: &mut LotState,
        snap: LotSnapshot,
        source: FrameRef,
        now_ms: u64,
    ) -> IngestResult {
        let lot_id = snap.lot_id();
        let old = &lot.view.snapshot;
        if snap.slot_count() != old.slot_count() {
            return IngestResult::Rejected(format!(
                "lot {lot_id} has {} slots, frame reports {}",
                old.slot_count(),
                snap.slot_count()
            ));
        }
        match lot.tracker.classify(snap.seq()) {
            SeqVerdict::Duplicate => return IngestResult::Duplicate,
            SeqVerdict::Stale => return IngestResult::Stale,
            SeqVerdict::Accepted => {}
        }

        let mut kinds = Vec::new();
        if !lot.view.online {
            kinds.push((RecordKind::HeartbeatResumed, Some(source)));
        }
        for (pos, (&from, &to)) in old.statuses().iter().zip(snap.statuses()).enumerate() {
            if from != to {
                kinds.push((
                    RecordKind::SlotChanged {
                        slot: SlotId::from_position(pos),
                        from,
                        to,
                    },
                    Some(source),
                ));
            }
        }
        if old.barrier() != snap.barrier() {
            kinds.push((
                RecordKind::BarrierChanged {
                    from: old.barrier(),
                    to: snap.barrier(),
                },
                Some(source),
            ));
        }
        if old.available() != snap.available() {
            kinds.push((
                RecordKind::AvailabilityChanged {
                    from: old.available(),
                    to: snap.available(),
                },
                Some(source),
            ));
        }
        let changed = kinds.iter().any(|(k, _)| k.is_state_change());

        match self.commit(lot, lot_id, kinds, now_ms) {
            Ok(records) => {
                lot.tracker.accept(snap.seq());
                lot.view.online = true;
                if changed {
                    lot.view.snapshot = snap;
                    lot.view.updated_at_ms = now_ms;
                }
                IngestResult::Accepted(records)
            }
            Err(e) => IngestResult::Rejected(e.to_string()),
        }
    }

    /// Marks controllers that have been silent for too long as offline.
    pub fn check_liveness(&self, now_ms: u64) -> Vec<LotEventRecord> {
        let timeout = self.inner.config.heartbeat_ms * self.inner.config.liveness_factor;
        let lots: Vec<(u8, Arc<Mutex<LotState>>)> = self
            .read_lots()
            .iter()
            .map(|(&id, l)| (id, l.clone()))
            .collect();
        let mut out = Vec::new();
        for (lot_id, lot) in lots {
            let mut lot = lock(&lot);
            let silent = lot
                .last_heard_ms
                .is_some_and(|t| now_ms.saturating_sub(t) > timeout);
            if lot.view.online && silent {
                if let Ok(records) = self.commit(
                    &mut lot,
                    lot_id,
                    vec![(RecordKind::HeartbeatMissed, None)],
                    now_ms,
                ) {
                    lot.view.online = false;
                    out.extend(records);
                }
            }
        }
        out
    }

    /// Records the command, queues its frame for the controller and returns
    /// the command id (the frame's sequence number).
    pub fn issue_command(
        &self,
        lot_id: u8,
        command: Command,
        now_ms: u64,
    ) -> Result<u16, HubError> {
        command
            .validate()
            .map_err(|e| HubError::InvalidArgument(e.to_string()))?;
        let lot = self.lot(lot_id)?;
        let mut lot = lock(&lot);
        if let Command::SlotService { slot, .. } = command {
            let n = lot.view.snapshot.slot_count();
            if slot as usize > n {
                return Err(HubError::InvalidArgument(format!(
                    "slot {slot} outside 1..={n}"
                )));
            }
        }
        let seq = lot.next_command_seq;
        let bytes = wire::encode_command(lot_id, seq, now_ms, command)
            .map_err(|e| HubError::InvalidArgument(e.to_string()))?;
        self.commit(
            &mut lot,
            lot_id,
            vec![(
                RecordKind::CommandIssued {
                    command_id: seq,
                    command,
                },
                Some(FrameRef {
                    seq,
                    tick_ms: now_ms,
                }),
            )],
            now_ms,
        )?;
        lot.next_command_seq = seq.wrapping_add(1).max(1);
        lot.pending_commands.insert(seq, command);
        lot.outbound.push_back(bytes);
        Ok(seq)
    }

    /// Command frames waiting to go down to the lot's controller.
    pub fn take_outbound(&self, lot_id: u8) -> Vec<Vec<u8>> {
        match self.lot(lot_id) {
            Ok(lot) => lock(&lot).outbound.drain(..).collect(),
            Err(_) => Vec::new(),
        }
    }

    pub fn pending_commands(&self, lot_id: u8) -> Result<Vec<u16>, HubError> {
        let lot = self.lot(lot_id)?;
        let ids = lock(&lot).pending_commands.keys().copied().collect();
        Ok(ids)
    }
}
