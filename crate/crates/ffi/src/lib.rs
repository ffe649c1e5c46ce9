//! C ABI over the parklot controller, frame codec and hub.
//!
//! Handles are opaque and owned by the caller: every `*_new` has a matching
//! `*_free`. Functions return a [`ParkStatus`]. Output buffers follow one
//! convention: the caller passes a buffer and its capacity in `*len`; on
//! success `*len` holds the bytes written, and on `PARK_STATUS_BUFFER_TOO_SMALL`
//! it holds the size needed and nothing is consumed. Text outputs are UTF-8
//! and NUL-terminated, and the NUL is counted in `*len`.
//!
//! A `ParkHub` may be shared between threads. A `ParkController` may not.

use std::collections::HashMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;

use parklot::controller::{render_lcd, Controller, TickInput};
use parklot::hub::{Hub, HubConfig, HubError, IngestResult};
use parklot::lot::{LotConfig, SensorBit};
use parklot::wire::{self, Command, DecodeError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    BadMagic = 10,
    UnknownVersion = 11,
    UnknownType = 12,
    Truncated = 13,
    CrcMismatch = 14,
    InconsistentPayload = 15,
    UnknownLot = 20,
    AlreadyRegistered = 21,
    Duplicate = 22,
    Stale = 23,
    Rejected = 24,
    PersistFailed = 25,
    UnsupportedLayout = 30,
    /// A panic was caught at the boundary. The handle should be freed.
    Internal = 99,
}

impl From<&DecodeError> for ParkStatus {
    fn from(e: &DecodeError) -> Self {
        match e {
            DecodeError::BadMagic(_) => ParkStatus::BadMagic,
            DecodeError::UnknownVersion(_) => ParkStatus::UnknownVersion,
            DecodeError::UnknownType(_) => ParkStatus::UnknownType,
            DecodeError::Truncated { .. } => ParkStatus::Truncated,
            DecodeError::CrcMismatch { .. } => ParkStatus::CrcMismatch,
            DecodeError::InconsistentPayload(_) => ParkStatus::InconsistentPayload,
        }
    }
}

impl From<HubError> for ParkStatus {
    fn from(e: HubError) -> Self {
        match e {
            HubError::UnknownLot(_) => ParkStatus::UnknownLot,
            HubError::AlreadyRegistered(_) => ParkStatus::AlreadyRegistered,
            HubError::InvalidArgument(_) => ParkStatus::InvalidArgument,
            HubError::Persist(_) => ParkStatus::PersistFailed,
        }
    }
}

const ALL: [ParkStatus; 18] = [
    ParkStatus::Ok,
    ParkStatus::NullPointer,
    ParkStatus::InvalidArgument,
    ParkStatus::BufferTooSmall,
    ParkStatus::BadMagic,
    ParkStatus::UnknownVersion,
    ParkStatus::UnknownType,
    ParkStatus::Truncated,
    ParkStatus::CrcMismatch,
    ParkStatus::InconsistentPayload,
    ParkStatus::UnknownLot,
    ParkStatus::AlreadyRegistered,
    ParkStatus::Duplicate,
    ParkStatus::Stale,
    ParkStatus::Rejected,
    ParkStatus::PersistFailed,
    ParkStatus::UnsupportedLayout,
    ParkStatus::Internal,
];

/// Static, NUL-terminated name of a status code, "Unknown" for anything
/// that is not one. Takes a plain int so any value is safe to pass.
#[no_mangle]
pub extern "C" fn park_status_name(status: i32) -> *const c_char {
    let name: &'static CStr = match ALL.iter().find(|s| **s as i32 == status) {
        None => c"Unknown",
        Some(ParkStatus::Ok) => c"Ok",
        Some(ParkStatus::NullPointer) => c"NullPointer",
        Some(ParkStatus::InvalidArgument) => c"InvalidArgument",
        Some(ParkStatus::BufferTooSmall) => c"BufferTooSmall",
        Some(ParkStatus::BadMagic) => c"BadMagic",
        Some(ParkStatus::UnknownVersion) => c"UnknownVersion",
        Some(ParkStatus::UnknownType) => c"UnknownType",
        Some(ParkStatus::Truncated) => c"Truncated",
        Some(ParkStatus::CrcMismatch) => c"CrcMismatch",
        Some(ParkStatus::InconsistentPayload) => c"InconsistentPayload",
        Some(ParkStatus::UnknownLot) => c"UnknownLot",
        Some(ParkStatus::AlreadyRegistered) => c"AlreadyRegistered",
        Some(ParkStatus::Duplicate) => c"Duplicate",
        Some(ParkStatus::Stale) => c"Stale",
        Some(ParkStatus::Rejected) => c"Rejected",
        Some(ParkStatus::PersistFailed) => c"PersistFailed",
        Some(ParkStatus::UnsupportedLayout) => c"UnsupportedLayout",
        Some(ParkStatus::Internal) => c"Internal",
    };
    name.as_ptr()
}

fn guard(f: impl FnOnce() -> Result<(), ParkStatus>) -> ParkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ParkStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => ParkStatus::Internal,
    }
}

unsafe fn input<'a>(data: *const u8, len: usize) -> Result<&'a [u8], ParkStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(ParkStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn handle<'a, T>(p: *mut T) -> Result<&'a mut T, ParkStatus> {
    p.as_mut().ok_or(ParkStatus::NullPointer)
}

/// Check capacity first so a short buffer leaves the source untouched.
unsafe fn fits(out: *mut u8, len: *mut usize, needed: usize) -> Result<(), ParkStatus> {
    let cap = len.as_mut().ok_or(ParkStatus::NullPointer)?;
    if *cap < needed {
        *cap = needed;
        return Err(ParkStatus::BufferTooSmall);
    }
    if out.is_null() && needed > 0 {
        return Err(ParkStatus::NullPointer);
    }
    Ok(())
}

unsafe fn write_bytes(bytes: &[u8], out: *mut u8, len: *mut usize) -> Result<(), ParkStatus> {
    fits(out, len, bytes.len())?;
    if !bytes.is_empty() {
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
    }
    *len = bytes.len();
    Ok(())
}

unsafe fn write_text(text: &str, out: *mut c_char, len: *mut usize) -> Result<(), ParkStatus> {
    let out = out.cast::<u8>();
    fits(out, len, text.len() + 1)?;
    std::ptr::copy_nonoverlapping(text.as_ptr(), out, text.len());
    *out.add(text.len()) = 0;
    *len = text.len() + 1;
    Ok(())
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string(value).expect("serialisable")
}

/// CRC-16/CCITT-FALSE of `len` bytes. A null `data` hashes as empty.
///
/// # Safety
/// `data` must point to `len` readable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn park_crc16(data: *const u8, len: usize) -> u16 {
    wire::crc16(input(data, len).unwrap_or(&[]))
}

/// Length of the complete, valid frame at the start of `data`, for walking
/// a buffer that holds several frames back to back.
///
/// # Safety
/// `data` must point to `len` readable bytes and `frame_len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn park_frame_len(
    data: *const u8,
    len: usize,
    frame_len: *mut usize,
) -> ParkStatus {
    guard(|| {
        let out = frame_len.as_mut().ok_or(ParkStatus::NullPointer)?;
        let (_, n) = wire::decode_frame(input(data, len)?).map_err(|e| ParkStatus::from(&e))?;
        *out = n;
        Ok(())
    })
}

/// Decode one frame at the start of `data` into JSON text.
///
/// Decode failures return the matching status, so callers that only want
/// validation can pass a null `out` with `*len == 0` and ignore
/// `PARK_STATUS_BUFFER_TOO_SMALL`.
///
/// # Safety
/// `data` must point to `data_len` readable bytes, `out` to `*len` writable
/// bytes, and `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn park_decode_json(
    data: *const u8,
    data_len: usize,
    out: *mut c_char,
    len: *mut usize,
) -> ParkStatus {
    guard(|| {
        let bytes = input(data, data_len)?;
        let decoded = wire::decode_frame_verbose(bytes).map_err(|e| ParkStatus::from(&e))?;
        write_text(&json(&decoded), out, len)
    })
}

/// A controller for one lot plus the frames it has produced and the caller
/// has not yet taken.
pub struct ParkController {
    inner: Controller,
    pending: Vec<u8>,
}

/// Outcome of one controller tick.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ParkTick {
    /// The snapshot changed this tick.
    pub changed: bool,
    /// The entry was refused and the deny signal raised.
    pub denied: bool,
    /// Free slots after the tick.
    pub available: u32,
    /// Bytes now waiting in `park_controller_take_frames`.
    pub pending_bytes: usize,
}

/// Create a controller with default timings.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn park_controller_new(
    lot_id: u8,
    slot_count: u32,
    debounce_k: u32,
    out: *mut *mut ParkController,
) -> ParkStatus {
    guard(|| {
        let out = out.as_mut().ok_or(ParkStatus::NullPointer)?;
        let config = LotConfig {
            lot_id,
            slot_count: slot_count as usize,
            debounce_k,
            ..LotConfig::default()
        };
        let inner = Controller::new(config).map_err(|_| ParkStatus::InvalidArgument)?;
        *out = Box::into_raw(Box::new(ParkController {
            inner,
            pending: Vec::new(),
        }));
        Ok(())
    })
}

/// # Safety
/// `c` must come from `park_controller_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn park_controller_free(c: *mut ParkController) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Run one sample period. `raw` holds one byte per slot, 0 or 1.
///
/// # Safety
/// `c` must be a live controller, `raw` must point to `raw_len` bytes and
/// `result` may be null.
#[no_mangle]
pub unsafe extern "C" fn park_controller_tick(
    c: *mut ParkController,
    now_ms: u64,
    raw: *const u8,
    raw_len: usize,
    entry_detected: bool,
    vehicle_passed: bool,
    result: *mut ParkTick,
) -> ParkStatus {
    guard(|| {
        let c = handle(c)?;
        let raw = input(raw, raw_len)?
            .iter()
            .map(|&b| SensorBit::new(b).ok_or(ParkStatus::InvalidArgument))
            .collect::<Result<Vec<_>, _>>()?;
        let out = c
            .inner
            .tick(&TickInput {
                now_ms,
                raw,
                entry_detected,
                vehicle_passed,
            })
            .map_err(|_| ParkStatus::InvalidArgument)?;
        for f in out.frames() {
            c.pending.extend_from_slice(f);
        }
        if let Some(r) = result.as_mut() {
            *r = ParkTick {
                changed: out.snapshot.is_some(),
                denied: out.denied(),
                available: c.inner.snapshot().available() as u32,
                pending_bytes: c.pending.len(),
            };
        }
        Ok(())
    })
}

/// Hand the controller one inbound frame, normally a command from the hub.
/// The acknowledgement comes out with the next tick.
///
/// # Safety
/// `c` must be a live controller and `data` must point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn park_controller_accept_frame(
    c: *mut ParkController,
    data: *const u8,
    len: usize,
) -> ParkStatus {
    guard(|| {
        let c = handle(c)?;
        match c.inner.accept_frame(input(data, len)?) {
            Ok(true) => Ok(()),
            Ok(false) => Err(ParkStatus::Rejected),
            Err(e) => Err(ParkStatus::from(&e)),
        }
    })
}

/// Move all pending outbound frames, concatenated, into `out`.
///
/// # Safety
/// `c` must be a live controller, `out` must point to `*len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn park_controller_take_frames(
    c: *mut ParkController,
    out: *mut u8,
    len: *mut usize,
) -> ParkStatus {
    guard(|| {
        let c = handle(c)?;
        write_bytes(&c.pending, out, len)?;
        c.pending.clear();
        Ok(())
    })
}

/// The two display lines joined by a newline.
///
/// # Safety
/// `c` must be a live controller, `out` must point to `*len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn park_controller_lcd(
    c: *mut ParkController,
    out: *mut c_char,
    len: *mut usize,
) -> ParkStatus {
    guard(|| {
        let c = handle(c)?;
        let frame = render_lcd(c.inner.snapshot()).map_err(|_| ParkStatus::UnsupportedLayout)?;
        write_text(&frame.to_text(), out, len)
    })
}

/// A hub plus per-lot command bytes drained from it but not yet delivered.
pub struct ParkHub {
    inner: Hub,
    stash: Mutex<HashMap<u8, Vec<u8>>>,
}

/// Create an in-memory hub. `heartbeat_ms` of 0 keeps the default.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn park_hub_new(heartbeat_ms: u64, out: *mut *mut ParkHub) -> ParkStatus {
    guard(|| {
        let out = out.as_mut().ok_or(ParkStatus::NullPointer)?;
        let mut config = HubConfig::default();
        if heartbeat_ms > 0 {
            config.heartbeat_ms = heartbeat_ms;
        }
        *out = Box::into_raw(Box::new(ParkHub {
            inner: Hub::new(config),
            stash: Mutex::new(HashMap::new()),
        }));
        Ok(())
    })
}

/// # Safety
/// `h` must come from `park_hub_new` and not be used afterwards by any
/// thread.
#[no_mangle]
pub unsafe extern "C" fn park_hub_free(h: *mut ParkHub) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

unsafe fn hub_ref<'a>(h: *const ParkHub) -> Result<&'a ParkHub, ParkStatus> {
    h.as_ref().ok_or(ParkStatus::NullPointer)
}

/// # Safety
/// `h` must be a live hub.
#[no_mangle]
pub unsafe extern "C" fn park_hub_register_lot(
    h: *const ParkHub,
    lot_id: u8,
    slot_count: u32,
    now_ms: u64,
) -> ParkStatus {
    guard(|| {
        hub_ref(h)?
            .inner
            .register_lot(lot_id, slot_count as usize, now_ms)
            .map_err(ParkStatus::from)
    })
}

/// Ingest one frame. `records` (may be null) receives how many log records
/// it produced. Duplicates and stale frames are reported, not errors in the
/// usual sense: the hub state is unchanged.
///
/// # Safety
/// `h` must be a live hub and `data` must point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn park_hub_ingest(
    h: *const ParkHub,
    data: *const u8,
    len: usize,
    now_ms: u64,
    records: *mut usize,
) -> ParkStatus {
    guard(|| {
        let hub = hub_ref(h)?;
        let result = hub.inner.ingest_frame(input(data, len)?, now_ms);
        if let Some(n) = records.as_mut() {
            *n = result.records().len();
        }
        match result {
            IngestResult::Accepted(_) => Ok(()),
            IngestResult::Duplicate => Err(ParkStatus::Duplicate),
            IngestResult::Stale => Err(ParkStatus::Stale),
            IngestResult::Rejected(_) => Err(ParkStatus::Rejected),
            IngestResult::Error(e) => Err(ParkStatus::from(&e)),
        }
    })
}

/// Mark lots offline whose controllers have gone quiet. `records` (may be
/// null) receives the number of records written.
///
/// # Safety
/// `h` must be a live hub.
#[no_mangle]
pub unsafe extern "C" fn park_hub_check_liveness(
    h: *const ParkHub,
    now_ms: u64,
    records: *mut usize,
) -> ParkStatus {
    guard(|| {
        let n = hub_ref(h)?.inner.check_liveness(now_ms).len();
        if let Some(r) = records.as_mut() {
            *r = n;
        }
        Ok(())
    })
}

/// The current lot view as JSON, same shape as the HTTP API.
///
/// # Safety
/// `h` must be a live hub, `out` must point to `*len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn park_hub_snapshot_json(
    h: *const ParkHub,
    lot_id: u8,
    out: *mut c_char,
    len: *mut usize,
) -> ParkStatus {
    guard(|| {
        let view = hub_ref(h)?.inner.snapshot(lot_id)?;
        write_text(&json(&view), out, len)
    })
}

/// A JSON array of up to `limit` records with `record_seq > from_seq`.
///
/// # Safety
/// `h` must be a live hub, `out` must point to `*len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn park_hub_history_json(
    h: *const ParkHub,
    lot_id: u8,
    from_seq: u64,
    limit: u32,
    out: *mut c_char,
    len: *mut usize,
) -> ParkStatus {
    guard(|| {
        let page = hub_ref(h)?
            .inner
            .history(lot_id, from_seq, limit as usize)?;
        write_text(&json(&page), out, len)
    })
}

/// Queue a command given as JSON, for example
/// `{"type":"slot_service","slot":2,"out_of_service":true}`.
/// `command_seq` (may be null) receives the sequence number the
/// acknowledgement will carry.
///
/// # Safety
/// `h` must be a live hub and `command_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn park_hub_issue_command(
    h: *const ParkHub,
    lot_id: u8,
    command_json: *const c_char,
    now_ms: u64,
    command_seq: *mut u16,
) -> ParkStatus {
    guard(|| {
        let hub = hub_ref(h)?;
        if command_json.is_null() {
            return Err(ParkStatus::NullPointer);
        }
        let text = CStr::from_ptr(command_json)
            .to_str()
            .map_err(|_| ParkStatus::InvalidArgument)?;
        let command: Command =
            serde_json::from_str(text).map_err(|_| ParkStatus::InvalidArgument)?;
        let seq = hub.inner.issue_command(lot_id, command, now_ms)?;
        if let Some(s) = command_seq.as_mut() {
            *s = seq;
        }
        Ok(())
    })
}

/// Move the command frames waiting for a lot, concatenated, into `out`.
///
/// # Safety
/// `h` must be a live hub, `out` must point to `*len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn park_hub_take_outbound(
    h: *const ParkHub,
    lot_id: u8,
    out: *mut u8,
    len: *mut usize,
) -> ParkStatus {
    guard(|| {
        let hub = hub_ref(h)?;
        let mut stash = hub.stash.lock().unwrap_or_else(|p| p.into_inner());
        let buf = stash.entry(lot_id).or_default();
        for f in hub.inner.take_outbound(lot_id) {
            buf.extend(f);
        }
        write_bytes(buf, out, len)?;
        buf.clear();
        Ok(())
    })
}
