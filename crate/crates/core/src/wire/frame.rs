use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::crc::crc16;
use crate::lot::{
    available_count, BarrierMotion, BarrierState, LotSnapshot, OverrideMode, SlotStatus, MAX_SLOTS,
};

pub const MAGIC: u8 = 0xA5;
pub const VERSION: u8 = 0x01;
/// magic, version, msg_type, lot_id, seq (2), tick_ms (8)
pub const HEADER_LEN: usize = 14;
pub const CRC_LEN: usize = 2;

const FLAG_FORCED_OPEN: u8 = 0x10;
const FLAG_FORCED_CLOSED: u8 = 0x20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgType {
    Telemetry = 0x01,
    Heartbeat = 0x02,
    Command = 0x03,
    CommandAck = 0x04,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => MsgType::Telemetry,
            0x02 => MsgType::Heartbeat,
            0x03 => MsgType::Command,
            0x04 => MsgType::CommandAck,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic byte 0x{0:02X}")]
    BadMagic(u8),
    #[error("unknown protocol version 0x{0:02X}")]
    UnknownVersion(u8),
    #[error("unknown message type 0x{0:02X}")]
    UnknownType(u8),
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("crc mismatch: frame carries 0x{carried:04X}, computed 0x{computed:04X}")]
    CrcMismatch { carried: u16, computed: u16 },
    #[error("inconsistent payload: {0}")]
    InconsistentPayload(&'static str),
}

impl DecodeError {
    /// Stable error name used by the CLI and the C ABI.
    pub fn name(&self) -> &'static str {
        match self {
            DecodeError::BadMagic(_) => "BadMagic",
            DecodeError::UnknownVersion(_) => "UnknownVersion",
            DecodeError::UnknownType(_) => "UnknownType",
            DecodeError::Truncated { .. } => "Truncated",
            DecodeError::CrcMismatch { .. } => "CrcMismatch",
            DecodeError::InconsistentPayload(_) => "InconsistentPayload",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("{0} slots exceed the {MAX_SLOTS}-slot frame capacity")]
    CapacityExceeded(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Operator command relayed from the hub to a controller.
///
/// The serde shape doubles as the HTTP command body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    BarrierOverride { mode: OverrideMode },
    SlotService { slot: u8, out_of_service: bool },
}

impl Command {
    fn to_bytes(self) -> Result<[u8; 3], EncodeError> {
        match self {
            Command::BarrierOverride { mode } => Ok([0x01, mode.code(), 0x00]),
            Command::SlotService {
                slot,
                out_of_service,
            } => {
                if slot == 0 || slot as usize > MAX_SLOTS {
                    return Err(EncodeError::InvalidArgument(format!(
                        "slot index {slot} outside 1..={MAX_SLOTS}"
                    )));
                }
                Ok([0x02, slot, out_of_service as u8])
            }
        }
    }

    fn from_bytes(b: &[u8]) -> Result<Self, DecodeError> {
        match (b[0], b[1], b[2]) {
            (0x01, mode, 0x00) => OverrideMode::from_code(mode)
                .map(|mode| Command::BarrierOverride { mode })
                .ok_or(DecodeError::InconsistentPayload(
                    "override mode out of range",
                )),
            (0x01, _, _) => Err(DecodeError::InconsistentPayload("override arg2 must be 0")),
            (0x02, slot, flag) if slot >= 1 && slot as usize <= MAX_SLOTS && flag <= 1 => {
                Ok(Command::SlotService {
                    slot,
                    out_of_service: flag == 1,
                })
            }
            (0x02, _, _) => Err(DecodeError::InconsistentPayload(
                "slot-service args out of range",
            )),
            _ => Err(DecodeError::InconsistentPayload("unknown command code")),
        }
    }

    pub fn validate(self) -> Result<Self, EncodeError> {
        self.to_bytes().map(|_| self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Applied,
    Rejected,
}

/// Occupancy report carried by a telemetry frame. The available count is
/// derived from the statuses, never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TelemetryPayload {
    pub statuses: Vec<SlotStatus>,
    pub barrier: BarrierState,
}

impl TelemetryPayload {
    pub fn available(&self) -> usize {
        available_count(&self.statuses)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TelemetryJson {
    slot_count: usize,
    slots: Vec<SlotStatus>,
    barrier: BarrierState,
    available: usize,
}

impl Serialize for TelemetryPayload {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TelemetryJson {
            slot_count: self.statuses.len(),
            slots: self.statuses.clone(),
            barrier: self.barrier,
            available: self.available(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TelemetryPayload {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = TelemetryJson::deserialize(d)?;
        let p = TelemetryPayload {
            statuses: j.slots,
            barrier: j.barrier,
        };
        if j.slot_count != p.statuses.len() || j.available != p.available() {
            return Err(serde::de::Error::custom(
                "telemetry counts disagree with slots",
            ));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "msg_type", content = "payload", rename_all = "snake_case")]
pub enum FrameBody {
    Telemetry(TelemetryPayload),
    Heartbeat,
    Command(Command),
    CommandAck(AckStatus),
}

impl FrameBody {
    pub fn msg_type(&self) -> MsgType {
        match self {
            FrameBody::Telemetry(_) => MsgType::Telemetry,
            FrameBody::Heartbeat => MsgType::Heartbeat,
            FrameBody::Command(_) => MsgType::Command,
            FrameBody::CommandAck(_) => MsgType::CommandAck,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    pub lot_id: u8,
    pub seq: u16,
    pub tick_ms: u64,
    #[serde(flatten)]
    pub body: FrameBody,
}

impl Frame {
    pub fn telemetry(snapshot: &LotSnapshot) -> Self {
        Frame {
            lot_id: snapshot.lot_id(),
            seq: snapshot.seq(),
            tick_ms: snapshot.tick_ms(),
            body: FrameBody::Telemetry(TelemetryPayload {
                statuses: snapshot.statuses().to_vec(),
                barrier: snapshot.barrier(),
            }),
        }
    }

    /// The lot state a telemetry frame reports, if it is one.
    pub fn snapshot(&self) -> Option<LotSnapshot> {
        match &self.body {
            FrameBody::Telemetry(p) => Some(LotSnapshot::new(
                self.lot_id,
                self.tick_ms,
                self.seq,
                p.statuses.clone(),
                p.barrier,
            )),
            _ => None,
        }
    }
}

/// Frame plus the framing facts a decoder observed, for display.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedFrame {
    #[serde(flatten)]
    pub frame: Frame,
    pub length: usize,
    pub crc: u16,
}

fn bitmap_len(slot_count: usize) -> usize {
    slot_count.div_ceil(8)
}

/// Encoded size of a telemetry frame for `slot_count` slots.
pub fn telemetry_frame_len(slot_count: usize) -> usize {
    HEADER_LEN + 1 + 2 * bitmap_len(slot_count) + 2 + CRC_LEN
}

fn payload_len(msg: MsgType, slot_count: Option<usize>) -> usize {
    match msg {
        MsgType::Telemetry => 1 + 2 * bitmap_len(slot_count.unwrap_or(0)) + 2,
        MsgType::Heartbeat => 0,
        MsgType::Command => 3,
        MsgType::CommandAck => 1,
    }
}

fn barrier_byte(b: BarrierState) -> u8 {
    let flag = match b.override_mode {
        OverrideMode::Auto => 0,
        OverrideMode::ForcedOpen => FLAG_FORCED_OPEN,
        OverrideMode::ForcedClosed => FLAG_FORCED_CLOSED,
    };
    b.state.code() | flag
}

fn parse_barrier(byte: u8) -> Result<BarrierState, DecodeError> {
    let state = BarrierMotion::from_code(byte & 0x0F).ok_or(DecodeError::InconsistentPayload(
        "barrier motion out of range",
    ))?;
    let override_mode = match byte & 0xF0 {
        0 => OverrideMode::Auto,
        FLAG_FORCED_OPEN => OverrideMode::ForcedOpen,
        FLAG_FORCED_CLOSED => OverrideMode::ForcedClosed,
        _ => {
            return Err(DecodeError::InconsistentPayload(
                "barrier override flags invalid",
            ))
        }
    };
    Ok(BarrierState::new(state, override_mode))
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, EncodeError> {
    let msg = frame.body.msg_type();
    let mut out = Vec::with_capacity(HEADER_LEN + 16);
    out.extend_from_slice(&[MAGIC, VERSION, msg as u8, frame.lot_id]);
    out.extend_from_slice(&frame.seq.to_be_bytes());
    out.extend_from_slice(&frame.tick_ms.to_be_bytes());
    match &frame.body {
        FrameBody::Telemetry(p) => {
            let n = p.statuses.len();
            if n > MAX_SLOTS {
                return Err(EncodeError::CapacityExceeded(n));
            }
            if n == 0 {
                return Err(EncodeError::InvalidArgument(
                    "telemetry needs at least one slot".into(),
                ));
            }
            let mut occupied = vec![0u8; bitmap_len(n)];
            let mut service = vec![0u8; bitmap_len(n)];
            for (i, s) in p.statuses.iter().enumerate() {
                match s {
                    SlotStatus::Occupied => occupied[i / 8] |= 1 << (i % 8),
                    SlotStatus::OutOfService => service[i / 8] |= 1 << (i % 8),
                    SlotStatus::Vacant => {}
                }
            }
            out.push(n as u8);
            out.extend_from_slice(&occupied);
            out.extend_from_slice(&service);
            out.push(barrier_byte(p.barrier));
            out.push(p.available() as u8);
        }
        FrameBody::Heartbeat => {}
        FrameBody::Command(c) => out.extend_from_slice(&c.to_bytes()?),
        FrameBody::CommandAck(status) => out.push(match status {
            AckStatus::Applied => 0x00,
            AckStatus::Rejected => 0x01,
        }),
    }
    let crc = crc16(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

pub fn encode_telemetry(snapshot: &LotSnapshot) -> Result<Vec<u8>, EncodeError> {
    encode_frame(&Frame::telemetry(snapshot))
}

pub fn encode_heartbeat(lot_id: u8, seq: u16, tick_ms: u64) -> Vec<u8> {
    encode_frame(&Frame {
        lot_id,
        seq,
        tick_ms,
        body: FrameBody::Heartbeat,
    })
    .expect("heartbeat frames always encode")
}

pub fn encode_command(
    lot_id: u8,
    seq: u16,
    tick_ms: u64,
    command: Command,
) -> Result<Vec<u8>, EncodeError> {
    encode_frame(&Frame {
        lot_id,
        seq,
        tick_ms,
        body: FrameBody::Command(command),
    })
}

pub fn encode_ack(lot_id: u8, seq: u16, tick_ms: u64, status: AckStatus) -> Vec<u8> {
    encode_frame(&Frame {
        lot_id,
        seq,
        tick_ms,
        body: FrameBody::CommandAck(status),
    })
    .expect("ack frames always encode")
}

fn need(bytes: &[u8], needed: usize) -> Result<(), DecodeError> {
    if bytes.len() < needed {
        Err(DecodeError::Truncated {
            needed,
            available: bytes.len(),
        })
    } else {
        Ok(())
    }
}

/// Total length of the frame at the start of `bytes`, once enough of the
/// header is present to know it.
pub fn frame_len(bytes: &[u8]) -> Result<usize, DecodeError> {
    need(bytes, 1)?;
    if bytes[0] != MAGIC {
        return Err(DecodeError::BadMagic(bytes[0]));
    }
    need(bytes, 2)?;
    if bytes[1] != VERSION {
        return Err(DecodeError::UnknownVersion(bytes[1]));
    }
    need(bytes, 3)?;
    let msg = MsgType::from_byte(bytes[2]).ok_or(DecodeError::UnknownType(bytes[2]))?;
    let slot_count = if msg == MsgType::Telemetry {
        need(bytes, HEADER_LEN + 1)?;
        let n = bytes[HEADER_LEN] as usize;
        if n == 0 || n > MAX_SLOTS {
            return Err(DecodeError::InconsistentPayload("slot_count out of range"));
        }
        Some(n)
    } else {
        need(bytes, HEADER_LEN)?;
        None
    };
    Ok(HEADER_LEN + payload_len(msg, slot_count) + CRC_LEN)
}

/// Decodes one frame from the front of `bytes`, returning it with the number
/// of bytes it occupied. Anything after that is left for the caller.
pub fn decode_frame(bytes: &[u8]) -> Result<(Frame, usize), DecodeError> {
    let total = frame_len(bytes)?;
    need(bytes, total)?;
    let body_end = total - CRC_LEN;
    let carried = u16::from_be_bytes([bytes[body_end], bytes[body_end + 1]]);
    let computed = crc16(&bytes[..body_end]);
    if carried != computed {
        return Err(DecodeError::CrcMismatch { carried, computed });
    }

    let lot_id = bytes[3];
    let seq = u16::from_be_bytes([bytes[4], bytes[5]]);
    let tick_ms = u64::from_be_bytes(bytes[6..14].try_into().expect("8-byte slice"));
    let payload = &bytes[HEADER_LEN..body_end];
    let body = match MsgType::from_byte(bytes[2]).expect("checked by frame_len") {
        MsgType::Telemetry => FrameBody::Telemetry(parse_telemetry(payload)?),
        MsgType::Heartbeat => FrameBody::Heartbeat,
        MsgType::Command => FrameBody::Command(Command::from_bytes(payload)?),
        MsgType::CommandAck => FrameBody::CommandAck(match payload[0] {
            0x00 => AckStatus::Applied,
            0x01 => AckStatus::Rejected,
            _ => return Err(DecodeError::InconsistentPayload("ack status out of range")),
        }),
    };
    Ok((
        Frame {
            lot_id,
            seq,
            tick_ms,
            body,
        },
        total,
    ))
}

pub fn decode_frame_verbose(bytes: &[u8]) -> Result<DecodedFrame, DecodeError> {
    let (frame, length) = decode_frame(bytes)?;
    let crc = u16::from_be_bytes([bytes[length - 2], bytes[length - 1]]);
    Ok(DecodedFrame { frame, length, crc })
}

fn parse_telemetry(payload: &[u8]) -> Result<TelemetryPayload, DecodeError> {
    let n = payload[0] as usize;
    let width = bitmap_len(n);
    let occupied = &payload[1..1 + width];
    let service = &payload[1 + width..1 + 2 * width];
    let barrier = parse_barrier(payload[1 + 2 * width])?;
    let available = payload[2 + 2 * width] as usize;

    let bit = |map: &[u8], i: usize| map[i / 8] >> (i % 8) & 1 == 1;
    if !n.is_multiple_of(8) {
        let pad_mask = !((1u8 << (n % 8)) - 1);
        if occupied[width - 1] & pad_mask != 0 || service[width - 1] & pad_mask != 0 {
            return Err(DecodeError::InconsistentPayload("bitmap padding bits set"));
        }
    }
    let mut statuses = Vec::with_capacity(n);
    for i in 0..n {
        statuses.push(match (bit(occupied, i), bit(service, i)) {
            (false, false) => SlotStatus::Vacant,
            (true, false) => SlotStatus::Occupied,
            (false, true) => SlotStatus::OutOfService,
            (true, true) => {
                return Err(DecodeError::InconsistentPayload(
                    "slot both occupied and out of service",
                ))
            }
        });
    }
    let p = TelemetryPayload { statuses, barrier };
    if p.available() != available {
        return Err(DecodeError::InconsistentPayload(
            "available count disagrees with bitmaps",
        ));
    }
    Ok(p)
}
