//! Binary framing between controllers and the hub.
//!
//! Every frame is `A5 01 <type> <lot> <seq:be16> <tick_ms:be64> <payload>
//! <crc:be16>`. Frames carry no length field; the type (and, for telemetry,
//! the slot count) fixes the payload size, so a byte stream can be split
//! without delimiters.

mod crc;
mod frame;
mod stream;

pub use crc::crc16;
pub use frame::{
    decode_frame, decode_frame_verbose, encode_ack, encode_command, encode_frame, encode_heartbeat,
    encode_telemetry, frame_len, telemetry_frame_len, AckStatus, Command, DecodeError,
    DecodedFrame, EncodeError, Frame, FrameBody, MsgType, TelemetryPayload, CRC_LEN, HEADER_LEN,
    MAGIC, VERSION,
};
pub use stream::FrameSplitter;
