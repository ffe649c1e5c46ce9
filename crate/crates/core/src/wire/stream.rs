use super::frame::{frame_len, DecodeError, MAGIC};

/// Splits a byte stream into candidate frames.
///
/// Bytes are buffered until a whole frame is present. When the buffer does
/// not start with a plausible header, bytes are skipped up to the next magic
/// byte so one corrupt frame does not wedge the link.
#[derive(Debug, Default)]
pub struct FrameSplitter {
    buf: Vec<u8>,
    skipped: u64,
}

impl FrameSplitter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Number of bytes discarded while resynchronising.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete frame's bytes, still undecoded. CRC and payload checks
    /// are left to `decode_frame` so the caller sees those errors.
    pub fn next_frame(&mut self) -> Option<Vec<u8>> {
        loop {
            if self.buf.is_empty() {
                return None;
            }
            match frame_len(&self.buf) {
                Ok(len) if self.buf.len() >= len => {
                    return Some(self.buf.drain(..len).collect());
                }
                Ok(_) | Err(DecodeError::Truncated { .. }) => return None,
                Err(_) => self.resync(),
            }
        }
    }

    fn resync(&mut self) {
        let next = self.buf[1..]
            .iter()
            .position(|&b| b == MAGIC)
            .map(|p| p + 1)
            .unwrap_or(self.buf.len());
        self.skipped += next as u64;
        self.buf.drain(..next);
    }
}
