//! Device ingestion over TCP. Frames are self-delimiting, so a connection
//! is just a byte stream; command frames for the connected lot are written
//! back on the same socket.

use std::time::Duration;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

use super::http::Clock;
use super::{Hub, IngestResult};
use crate::wire::FrameSplitter;

const OUTBOUND_POLL: Duration = Duration::from_millis(100);

/// Accepts controller connections until the listener fails.
pub async fn serve_ingest(listener: TcpListener, hub: Hub, clock: Clock) -> std::io::Result<()> {
    loop {
        let (sock, peer) = listener.accept().await?;
        let hub = hub.clone();
        let clock = clock.clone();
        tokio::spawn(async move {
            log::info!("controller connected from {peer}");
            if let Err(e) = handle(sock, hub, clock).await {
                log::warn!("connection {peer}: {e}");
            }
            log::info!("controller {peer} disconnected");
        });
    }
}

async fn handle(mut sock: TcpStream, hub: Hub, clock: Clock) -> std::io::Result<()> {
    let mut splitter = FrameSplitter::new();
    let mut buf = vec![0u8; 4096];
    let mut lot: Option<u8> = None;
    let mut poll = tokio::time::interval(OUTBOUND_POLL);
    loop {
        tokio::select! {
            n = sock.read(&mut buf) => {
                let n = n?;
                if n == 0 {
                    return Ok(());
                }
                splitter.push(&buf[..n]);
                while let Some(frame) = splitter.next_frame() {
                    let id = frame.get(3).copied();
                    match hub.ingest_frame(&frame, clock()) {
                        IngestResult::Error(e) => log::debug!("bad frame: {e}"),
                        IngestResult::Rejected(why) => log::debug!("frame rejected: {why}"),
                        _ => lot = lot.or(id),
                    }
                }
            }
            _ = poll.tick() => {}
        }
        if let Some(id) = lot {
            for frame in hub.take_outbound(id) {
                sock.write_all(&frame).await?;
            }
        }
    }
}
