//! Firmware logic for one lot: debounce the slot sensors, run the entry
//! barrier, drive the display and decide when to report to the hub.
//!
//! [`Controller::tick`] is the only way state advances. It is deterministic:
//! the same sequence of inputs always produces the same outputs, which is
//! what the replay and determinism tests lean on.

mod barrier;
mod debounce;
mod lcd;

use std::collections::VecDeque;

use thiserror::Error;

pub use barrier::{barrier_step, ActuatorCommand, Barrier, BarrierEvent, BarrierTimings};
pub use debounce::{debounce_update, Debouncer};
pub use lcd::{render_lcd, LcdError, LcdFrame, LCD_COLS, LCD_SLOTS};

use crate::lot::{BarrierState, ConfigError, LotConfig, LotSnapshot, SensorBit, SlotStatus};
use crate::wire::{self, AckStatus, Command};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("expected {expected} sensor readings, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Sensor and entry-loop readings for one sample period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickInput {
    pub now_ms: u64,
    pub raw: Vec<SensorBit>,
    pub entry_detected: bool,
    pub vehicle_passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TelemetryTrigger {
    Snapshot,
    Heartbeat,
}

/// A frame the controller wants sent upstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outbound {
    pub trigger: TelemetryTrigger,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TickOutput {
    /// Present exactly when a slot status, the availability or the barrier
    /// changed (and on the first tick after boot).
    pub snapshot: Option<LotSnapshot>,
    pub lcd: Option<LcdFrame>,
    pub telemetry: Option<Outbound>,
    /// Acknowledgement frames for commands applied this tick.
    pub acks: Vec<Vec<u8>>,
    /// Motor and indicator outputs, in the order they were raised.
    pub actuators: Vec<ActuatorCommand>,
}

impl TickOutput {
    pub fn denied(&self) -> bool {
        self.actuators.contains(&ActuatorCommand::DenySignal)
    }

    /// All frames to transmit, telemetry first.
    pub fn frames(&self) -> impl Iterator<Item = &[u8]> {
        self.telemetry
            .iter()
            .map(|o| o.bytes.as_slice())
            .chain(self.acks.iter().map(Vec::as_slice))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Controller {
    config: LotConfig,
    timings: BarrierTimings,
    slots: Vec<Debouncer>,
    barrier: Barrier,
    last: LotSnapshot,
    booted: bool,
    last_sent_ms: u64,
    commands: VecDeque<(u16, Command)>,
}

impl Controller {
    pub fn new(config: LotConfig) -> Result<Self, ControllerError> {
        config.validate()?;
        Ok(Controller {
            timings: BarrierTimings::from(&config),
            slots: vec![Debouncer::default(); config.slot_count],
            barrier: Barrier::default(),
            last: LotSnapshot::initial(config.lot_id, config.slot_count),
            booted: false,
            last_sent_ms: 0,
            commands: VecDeque::new(),
            config,
        })
    }

    pub fn config(&self) -> &LotConfig {
        &self.config
    }

    /// Last emitted snapshot.
    pub fn snapshot(&self) -> &LotSnapshot {
        &self.last
    }

    pub fn barrier(&self) -> BarrierState {
        self.barrier.state()
    }

    pub fn statuses(&self) -> Vec<SlotStatus> {
        self.slots.iter().map(Debouncer::confirmed).collect()
    }

    /// Queues an operator command received from the hub. It takes effect
    /// (and is acknowledged) on the next tick.
    pub fn enqueue_command(&mut self, seq: u16, command: Command) {
        self.commands.push_back((seq, command));
    }

    /// Decodes and queues a command frame. Frames addressed to another lot
    /// or of another type are ignored.
    pub fn accept_frame(&mut self, bytes: &[u8]) -> Result<bool, wire::DecodeError> {
        let (frame, _) = wire::decode_frame(bytes)?;
        match frame.body {
            wire::FrameBody::Command(cmd) if frame.lot_id == self.config.lot_id => {
                self.enqueue_command(frame.seq, cmd);
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn apply_command(&mut self, command: Command, now_ms: u64, out: &mut TickOutput) -> AckStatus {
        match command {
            Command::BarrierOverride { mode } => {
                let available = crate::lot::available_count(&self.statuses());
                let (b, cmd) = self.barrier.step(
                    BarrierEvent::OverrideSet(mode),
                    available,
                    now_ms,
                    &self.timings,
                );
                self.barrier = b;
                push_actuator(out, cmd);
                AckStatus::Applied
            }
            Command::SlotService {
                slot,
                out_of_service,
            } => match self.slots.get_mut((slot as usize).wrapping_sub(1)) {
                Some(d) => {
                    d.set_out_of_service(out_of_service);
                    AckStatus::Applied
                }
                None => AckStatus::Rejected,
            },
        }
    }

    pub fn tick(&mut self, input: &TickInput) -> Result<TickOutput, ControllerError> {
        let n = self.config.slot_count;
        if input.raw.len() != n {
            return Err(ControllerError::ArityMismatch {
                expected: n,
                got: input.raw.len(),
            });
        }
        let now = input.now_ms;
        let mut out = TickOutput::default();

        while let Some((seq, cmd)) = self.commands.pop_front() {
            let status = self.apply_command(cmd, now, &mut out);
            out.acks
                .push(wire::encode_ack(self.config.lot_id, seq, now, status));
        }

        for (d, &raw) in self.slots.iter_mut().zip(&input.raw) {
            d.update(raw, self.config.debounce_k);
        }
        let statuses = self.statuses();
        let available = crate::lot::available_count(&statuses);

        let mut events = vec![BarrierEvent::Tick];
        if input.vehicle_passed {
            events.push(BarrierEvent::VehiclePassed);
        }
        if input.entry_detected {
            events.push(BarrierEvent::EntryDetected);
        }
        for ev in events {
            let (b, cmd) = self.barrier.step(ev, available, now, &self.timings);
            self.barrier = b;
            push_actuator(&mut out, cmd);
        }

        let changed = !self.booted
            || statuses != self.last.statuses()
            || self.barrier.state() != self.last.barrier();
        if changed {
            let seq = if self.booted {
                self.last.seq().wrapping_add(1)
            } else {
                self.last.seq()
            };
            self.booted = true;
            let snap =
                LotSnapshot::new(self.config.lot_id, now, seq, statuses, self.barrier.state());
            out.lcd = render_lcd(&snap).ok();
            out.telemetry = Some(Outbound {
                trigger: TelemetryTrigger::Snapshot,
                bytes: wire::encode_telemetry(&snap)
                    .expect("slot_count validated against frame capacity"),
            });
            out.snapshot = Some(snap.clone());
            self.last = snap;
            self.last_sent_ms = now;
        } else if now.saturating_sub(self.last_sent_ms) >= self.config.heartbeat_ms {
            out.telemetry = Some(Outbound {
                trigger: TelemetryTrigger::Heartbeat,
                bytes: wire::encode_heartbeat(self.config.lot_id, self.last.seq(), now),
            });
            self.last_sent_ms = now;
        }
        Ok(out)
    }
}

fn push_actuator(out: &mut TickOutput, cmd: ActuatorCommand) {
    if cmd != ActuatorCommand::None {
        out.actuators.push(cmd);
    }
}
