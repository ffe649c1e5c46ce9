use crate::lot::{BarrierMotion, BarrierState, LotConfig, OverrideMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierEvent {
    /// A vehicle is waiting on the entry loop.
    EntryDetected,
    /// The admitted vehicle has cleared the barrier.
    VehiclePassed,
    /// Clock advance; timed transitions fire here.
    Tick,
    OverrideSet(OverrideMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActuatorCommand {
    Raise,
    Lower,
    DenySignal,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarrierTimings {
    pub open_ms: u64,
    pub hold_ms: u64,
    pub close_ms: u64,
}

impl Default for BarrierTimings {
    fn default() -> Self {
        BarrierTimings::from(&LotConfig::default())
    }
}

impl From<&LotConfig> for BarrierTimings {
    fn from(c: &LotConfig) -> Self {
        BarrierTimings {
            open_ms: c.barrier_open_ms,
            hold_ms: c.barrier_hold_ms,
            close_ms: c.barrier_close_ms,
        }
    }
}

/// Entry barrier state machine. `since_ms` is when the current motion state
/// was entered and drives the timed transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Barrier {
    state: BarrierState,
    since_ms: u64,
}

impl Barrier {
    pub fn new(state: BarrierState, since_ms: u64) -> Self {
        Barrier { state, since_ms }
    }

    pub fn state(&self) -> BarrierState {
        self.state
    }

    pub fn since_ms(&self) -> u64 {
        self.since_ms
    }

    fn to(self, motion: BarrierMotion, now_ms: u64) -> Self {
        Barrier {
            state: BarrierState::new(motion, self.state.override_mode),
            since_ms: now_ms,
        }
    }

    fn elapsed(&self, now_ms: u64) -> u64 {
        now_ms.saturating_sub(self.since_ms)
    }

    /// One transition. Events that mean nothing in the current state leave
    /// it unchanged and return [`ActuatorCommand::None`].
    pub fn step(
        self,
        event: BarrierEvent,
        available: usize,
        now_ms: u64,
        t: &BarrierTimings,
    ) -> (Barrier, ActuatorCommand) {
        use ActuatorCommand as A;
        use BarrierMotion::*;

        if let BarrierEvent::OverrideSet(mode) = event {
            return self.set_override(mode, now_ms);
        }
        let motion = self.state.state;
        match (self.state.override_mode, motion, event) {
            // timed transitions shared by every mode
            (_, Opening, BarrierEvent::Tick) if self.elapsed(now_ms) >= t.open_ms => {
                (self.to(Open, now_ms), A::None)
            }
            (_, Closing, BarrierEvent::Tick) if self.elapsed(now_ms) >= t.close_ms => {
                (self.to(Closed, now_ms), A::None)
            }

            (OverrideMode::Auto, Closed, BarrierEvent::EntryDetected) => {
                if available > 0 {
                    (self.to(Opening, now_ms), A::Raise)
                } else {
                    (self, A::DenySignal)
                }
            }
            (OverrideMode::Auto, Open, BarrierEvent::VehiclePassed) => {
                (self.to(Closing, now_ms), A::Lower)
            }
            (OverrideMode::Auto, Open, BarrierEvent::Tick) if self.elapsed(now_ms) >= t.hold_ms => {
                (self.to(Closing, now_ms), A::Lower)
            }

            (OverrideMode::ForcedClosed, _, BarrierEvent::EntryDetected) => (self, A::DenySignal),

            _ => (self, A::None),
        }
    }

    fn set_override(self, mode: OverrideMode, now_ms: u64) -> (Barrier, ActuatorCommand) {
        use BarrierMotion::*;
        let mut next = self;
        next.state.override_mode = mode;
        match (mode, self.state.state) {
            (OverrideMode::ForcedOpen, Closed | Closing) => {
                (next.to(Opening, now_ms), ActuatorCommand::Raise)
            }
            (OverrideMode::ForcedClosed, Open | Opening) => {
                (next.to(Closing, now_ms), ActuatorCommand::Lower)
            }
            // hold timer restarts when automatic control resumes on an open barrier
            (OverrideMode::Auto, Open) if self.state.override_mode != OverrideMode::Auto => {
                (next.to(Open, now_ms), ActuatorCommand::None)
            }
            _ => (next, ActuatorCommand::None),
        }
    }
}

/// Free-function form of [`Barrier::step`].
pub fn barrier_step(
    barrier: Barrier,
    event: BarrierEvent,
    available: usize,
    now_ms: u64,
    timings: &BarrierTimings,
) -> (Barrier, ActuatorCommand) {
    barrier.step(event, available, now_ms, timings)
}
