use crate::lot::{SensorBit, SlotStatus};

/// Consecutive-sample filter for one slot's IR sensor.
///
/// A raw reading that disagrees with the confirmed status has to repeat
/// `k` times in a row before the status flips. Any agreeing sample resets
/// the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Debouncer {
    confirmed: SlotStatus,
    candidate: SensorBit,
    run_length: u32,
}

impl Debouncer {
    pub fn new(confirmed: SlotStatus) -> Self {
        Debouncer {
            confirmed,
            candidate: SensorBit::CLEAR,
            run_length: 0,
        }
    }

    pub fn confirmed(&self) -> SlotStatus {
        self.confirmed
    }

    pub fn candidate(&self) -> SensorBit {
        self.candidate
    }

    pub fn run_length(&self) -> u32 {
        self.run_length
    }

    /// Feeds one raw sample. Returns the new confirmed status when it flips.
    pub fn update(&mut self, raw: SensorBit, k: u32) -> Option<SlotStatus> {
        debug_assert!(k >= 1);
        if self.confirmed == SlotStatus::OutOfService {
            return None;
        }
        if raw != self.candidate {
            self.run_length = 0;
        }
        self.candidate = raw;
        if raw.status() == self.confirmed {
            self.run_length = 0;
            return None;
        }
        self.run_length += 1;
        if self.run_length >= k {
            self.confirmed = raw.status();
            self.run_length = 0;
            Some(self.confirmed)
        } else {
            None
        }
    }

    /// Takes the slot out of service, or puts it back as Vacant. A car that
    /// is really there is picked up again after `k` samples.
    pub fn set_out_of_service(&mut self, out: bool) -> bool {
        let target = if out {
            SlotStatus::OutOfService
        } else {
            SlotStatus::Vacant
        };
        if !out && self.confirmed != SlotStatus::OutOfService {
            return false;
        }
        let changed = self.confirmed != target;
        *self = Debouncer::new(target);
        changed
    }
}

/// Pure form of [`Debouncer::update`].
pub fn debounce_update(
    state: Debouncer,
    raw: SensorBit,
    k: u32,
) -> (Debouncer, Option<SlotStatus>) {
    let mut next = state;
    let change = next.update(raw, k);
    (next, change)
}
