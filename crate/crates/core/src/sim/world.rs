use std::collections::VecDeque;

use super::rng::SplitMix64;
use super::scenario::{Scenario, VehicleEvent, VehicleOutcome};
use crate::lot::{BarrierMotion, BarrierState, SensorBit, SlotId};

/// How long a queued driver waits at the barrier before giving up.
pub const BALK_TIMEOUT_MS: u64 = 30_000;

// Keeps sensor noise independent of the traffic stream for the same seed.
const NOISE_STREAM: u64 = 0xD1B5_4A32_D192_ED03;

pub type VehicleId = u32;

/// Ground-truth happenings in the simulated lot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimEvent {
    Arrived { vehicle: VehicleId, stay_ms: u64 },
    Parked { vehicle: VehicleId, slot: SlotId },
    Departed { vehicle: VehicleId, slot: SlotId },
    Denied { vehicle: VehicleId },
    Balked { vehicle: VehicleId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Occupant {
    vehicle: VehicleId,
    since_ms: u64,
    until_ms: u64,
}

/// What the sensors saw during one sample period.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SensorReadout {
    pub raw: Vec<SensorBit>,
    pub entry_detected: bool,
    pub vehicle_passed: bool,
    pub events: Vec<SimEvent>,
}

/// Ground truth for the simulated lot: who is parked where, who is queued
/// at the barrier, and the noisy sensors that observe it.
#[derive(Debug, Clone)]
pub struct World {
    vehicles: Vec<VehicleEvent>,
    scheduled: usize,
    next_scheduled: usize,
    injected: VecDeque<VehicleId>,
    queue: VecDeque<VehicleId>,
    slots: Vec<Option<Occupant>>,
    flicker_p: f64,
    noise: SplitMix64,
    balk_timeout_ms: u64,
    slot_occupied_ms: Vec<u64>,
    completed_stays_ms: Vec<u64>,
    arrived: u64,
}

impl World {
    pub fn new(slot_count: usize, scenario: &Scenario) -> Self {
        let vehicles = scenario.events();
        World {
            scheduled: vehicles.len(),
            next_scheduled: 0,
            injected: VecDeque::new(),
            vehicles,
            queue: VecDeque::new(),
            slots: vec![None; slot_count],
            flicker_p: scenario.flicker_p,
            noise: SplitMix64::new(scenario.seed ^ NOISE_STREAM),
            balk_timeout_ms: BALK_TIMEOUT_MS,
            slot_occupied_ms: vec![0; slot_count],
            completed_stays_ms: Vec::new(),
            arrived: 0,
        }
    }

    pub fn vehicles(&self) -> &[VehicleEvent] {
        &self.vehicles
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn occupancy(&self) -> Vec<bool> {
        self.slots.iter().map(Option::is_some).collect()
    }

    pub fn arrived(&self) -> u64 {
        self.arrived
    }

    /// Adds a driver who shows up at `now_ms` and joins the queue on the
    /// next step.
    pub fn inject_arrival(&mut self, now_ms: u64, stay_ms: u64) -> VehicleId {
        let id = self.vehicles.len() as VehicleId;
        self.vehicles
            .push(VehicleEvent::new(now_ms, stay_ms.max(1)));
        self.injected.push_back(id);
        id
    }

    /// Sends the car parked in `slot` away early.
    pub fn force_departure(&mut self, slot: SlotId, now_ms: u64) -> Option<SimEvent> {
        let occ = self.slots.get_mut(slot.position())?.take()?;
        Some(self.depart(slot, occ, now_ms))
    }

    fn depart(&mut self, slot: SlotId, occ: Occupant, now_ms: u64) -> SimEvent {
        let stayed = now_ms - occ.since_ms;
        self.slot_occupied_ms[slot.position()] += stayed;
        self.completed_stays_ms.push(stayed);
        SimEvent::Departed {
            vehicle: occ.vehicle,
            slot,
        }
    }

    /// Advances ground truth to `now_ms` given the barrier the controller
    /// currently shows and which slots are out of service, then samples the
    /// sensors.
    pub fn step(
        &mut self,
        now_ms: u64,
        barrier: BarrierState,
        out_of_service: &[bool],
    ) -> SensorReadout {
        let mut events = Vec::new();

        for pos in 0..self.slots.len() {
            if let Some(occ) = self.slots[pos] {
                if occ.until_ms <= now_ms {
                    self.slots[pos] = None;
                    events.push(self.depart(SlotId::from_position(pos), occ, now_ms));
                }
            }
        }

        while self.next_scheduled < self.scheduled
            && self.vehicles[self.next_scheduled].at_ms <= now_ms
        {
            let id = self.next_scheduled as VehicleId;
            self.next_scheduled += 1;
            self.join(id, &mut events);
        }
        while let Some(id) = self.injected.pop_front() {
            self.join(id, &mut events);
        }

        let timeout = self.balk_timeout_ms;
        let vehicles = &mut self.vehicles;
        self.queue.retain(|&id| {
            let v = &mut vehicles[id as usize];
            if now_ms.saturating_sub(v.at_ms) > timeout {
                v.outcome = Some(VehicleOutcome::Balked);
                events.push(SimEvent::Balked { vehicle: id });
                false
            } else {
                true
            }
        });

        let mut vehicle_passed = false;
        if barrier.state == BarrierMotion::Open {
            if let Some(&head) = self.queue.front() {
                let free = (0..self.slots.len()).find(|&p| {
                    self.slots[p].is_none() && !out_of_service.get(p).copied().unwrap_or(false)
                });
                if let Some(pos) = free {
                    self.queue.pop_front();
                    let slot = SlotId::from_position(pos);
                    let v = &mut self.vehicles[head as usize];
                    v.outcome = Some(VehicleOutcome::Parked(slot));
                    self.slots[pos] = Some(Occupant {
                        vehicle: head,
                        since_ms: now_ms,
                        until_ms: now_ms + v.stay_ms,
                    });
                    events.push(SimEvent::Parked {
                        vehicle: head,
                        slot,
                    });
                    vehicle_passed = true;
                }
            }
        }

        let raw = (0..self.slots.len())
            .map(|p| {
                let truth = SensorBit::from(self.slots[p].is_some());
                if self.flicker_p > 0.0 && self.noise.next_f64() < self.flicker_p {
                    truth.inverted()
                } else {
                    truth
                }
            })
            .collect();

        SensorReadout {
            raw,
            entry_detected: !self.queue.is_empty(),
            vehicle_passed,
            events,
        }
    }

    fn join(&mut self, id: VehicleId, events: &mut Vec<SimEvent>) {
        self.arrived += 1;
        self.queue.push_back(id);
        events.push(SimEvent::Arrived {
            vehicle: id,
            stay_ms: self.vehicles[id as usize].stay_ms,
        });
    }

    /// The head of the queue is turned away when the controller signals a
    /// denial.
    pub fn deny_head(&mut self) -> Option<SimEvent> {
        let id = self.queue.pop_front()?;
        self.vehicles[id as usize].outcome = Some(VehicleOutcome::Denied);
        Some(SimEvent::Denied { vehicle: id })
    }

    pub fn count_outcome(&self, pred: impl Fn(&VehicleOutcome) -> bool) -> u64 {
        self.vehicles
            .iter()
            .filter(|v| v.outcome.as_ref().is_some_and(&pred))
            .count() as u64
    }

    /// Per-slot occupied milliseconds up to `horizon_ms`, counting cars still
    /// parked at the horizon.
    pub fn slot_occupied_ms(&self, horizon_ms: u64) -> Vec<u64> {
        self.slots
            .iter()
            .zip(&self.slot_occupied_ms)
            .map(|(occ, &done)| done + occ.map_or(0, |o| horizon_ms.saturating_sub(o.since_ms)))
            .collect()
    }

    pub fn completed_stays_ms(&self) -> &[u64] {
        &self.completed_stays_ms
    }
}
