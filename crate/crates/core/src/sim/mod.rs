//! Seeded discrete-time simulation of one lot: Poisson traffic and noisy
//! sensors drive a real [`Controller`], whose frames go through a real
//! [`Hub`]. Nothing is shortcut, so a simulated log looks exactly like one
//! recorded from hardware, plus the ground-truth vehicle records.

mod rng;
mod scenario;
mod world;

use std::sync::mpsc;

use thiserror::Error;

pub use rng::SplitMix64;
pub use scenario::{
    generate_scenario_events, Scenario, ScenarioError, ScheduledArrival, VehicleEvent,
    VehicleOutcome,
};
pub use world::{SensorReadout, SimEvent, VehicleId, World, BALK_TIMEOUT_MS};

use crate::controller::{Controller, ControllerError, TickInput, TickOutput};
use crate::hub::{Hub, HubConfig, HubError, IngestResult, LotEventRecord, LotView, RecordKind};
use crate::lot::{ConfigError, LotConfig, SlotId, SlotStatus};
use crate::report::ReportSummary;

/// Summary the simulator computes from its own ground truth. The report
/// command computes the same structure from the log alone.
pub type SimStats = ReportSummary;

/// Operator actions injected into a running simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimControl {
    Arrive { stay_ms: u64 },
    Depart { slot: u8 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Hub(#[from] HubError),
    #[error("hub rejected a controller frame: {0}")]
    Ingest(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub records: Vec<LotEventRecord>,
    pub final_view: LotView,
    pub stats: SimStats,
}

pub struct Simulation {
    config: LotConfig,
    horizon_ms: u64,
    controller: Controller,
    world: World,
    hub: Hub,
    control: Option<mpsc::Receiver<SimControl>>,
    now_ms: u64,
}

impl Simulation {
    /// Registers the lot with `hub` at t = 0.
    pub fn new(config: LotConfig, scenario: &Scenario, hub: Hub) -> Result<Self, SimError> {
        config.validate()?;
        scenario.validate()?;
        hub.register_lot(config.lot_id, config.slot_count, 0)?;
        Ok(Simulation {
            horizon_ms: scenario.horizon_ms,
            controller: Controller::new(config.clone())?,
            world: World::new(config.slot_count, scenario),
            hub,
            control: None,
            now_ms: 0,
            config,
        })
    }

    /// Hub configured to match the lot's heartbeat interval.
    pub fn hub_for(config: &LotConfig) -> HubConfig {
        HubConfig {
            heartbeat_ms: config.heartbeat_ms,
            ..HubConfig::default()
        }
    }

    /// Accepts operator actions from now on and exposes them to the hub's
    /// HTTP layer.
    pub fn enable_control(&mut self) -> mpsc::Sender<SimControl> {
        let (tx, rx) = mpsc::channel();
        self.control = Some(rx);
        self.hub.set_sim_control(tx.clone());
        tx
    }

    pub fn hub(&self) -> &Hub {
        &self.hub
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn horizon_ms(&self) -> u64 {
        self.horizon_ms
    }

    pub fn is_done(&self) -> bool {
        self.now_ms >= self.horizon_ms
    }

    fn ingest(&self, bytes: &[u8], now: u64) -> Result<(), SimError> {
        match self.hub.ingest_frame(bytes, now) {
            IngestResult::Accepted(_) | IngestResult::Duplicate => Ok(()),
            other => Err(SimError::Ingest(format!("{other:?}"))),
        }
    }

    /// Runs one sample period. Returns `None` once the horizon is reached.
    pub fn step(&mut self) -> Result<Option<TickOutput>, SimError> {
        if self.is_done() {
            return Ok(None);
        }
        let t = self.now_ms;
        let lot_id = self.config.lot_id;

        for bytes in self.hub.take_outbound(lot_id) {
            if let Err(e) = self.controller.accept_frame(&bytes) {
                log::warn!("dropping undecodable command frame: {e}");
            }
        }

        let mut injected = Vec::new();
        if let Some(rx) = &self.control {
            while let Ok(action) = rx.try_recv() {
                match action {
                    SimControl::Arrive { stay_ms } => {
                        self.world.inject_arrival(t, stay_ms);
                    }
                    SimControl::Depart { slot } => {
                        let ev = SlotId::new(slot as usize, self.config.slot_count)
                            .ok()
                            .and_then(|s| self.world.force_departure(s, t));
                        injected.extend(ev);
                    }
                }
            }
        }

        let oos: Vec<bool> = self
            .controller
            .statuses()
            .iter()
            .map(|s| *s == SlotStatus::OutOfService)
            .collect();
        let readout = self.world.step(t, self.controller.barrier(), &oos);
        injected.extend(readout.events.iter().copied());
        if !injected.is_empty() {
            self.hub.append(
                lot_id,
                injected.into_iter().map(RecordKind::from).collect(),
                t,
            )?;
        }

        let out = self.controller.tick(&TickInput {
            now_ms: t,
            raw: readout.raw,
            entry_detected: readout.entry_detected,
            vehicle_passed: readout.vehicle_passed,
        })?;
        for frame in out.frames() {
            self.ingest(frame, t)?;
        }
        if out.denied() {
            if let Some(ev) = self.world.deny_head() {
                self.hub.append(lot_id, vec![RecordKind::from(ev)], t)?;
            }
        }
        self.hub.check_liveness(t);

        self.now_ms = t + self.config.sample_period_ms;
        Ok(Some(out))
    }

    /// Runs to the horizon and closes the log.
    pub fn run(mut self) -> Result<SimOutcome, SimError> {
        while self.step()?.is_some() {}
        self.finish()
    }

    /// Appends the closing record and computes ground-truth statistics.
    pub fn finish(self) -> Result<SimOutcome, SimError> {
        let lot_id = self.config.lot_id;
        self.hub.append(
            lot_id,
            vec![RecordKind::SimFinished {
                horizon_ms: self.horizon_ms,
                slot_count: self.config.slot_count,
            }],
            self.horizon_ms,
        )?;
        Ok(SimOutcome {
            records: self.hub.records(lot_id)?,
            final_view: self.hub.snapshot(lot_id)?,
            stats: self.stats(),
        })
    }

    pub fn stats(&self) -> SimStats {
        let w = &self.world;
        ReportSummary::from_parts(
            self.horizon_ms,
            w.arrived(),
            w.count_outcome(|o| matches!(o, VehicleOutcome::Parked(_))),
            w.count_outcome(|o| *o == VehicleOutcome::Denied),
            w.count_outcome(|o| *o == VehicleOutcome::Balked),
            w.completed_stays_ms(),
            w.slot_occupied_ms(self.horizon_ms),
        )
    }
}

/// Runs a scenario start to finish against an in-memory hub.
pub fn run_simulation(config: LotConfig, scenario: &Scenario) -> Result<SimOutcome, SimError> {
    let hub = Hub::new(Simulation::hub_for(&config));
    Simulation::new(config, scenario, hub)?.run()
}
