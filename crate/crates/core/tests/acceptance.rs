//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::io::Write;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use parklot::controller::{Debouncer, TickOutput};
use parklot::hub::{self, Hub, HubConfig, LotEventRecord, LotView, RecordKind};
use parklot::lot::{LotConfig, LotSnapshot, OverrideMode, SensorBit, SlotStatus};
use parklot::report::summarize;
use parklot::sim::{Scenario, Simulation, SplitMix64};
use parklot::wire::{self, AckStatus, Command, Frame};
use sha2::{Digest, Sha256};

const SEEDS: [u64; 3] = [1, 42, 1337];
const HORIZON_MS: u64 = 1_000_000;

#[derive(Clone, Default)]
struct MemLog(Arc<Mutex<Vec<u8>>>);

impl Write for MemLog {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn seeded(seed: u64) -> Scenario {
    Scenario {
        seed,
        arrival_rate: 0.01,
        mean_stay_s: 300.0,
        horizon_ms: HORIZON_MS,
        flicker_p: 0.01,
        explicit_events: None,
    }
}

struct Run {
    log: Vec<u8>,
    ticks: Vec<(u64, TickOutput)>,
    final_view: LotView,
    records: Vec<LotEventRecord>,
    stats: parklot::sim::SimStats,
}

fn run_logged(config: &LotConfig, scenario: &Scenario) -> Run {
    let sink = MemLog::default();
    let hub = Hub::with_log(Simulation::hub_for(config), Box::new(sink.clone()));
    let mut sim = Simulation::new(config.clone(), scenario, hub).unwrap();
    let mut ticks = Vec::new();
    loop {
        let t = sim.now_ms();
        match sim.step().unwrap() {
            Some(out) => ticks.push((t, out)),
            None => break,
        }
    }
    let out = sim.finish().unwrap();
    let log = sink.0.lock().unwrap().clone();
    Run {
        log,
        ticks,
        final_view: out.final_view,
        records: out.records,
        stats: out.stats,
    }
}

type Outcome = Result<String, String>;

fn conservation() -> Outcome {
    let mut checked = 0;
    for seed in SEEDS {
        let run = run_logged(&LotConfig::default(), &seeded(seed));
        for (t, out) in &run.ticks {
            let mut snaps: Vec<LotSnapshot> = out.snapshot.iter().cloned().collect();
            if let Some(tel) = &out.telemetry {
                let (frame, _) = wire::decode_frame(&tel.bytes).map_err(|e| e.to_string())?;
                snaps.extend(frame.snapshot());
            }
            for s in snaps {
                let count = |w: SlotStatus| s.statuses().iter().filter(|x| **x == w).count();
                let total = count(SlotStatus::Vacant)
                    + count(SlotStatus::Occupied)
                    + count(SlotStatus::OutOfService);
                if total != 4 || s.available() != count(SlotStatus::Vacant) {
                    return Err(format!("seed {seed} t={t}: partition {total}"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} snapshots over seeds {SEEDS:?}, 0 violations"
    ))
}

fn barrier_gating() -> Outcome {
    // capacity / mean stay = 4 / 60 s; 1.0/s is 15x that
    let scenario = Scenario {
        seed: 7,
        arrival_rate: 1.0,
        mean_stay_s: 60.0,
        horizon_ms: 600_000,
        flicker_p: 0.0,
        explicit_events: None,
    };
    let run = run_logged(&LotConfig::default(), &scenario);
    let mut available = 4usize;
    let mut mode = OverrideMode::Auto;
    let mut violations = 0;
    let mut entries = 0;
    let mut denied = 0;
    for r in hub::read_jsonl(run.log.as_slice()).map_err(|e| e.to_string())? {
        match r.kind {
            RecordKind::AvailabilityChanged { to, .. } => available = to,
            RecordKind::BarrierChanged { to, .. } => mode = to.override_mode,
            RecordKind::VehicleParked { .. } => {
                entries += 1;
                if available == 0 && mode == OverrideMode::Auto {
                    violations += 1;
                }
            }
            RecordKind::EntryDenied { .. } => denied += 1,
            _ => {}
        }
    }
    let deny_signals = run.ticks.iter().filter(|(_, o)| o.denied()).count() as u64;
    if violations > 0 {
        return Err(format!("{violations} entries while full"));
    }
    if denied == 0
        || run.stats.denied_count != denied
        || summarize(&run.records).denied_count != denied
    {
        return Err(format!(
            "denied: log {denied}, stats {}",
            run.stats.denied_count
        ));
    }
    Ok(format!(
        "{entries} entries, 0 while full; denied_count {denied} (deny signals {deny_signals})"
    ))
}

fn random_frame(rng: &mut SplitMix64) -> Frame {
    let lot = rng.next_u64() as u8;
    let seq = rng.next_u64() as u16;
    let tick = rng.next_u64();
    match rng.next_u64() % 4 {
        0 => Frame::telemetry(&common::random_snapshot(rng)),
        1 => Frame {
            lot_id: lot,
            seq,
            tick_ms: tick,
            body: wire::FrameBody::Heartbeat,
        },
        2 => {
            let cmd = if rng.next_u64().is_multiple_of(2) {
                Command::BarrierOverride {
                    mode: [
                        OverrideMode::Auto,
                        OverrideMode::ForcedOpen,
                        OverrideMode::ForcedClosed,
                    ][(rng.next_u64() % 3) as usize],
                }
            } else {
                Command::SlotService {
                    slot: 1 + (rng.next_u64() % 64) as u8,
                    out_of_service: rng.next_u64() % 2 == 1,
                }
            };
            Frame {
                lot_id: lot,
                seq,
                tick_ms: tick,
                body: wire::FrameBody::Command(cmd),
            }
        }
        _ => Frame {
            lot_id: lot,
            seq,
            tick_ms: tick,
            body: wire::FrameBody::CommandAck(if rng.next_u64().is_multiple_of(2) {
                AckStatus::Applied
            } else {
                AckStatus::Rejected
            }),
        },
    }
}

fn protocol() -> Outcome {
    let mut rng = SplitMix64::new(0x5EED);
    for i in 0..10_000 {
        let f = random_frame(&mut rng);
        let bytes = wire::encode_frame(&f).map_err(|e| e.to_string())?;
        let (back, used) = wire::decode_frame(&bytes).map_err(|e| format!("frame {i}: {e}"))?;
        if back != f || used != bytes.len() {
            return Err(format!("frame {i} did not roundtrip"));
        }
    }
    let corpus = common::load_corpus();
    if corpus.len() < 100 {
        return Err(format!("corpus has {} frames", corpus.len()));
    }
    let mut flips = 0;
    for (i, f) in corpus.iter().enumerate() {
        for bit in 0..f.len() * 8 {
            let mut bad = f.clone();
            bad[bit / 8] ^= 1 << (bit % 8);
            if wire::decode_frame(&bad).is_ok() {
                return Err(format!("corpus frame {i}: flip of bit {bit} accepted"));
            }
            flips += 1;
        }
    }
    let check = wire::crc16(b"123456789");
    if check != 0x29B1 {
        return Err(format!("crc16 check value {check:#06X}"));
    }
    Ok(format!(
        "10000 roundtrips exact; {flips} single-bit flips over {} frames rejected; crc16(\"123456789\") = 0x29B1",
        corpus.len()
    ))
}

fn event_sourcing() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for seed in SEEDS {
        let run = run_logged(&LotConfig::default(), &seeded(seed));
        let path = dir.path().join(format!("seed{seed}.jsonl"));
        std::fs::write(&path, &run.log).map_err(|e| e.to_string())?;
        let file = std::io::BufReader::new(std::fs::File::open(&path).map_err(|e| e.to_string())?);
        let views = hub::replay_jsonl(file, &[]).map_err(|e| format!("seed {seed}: {e}"))?;
        if views.get(&1) != Some(&run.final_view) {
            return Err(format!("seed {seed}: replayed view differs from live view"));
        }
    }
    Ok(format!(
        "replayed views equal live views for seeds {SEEDS:?}"
    ))
}

fn determinism() -> Outcome {
    let hash = |seed| {
        let run = run_logged(&LotConfig::default(), &seeded(seed));
        (Sha256::digest(&run.log), run.log.len())
    };
    let (a, len) = hash(42);
    let (b, _) = hash(42);
    let (c, _) = hash(43);
    if a != b {
        return Err("same seed gave different logs".into());
    }
    if a == c {
        return Err("different seeds gave identical logs".into());
    }
    Ok(format!("sha256 {} over {len} bytes, twice", hex::encode(a)))
}

fn debounce() -> Outcome {
    let mut rng = SplitMix64::new(0xDEB0);
    let mut cases = 0;
    for _ in 0..2000 {
        let k = 2 + (rng.next_u64() % 4) as u32;
        let start = if rng.next_u64().is_multiple_of(2) {
            SlotStatus::Vacant
        } else {
            SlotStatus::Occupied
        };
        let mut d = Debouncer::default();
        if start == SlotStatus::Occupied {
            for _ in 0..k {
                d.update(SensorBit::BLOCKED, k);
            }
        }
        if d.confirmed() != start {
            return Err("could not establish the starting state".into());
        }
        let agree = SensorBit::from(start == SlotStatus::Occupied);
        let len = 1 + (rng.next_u64() % 200) as usize;
        let mut run = 0;
        for _ in 0..len {
            // disagree only while the current run is shorter than k - 1
            let bit = if run < k - 1 && rng.next_u64().is_multiple_of(2) {
                run += 1;
                agree.inverted()
            } else {
                run = 0;
                agree
            };
            d.update(bit, k);
            if d.confirmed() != start {
                return Err(format!("k={k}: status flipped without a full run"));
            }
        }
        cases += 1;
    }

    let config = LotConfig {
        debounce_k: 1,
        ..LotConfig::default()
    };
    let scenario = Scenario {
        flicker_p: 0.0,
        ..seeded(42)
    };
    let mut sim = Simulation::new(
        config.clone(),
        &scenario,
        Hub::new(Simulation::hub_for(&config)),
    )
    .map_err(|e| e.to_string())?;
    let mut samples = 0;
    while sim.step().map_err(|e| e.to_string())?.is_some() {
        let seen: Vec<bool> = sim
            .controller()
            .statuses()
            .iter()
            .map(|s| *s == SlotStatus::Occupied)
            .collect();
        if seen != sim.world().occupancy() {
            return Err(format!(
                "k=1 controller disagrees with truth at {} ms",
                sim.now_ms()
            ));
        }
        samples += 1;
    }
    Ok(format!(
        "{cases} adversarial sequences held; k=1 matched truth at {samples} samples"
    ))
}

fn lcd_goldens() -> Outcome {
    let mut names = Vec::new();
    for (name, snap) in common::lcd_cases() {
        let text = parklot::controller::render_lcd(&snap)
            .map_err(|e| e.to_string())?
            .to_text();
        let golden =
            std::fs::read_to_string(common::lcd_path(name)).map_err(|e| format!("{name}: {e}"))?;
        if text != golden {
            return Err(format!("{name}: rendered {text:?}, golden {golden:?}"));
        }
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != 2 || lines.iter().any(|l| l.len() != 16) {
            return Err(format!("{name}: not 2x16"));
        }
        names.push(name);
    }
    Ok(format!(
        "{} goldens byte-identical: {}",
        names.len(),
        names.join(", ")
    ))
}

fn hub_idempotency() -> Outcome {
    let run = run_logged(&LotConfig::default(), &seeded(1337));
    let frames: Vec<(u64, Vec<u8>)> = run
        .ticks
        .iter()
        .flat_map(|(t, o)| o.telemetry.iter().map(move |tel| (*t, tel.bytes.clone())))
        .collect();
    let once = Hub::new(HubConfig::default());
    let twice = Hub::new(HubConfig::default());
    for (t, f) in &frames {
        once.ingest_frame(f, *t);
        twice.ingest_frame(f, *t);
        twice.ingest_frame(f, *t);
    }
    let (v1, v2) = (once.snapshot(1), twice.snapshot(1));
    let (r1, r2) = (once.records(1).unwrap(), twice.records(1).unwrap());
    if v1 != v2 || r1 != r2 {
        return Err("double delivery changed state or log".into());
    }
    if v1.map_err(|e| e.to_string())?.snapshot != run.final_view.snapshot {
        return Err("frame-only hub disagrees with the simulation's hub".into());
    }
    Ok(format!(
        "{} frames delivered twice; same view, log length {} both ways",
        frames.len(),
        r1.len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    // libtest-style flags (--nocapture, filters) are accepted and ignored
    let criteria: [Criterion; 8] = [
        ("conservation", conservation),
        ("barrier gating", barrier_gating),
        ("protocol", protocol),
        ("event sourcing", event_sourcing),
        ("determinism", determinism),
        ("debounce", debounce),
        ("lcd goldens", lcd_goldens),
        ("hub idempotency", hub_idempotency),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {name}: {detail} ({:.1}s)", t.elapsed().as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
