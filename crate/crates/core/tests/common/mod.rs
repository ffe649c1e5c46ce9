#![allow(dead_code)]

use std::path::PathBuf;

use parklot::lot::{BarrierMotion, BarrierState, LotSnapshot, OverrideMode, SlotStatus};
use parklot::sim::SplitMix64;
use parklot::wire::{self, AckStatus, Command};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn updating() -> bool {
    std::env::var_os("UPDATE_GOLDENS").is_some_and(|v| v == "1")
}

pub fn barrier(state: BarrierMotion, mode: OverrideMode) -> BarrierState {
    BarrierState::new(state, mode)
}

/// Named single frames checked in under `fixtures/frames`.
pub fn golden_frames() -> Vec<(&'static str, Vec<u8>)> {
    use SlotStatus::*;
    let closed = BarrierState::default();
    let mut nine = vec![Vacant; 9];
    nine[0] = Occupied;
    nine[8] = Occupied;
    nine[4] = OutOfService;
    let mut wide = vec![Occupied; 64];
    wide[63] = Vacant;
    wide[10] = OutOfService;
    vec![
        (
            "telemetry_mixed",
            wire::encode_telemetry(&LotSnapshot::new(
                1,
                1000,
                7,
                vec![Occupied, Vacant, Occupied, Vacant],
                closed,
            ))
            .unwrap(),
        ),
        (
            "telemetry_all_vacant",
            wire::encode_telemetry(&LotSnapshot::initial(1, 4)).unwrap(),
        ),
        (
            "telemetry_nine_slots",
            wire::encode_telemetry(&LotSnapshot::new(
                3,
                86_400_000,
                513,
                nine,
                barrier(BarrierMotion::Opening, OverrideMode::Auto),
            ))
            .unwrap(),
        ),
        (
            "telemetry_64_forced_open",
            wire::encode_telemetry(&LotSnapshot::new(
                200,
                u64::MAX,
                65_535,
                wide,
                barrier(BarrierMotion::Open, OverrideMode::ForcedOpen),
            ))
            .unwrap(),
        ),
        (
            "telemetry_forced_closed",
            wire::encode_telemetry(&LotSnapshot::new(
                1,
                42_000,
                12,
                vec![Occupied, Occupied, Vacant, OutOfService],
                barrier(BarrierMotion::Closed, OverrideMode::ForcedClosed),
            ))
            .unwrap(),
        ),
        ("heartbeat", wire::encode_heartbeat(1, 7, 5000)),
        (
            "command_forced_open",
            wire::encode_command(
                1,
                3,
                12_345,
                Command::BarrierOverride {
                    mode: OverrideMode::ForcedOpen,
                },
            )
            .unwrap(),
        ),
        (
            "command_slot_service",
            wire::encode_command(
                1,
                4,
                12_400,
                Command::SlotService {
                    slot: 3,
                    out_of_service: true,
                },
            )
            .unwrap(),
        ),
        (
            "ack_applied",
            wire::encode_ack(1, 3, 12_500, AckStatus::Applied),
        ),
        (
            "ack_rejected",
            wire::encode_ack(1, 4, 12_600, AckStatus::Rejected),
        ),
    ]
}

fn pick<T: Copy>(rng: &mut SplitMix64, xs: &[T]) -> T {
    xs[(rng.next_u64() % xs.len() as u64) as usize]
}

pub fn random_snapshot(rng: &mut SplitMix64) -> LotSnapshot {
    let n = 1 + (rng.next_u64() % 64) as usize;
    let statuses = (0..n)
        .map(|_| {
            pick(
                rng,
                &[
                    SlotStatus::Vacant,
                    SlotStatus::Occupied,
                    SlotStatus::OutOfService,
                ],
            )
        })
        .collect();
    let b = barrier(
        pick(
            rng,
            &[
                BarrierMotion::Closed,
                BarrierMotion::Opening,
                BarrierMotion::Open,
                BarrierMotion::Closing,
            ],
        ),
        pick(
            rng,
            &[
                OverrideMode::Auto,
                OverrideMode::ForcedOpen,
                OverrideMode::ForcedClosed,
            ],
        ),
    );
    LotSnapshot::new(
        rng.next_u64() as u8,
        rng.next_u64(),
        rng.next_u64() as u16,
        statuses,
        b,
    )
}

/// 100 frames of every kind, deterministic.
pub fn generate_corpus() -> Vec<Vec<u8>> {
    let mut rng = SplitMix64::new(0xC0FF_EE00);
    (0..100)
        .map(|i| match i % 10 {
            0..=5 => wire::encode_telemetry(&random_snapshot(&mut rng)).unwrap(),
            6 => {
                wire::encode_heartbeat(rng.next_u64() as u8, rng.next_u64() as u16, rng.next_u64())
            }
            7 => {
                let mode = pick(
                    &mut rng,
                    &[
                        OverrideMode::Auto,
                        OverrideMode::ForcedOpen,
                        OverrideMode::ForcedClosed,
                    ],
                );
                wire::encode_command(
                    rng.next_u64() as u8,
                    rng.next_u64() as u16,
                    rng.next_u64(),
                    Command::BarrierOverride { mode },
                )
                .unwrap()
            }
            8 => wire::encode_command(
                rng.next_u64() as u8,
                rng.next_u64() as u16,
                rng.next_u64(),
                Command::SlotService {
                    slot: 1 + (rng.next_u64() % 64) as u8,
                    out_of_service: rng.next_u64().is_multiple_of(2),
                },
            )
            .unwrap(),
            _ => wire::encode_ack(
                rng.next_u64() as u8,
                rng.next_u64() as u16,
                rng.next_u64(),
                pick(&mut rng, &[AckStatus::Applied, AckStatus::Rejected]),
            ),
        })
        .collect()
}

pub fn corpus_path() -> PathBuf {
    fixtures_dir().join("frames").join("corpus.hex")
}

/// The checked-in corpus, one hex frame per line.
pub fn load_corpus() -> Vec<Vec<u8>> {
    std::fs::read_to_string(corpus_path())
        .expect("corpus fixture present")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| hex::decode(l.trim()).expect("corpus line is hex"))
        .collect()
}

/// The six display states with checked-in goldens.
pub fn lcd_cases() -> Vec<(&'static str, LotSnapshot)> {
    use SlotStatus::*;
    let auto = BarrierState::default();
    vec![
        (
            "all_vacant",
            LotSnapshot::new(1, 5_000, 3, vec![Vacant; 4], auto),
        ),
        (
            "all_full",
            LotSnapshot::new(1, 9_000, 8, vec![Occupied; 4], auto),
        ),
        (
            "mixed",
            LotSnapshot::new(1, 1_000, 7, vec![Occupied, Vacant, Occupied, Vacant], auto),
        ),
        (
            "one_out_of_service",
            LotSnapshot::new(
                1,
                2_000,
                4,
                vec![Occupied, OutOfService, Occupied, Occupied],
                auto,
            ),
        ),
        ("fresh_boot", LotSnapshot::initial(1, 4)),
        (
            "barrier_denying",
            LotSnapshot::new(
                1,
                7_700,
                11,
                vec![Occupied, Occupied, Vacant, Occupied],
                barrier(BarrierMotion::Closed, OverrideMode::ForcedClosed),
            ),
        ),
    ]
}

pub fn lcd_path(name: &str) -> PathBuf {
    fixtures_dir().join("lcd").join(format!("{name}.txt"))
}
