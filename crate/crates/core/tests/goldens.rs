//! Checked-in fixtures: frame bytes with decode sidecars, the bit-flip
//! corpus, and LCD frames. Run with `UPDATE_GOLDENS=1` to rewrite them.

mod common;

use std::fs;

use common::*;
use parklot::controller::render_lcd;
use parklot::wire::{self, DecodedFrame};

fn crc_bitwise(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bytes {
        crc ^= (b as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

#[test]
fn reference_telemetry_bytes() {
    let body = hex::decode("A5010101000700000000000003E8".to_owned() + "0405000002").unwrap();
    let crc = crc_bitwise(&body);
    assert_eq!(crc, 0xA41A);
    let mut expected = body;
    expected.extend(crc.to_be_bytes());
    let golden = &golden_frames()[0];
    assert_eq!(golden.0, "telemetry_mixed");
    assert_eq!(golden.1, expected);
    assert_eq!(expected.len(), 21);
}

#[test]
fn frame_fixtures() {
    let dir = fixtures_dir().join("frames");
    if updating() {
        fs::create_dir_all(&dir).unwrap();
    }
    for (name, bytes) in golden_frames() {
        let bin = dir.join(format!("{name}.bin"));
        let sidecar = dir.join(format!("{name}.json"));
        let decoded = wire::decode_frame_verbose(&bytes).unwrap();
        if updating() {
            fs::write(&bin, &bytes).unwrap();
            let json = serde_json::to_string_pretty(&decoded).unwrap();
            fs::write(&sidecar, json + "\n").unwrap();
        }
        let on_disk = fs::read(&bin).unwrap();
        assert_eq!(on_disk, bytes, "{name}.bin differs from the encoder");
        let expected: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&sidecar).unwrap()).unwrap();
        let got = serde_json::to_value(wire::decode_frame_verbose(&on_disk).unwrap()).unwrap();
        assert_eq!(got, expected, "{name}.json");
        let back: DecodedFrame = serde_json::from_value(expected).unwrap();
        assert_eq!(wire::encode_frame(&back.frame).unwrap(), on_disk);
    }
}

#[test]
fn corpus_fixture() {
    let generated = generate_corpus();
    if updating() {
        let text: String = generated
            .iter()
            .map(|f| hex::encode_upper(f) + "\n")
            .collect();
        fs::write(corpus_path(), text).unwrap();
    }
    let corpus = load_corpus();
    assert_eq!(corpus.len(), 100);
    assert_eq!(corpus, generated);
    for f in &corpus {
        let (_, used) = wire::decode_frame(f).unwrap();
        assert_eq!(used, f.len());
    }
}

#[test]
fn lcd_fixtures() {
    let hand = [
        ("all_vacant", "1:E 2:E 3:E 4:E \nAvailable: 4    \n"),
        ("all_full", "1:F 2:F 3:F 4:F \nLOT FULL        \n"),
        ("mixed", "1:F 2:E 3:F 4:E \nAvailable: 2    \n"),
        ("one_out_of_service", "1:F 2:S 3:F 4:F \nAvailable: 0    \n"),
        ("fresh_boot", "1:E 2:E 3:E 4:E \nAvailable: 4    \n"),
        ("barrier_denying", "1:F 2:F 3:E 4:F \nAvailable: 1    \n"),
    ];
    let cases = lcd_cases();
    assert_eq!(cases.len(), hand.len());
    if updating() {
        fs::create_dir_all(fixtures_dir().join("lcd")).unwrap();
    }
    for ((name, snap), (hand_name, hand_text)) in cases.iter().zip(hand) {
        assert_eq!(*name, hand_name);
        let text = render_lcd(snap).unwrap().to_text();
        assert_eq!(text, hand_text, "{name}");
        if updating() {
            fs::write(lcd_path(name), &text).unwrap();
        }
        assert_eq!(
            fs::read_to_string(lcd_path(name)).unwrap(),
            text,
            "{name}.txt"
        );
    }
}
