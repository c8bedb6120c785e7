use std::collections::BTreeMap;

use ampcmp::gdf_io::{read_bundle, read_gdf, write_bundle, write_gdf, GdfSampleType};
use ampcmp::synth::{generate_oddball_session, virtual_amplifier, AmpConfig, OddballConfig};
use ampcmp::{EventCode, EventList, Recording};

fn small_session() -> (Recording, EventList) {
    let (source, events) = generate_oddball_session(&OddballConfig {
        n_letters: 2,
        seed: 21,
        ..OddballConfig::default()
    })
    .unwrap();
    (virtual_amplifier(&source, &AmpConfig::consumer(), 4).unwrap(), events)
}

fn code_maps() -> (BTreeMap<EventCode, u16>, BTreeMap<u16, EventCode>) {
    let forward: BTreeMap<EventCode, u16> =
        [(EventCode::Target, 0x300), (EventCode::Distractor, 0x301)].into_iter().collect();
    let back = forward.iter().map(|(c, v)| (*v, *c)).collect();
    (forward, back)
}

#[test]
fn bundle_roundtrip_is_bit_identical() {
    let (rec, events) = small_session();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path(), &rec, &events).unwrap();
    let (back, back_events) = read_bundle(dir.path()).unwrap();
    assert_eq!(back.sample_rate_hz(), rec.sample_rate_hz());
    assert_eq!(back.channel_labels(), rec.channel_labels());
    assert_eq!(back.samples(), rec.samples());
    assert_eq!(back_events, events);
}

#[test]
fn gdf_float_roundtrip_from_bundle() {
    let (rec, events) = small_session();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&dir.path().join("b"), &rec, &events).unwrap();
    let (rec, events) = read_bundle(&dir.path().join("b")).unwrap();
    let (fwd, back) = code_maps();
    let path = dir.path().join("s.gdf");
    write_gdf(&path, &rec, &events, &fwd, GdfSampleType::Float32).unwrap();
    let f = read_gdf(&path, &back).unwrap();
    assert_eq!(f.recording.samples(), rec.samples());
    assert_eq!(f.recording.channel_labels(), rec.channel_labels());
    assert_eq!(f.unmapped_events, 0);
    assert_eq!(f.events.len(), events.len());
    let dt = 1.0 / rec.sample_rate_hz();
    for (a, b) in f.events.iter().zip(events.iter()) {
        assert_eq!(a.code, b.code);
        assert!((a.onset_s - b.onset_s).abs() <= 0.5 * dt + 1e-12);
    }
}

#[test]
fn gdf_int16_within_one_step() {
    let (rec, events) = small_session();
    let (fwd, back) = code_maps();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.gdf");
    write_gdf(&path, &rec, &events, &fwd, GdfSampleType::Int16).unwrap();
    let got = read_gdf(&path, &back).unwrap().recording;
    for (a, b) in rec.samples().outer_iter().zip(got.samples().outer_iter()) {
        let (lo, hi) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let step = (hi - lo) / 65535.0;
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= step, "{x} vs {y}, step {step}");
        }
    }
}
