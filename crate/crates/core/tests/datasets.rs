use std::collections::{BTreeMap, HashSet};
use std::io::Cursor;

use chicgrasp_core::datasets::{
    compute_norm_stats, generate_demos, record_episode, replay_demo, sample_windows, DemoSet, DimStats,
    Mode, WindowIndex, DEMO_FORMAT_VERSION, MIN_SPAN,
};
use chicgrasp_core::rng::{stream, trial_seed, Stream};
use chicgrasp_core::runtime::ExpertSource;
use chicgrasp_core::{Config, Error};
use proptest::prelude::*;

fn small_set(n: usize, seed: u64) -> DemoSet {
    generate_demos(n, &[1, 2, 3], seed, &Config::default(), 1_700_000_000).unwrap().set
}

fn to_bytes(set: &DemoSet) -> Vec<u8> {
    let mut buf = Vec::new();
    set.write_jsonl(&mut buf).unwrap();
    buf
}

#[test]
fn fifty_demo_set_round_trips_exactly() {
    let set = small_set(50, 4);
    let bytes = to_bytes(&set);
    let back = DemoSet::read_jsonl(Cursor::new(&bytes)).unwrap();
    assert_eq!(back, set);
    assert_eq!(to_bytes(&back), bytes);
}

#[test]
fn empty_set_is_header_only() {
    let bytes = to_bytes(&DemoSet::default());
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains(&format!("\"format_version\":{DEMO_FORMAT_VERSION}")));
    assert_eq!(DemoSet::read_jsonl(Cursor::new(&bytes)).unwrap(), DemoSet::default());
}

#[test]
fn truncation_is_reported_at_the_broken_line() {
    let set = small_set(3, 5);
    let bytes = to_bytes(&set);
    let text = String::from_utf8(bytes).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // Cut the second demonstration (line 3) in half and drop the rest.
    let cut = format!("{}\n{}\n{}", lines[0], lines[1], &lines[2][..lines[2].len() / 2]);
    match DemoSet::read_jsonl(Cursor::new(cut.as_bytes())) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    // Whole lines missing: the count check points just past the last line read.
    let short = format!("{}\n{}\n", lines[0], lines[1]);
    match DemoSet::read_jsonl(Cursor::new(short.as_bytes())) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn version_mismatch_names_both_versions() {
    let text = String::from_utf8(to_bytes(&small_set(1, 6))).unwrap();
    let bumped = text.replacen(
        &format!("\"format_version\":{DEMO_FORMAT_VERSION}"),
        "\"format_version\":99",
        1,
    );
    let err = DemoSet::read_jsonl(Cursor::new(bumped.as_bytes())).unwrap_err();
    assert!(matches!(err, Error::FormatVersion { found: 99, expected: DEMO_FORMAT_VERSION }));
    let msg = err.to_string();
    assert!(msg.contains("99") && msg.contains(&DEMO_FORMAT_VERSION.to_string()));
}

#[test]
fn save_and_load_through_the_filesystem() {
    let set = small_set(4, 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demos.jsonl");
    set.save_jsonl(&path).unwrap();
    assert_eq!(DemoSet::load_jsonl(&path).unwrap(), set);
    assert!(matches!(DemoSet::load_jsonl(&dir.path().join("missing.jsonl")), Err(Error::Io { .. })));
}

#[test]
fn replay_reproduces_phase_sequence() {
    let cfg = Config::default();
    let src = ExpertSource { config: cfg.expert.clone() };
    for i in 0..30 {
        let seed = trial_seed(21, i);
        let (demo, log) = record_episode(&src, &cfg, (i % 3) as u8 + 1, seed, 0).unwrap();
        assert!(demo.frames.len() >= 2);
        demo.validate().unwrap();
        let replayed = replay_demo(&demo, &cfg, demo.meta.seed);
        let phases: Vec<_> = replayed.iter().map(|s| s.phase).collect();
        let recorded: Vec<_> = log.states().iter().map(|s| s.phase).collect();
        assert_eq!(phases, recorded);
    }
}

#[test]
fn distinct_seeds_give_distinct_placements() {
    let set = small_set(50, 8);
    let placements: HashSet<_> = set
        .demos
        .iter()
        .map(|d| {
            let c = d.meta.carcass;
            (c.init_center[0].to_bits(), c.init_center[1].to_bits(), c.init_yaw.to_bits())
        })
        .collect();
    assert_eq!(placements.len(), 50);
}

#[test]
fn generation_is_deterministic_and_balanced() {
    let cfg = Config::default();
    let a = generate_demos(12, &[1, 2, 3], 3, &cfg, 0).unwrap();
    let b = generate_demos(12, &[1, 2, 3], 3, &cfg, 0).unwrap();
    assert_eq!(to_bytes(&a.set), to_bytes(&b.set));
    assert!(a.retention() >= 0.9);
    let mut per = BTreeMap::new();
    for d in &a.set.demos {
        *per.entry(d.meta.exemplar_id).or_insert(0) += 1;
    }
    assert_eq!(per.values().copied().collect::<Vec<_>>(), vec![4, 4, 4]);
}

#[test]
fn two_point_normalization_oracle() {
    let rows = [[0.0], [10.0]];
    let s = DimStats::from_rows(rows.iter().map(|r| &r[..])).unwrap();
    assert_eq!(s.normalize(&[0.0]), vec![-1.0]);
    assert_eq!(s.normalize(&[10.0]), vec![1.0]);
    assert_eq!(s.normalize(&[5.0]), vec![0.0]);
}

#[test]
fn constant_dimension_uses_declared_span() {
    let rows = [[3.0], [3.0], [3.0]];
    let s = DimStats::from_rows(rows.iter().map(|r| &r[..])).unwrap();
    assert!((s.max[0] - s.min[0] - MIN_SPAN).abs() < 1e-15);
    assert_eq!(s.normalize(&[3.0]), vec![0.0]);
}

#[test]
fn empty_set_has_no_statistics() {
    assert!(matches!(compute_norm_stats(&DemoSet::default()), Err(Error::Contract(_))));
}

#[test]
fn dataset_statistics_are_well_formed() {
    let set = small_set(9, 9);
    let stats = compute_norm_stats(&set).unwrap();
    stats.validate().unwrap();
    assert_eq!((stats.act.min[3], stats.act.max[3]), (-1.0, 1.0));
}

proptest! {
    #[test]
    fn normalize_round_trip(
        rows in proptest::collection::vec(proptest::collection::vec(-100.0..100.0f64, 4), 1..20),
        probe in proptest::collection::vec(-200.0..200.0f64, 4),
    ) {
        let s = DimStats::from_rows(rows.iter().map(|r| &r[..])).unwrap();
        let back = s.denormalize(&s.normalize(&probe));
        for (a, b) in back.iter().zip(&probe) {
            prop_assert!((a - b).abs() < 1e-6);
        }
        for r in &rows {
            prop_assert!(s.normalize(r).iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
        }
    }
}

#[test]
fn every_learnable_frame_starts_one_window() {
    let set = small_set(6, 10);
    let idx = WindowIndex::new(&set, 2, 8).unwrap();
    let total: usize = set.demos.iter().map(|d| d.learnable().len()).sum();
    assert_eq!(idx.len(), total);
    for i in 0..idx.len() {
        let w = idx.window(&set, i);
        let (d, s) = idx.pair(i);
        let frames = set.demos[d].learnable();
        assert_eq!(w.demo_id, d);
        assert_eq!(w.obs.len(), 2);
        assert_eq!(w.actions.len(), 8);
        // Obs stack ends at the start frame and never reaches before the demo.
        assert_eq!(w.obs[1], frames[s].obs);
        assert_eq!(w.obs[0], frames[s.saturating_sub(1)].obs);
        // Actions past the learnable end repeat the final learnable action.
        for (k, a) in w.actions.iter().enumerate() {
            assert_eq!(*a, frames[(s + k).min(frames.len() - 1)].action);
        }
        assert!(frames.iter().all(|f| f.mode != Some(Mode::Scripted)));
    }
}

#[test]
fn window_sampling_is_length_proportional_and_seeded() {
    let set = small_set(5, 11);
    let lens: Vec<usize> = set.demos.iter().map(|d| d.learnable().len()).collect();
    let total: usize = lens.iter().sum();
    let draws = 100_000;
    let ws = sample_windows(&set, 2, 8, draws, &mut stream(1, Stream::Training)).unwrap();
    let mut counts = vec![0usize; set.len()];
    for w in &ws {
        counts[w.demo_id] += 1;
    }
    for (c, l) in counts.iter().zip(&lens) {
        let expected = *l as f64 / total as f64;
        let got = *c as f64 / draws as f64;
        assert!((got - expected).abs() / expected < 0.02, "{got} vs {expected}");
    }
    let a = sample_windows(&set, 2, 8, 16, &mut stream(2, Stream::Training)).unwrap();
    let b = sample_windows(&set, 2, 8, 16, &mut stream(2, Stream::Training)).unwrap();
    assert_eq!(a, b);
}
