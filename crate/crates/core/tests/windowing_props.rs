mod common;

use proptest::prelude::*;
use watchtower::stream::StreamManifest;
use watchtower::windowing::{uniform_sample, window_bounds, WindowConfig, WindowTracker};

fn run(cfg: &WindowConfig, frames: u64) -> Vec<(u64, u64, Vec<u64>)> {
    let m = StreamManifest::synthetic("s", 30.0, frames);
    let mut t = WindowTracker::new(cfg.clone()).unwrap();
    m.frames
        .iter()
        .filter_map(|f| t.push(m.frame_ref(f)))
        .map(|w| {
            (
                w.bounds.start,
                w.bounds.end,
                w.frames.iter().map(|f| f.frame_id).collect(),
            )
        })
        .collect()
}

fn configs() -> impl Strategy<Value = WindowConfig> {
    (2u64..60)
        .prop_flat_map(|len| (Just(len), 1..=len, 1..=len.min(10) as usize))
        .prop_map(|(window_len, stride, samples_per_window)| WindowConfig {
            window_len,
            stride,
            samples_per_window,
            ..WindowConfig::default()
        })
}

proptest! {
    #[test]
    fn tracker_matches_longhand_schedule(cfg in configs(), frames in 0u64..400) {
        let got = run(&cfg, frames);
        let want = common::window_oracle(frames, cfg.window_len, cfg.stride, cfg.samples_per_window as u64);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn windows_cover_every_frame_before_last_end(cfg in configs(), frames in 1u64..400) {
        let ws = run(&cfg, frames);
        if let Some(last) = ws.last() {
            for f in 0..last.1 {
                prop_assert!(ws.iter().any(|(s, e, _)| *s <= f && f < *e), "frame {f} uncovered");
            }
            // no partial windows
            prop_assert!(ws.iter().all(|(s, e, _)| e - s == cfg.window_len && *e <= frames));
        }
    }

    #[test]
    fn samples_sorted_and_start_anchored(start in 0u64..1000, len in 1u64..200, k in 1usize..20) {
        prop_assume!(k as u64 <= len);
        let s = uniform_sample(start, start + len, k).unwrap();
        prop_assert_eq!(s.len(), k);
        prop_assert_eq!(s[0], start);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(*s.last().unwrap() < start + len);
    }
}

#[test]
fn bounds_formula() {
    let cfg = WindowConfig::default();
    for w in 0..20 {
        assert_eq!(window_bounds(w, &cfg), 70 * w..70 * w + 100);
    }
}

#[test]
fn too_many_samples_rejected() {
    assert!(uniform_sample(0, 4, 5).is_err());
    assert!(uniform_sample(0, 4, 0).is_err());
}
