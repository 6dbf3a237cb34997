mod common;

use proptest::prelude::*;
use triplet_core::analysis::{build_on_axis, build_threefold_histogram, merge_bins, BinAxis, BinningConfig};
use triplet_core::stream::{Channel, TimeTag, TimeTagStream};

#[test]
fn default_grid_matches_brute_force() {
    let cfg = BinningConfig::default();
    for seed in 100..120 {
        let stream = common::random_stream(seed, 1000, 60_000);
        let h = build_threefold_histogram(&stream, &cfg).unwrap();
        assert_eq!(h.counts, common::brute_force_counts(&stream, &h.axis), "seed {seed}");
    }
}

#[test]
fn sharded_build_matches_serial() {
    let stream = common::random_stream(7, 60_000, 2_000_000);
    let axis = BinAxis { origin: -400, width: 8, len: 101 };
    let parallel = build_on_axis(&stream, axis).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| build_on_axis(&stream, axis).unwrap());
    assert_eq!(parallel, serial);
    assert!(parallel.total() > 0);
}

#[test]
fn fine_then_merge_equals_direct_merge() {
    let cfg = BinningConfig {
        base_bin: 82.3125e-12,
        merge_factor: 16,
        window_half_span: 20e-9,
        rep_period: 10.0 * 16.0 * 82.3125e-12,
    };
    let stream = common::random_stream(3, 3000, 30_000);
    let fine = build_on_axis(&stream, cfg.fine_axis(stream.resolution_fs).unwrap()).unwrap();
    let merged = build_threefold_histogram(&stream, &cfg).unwrap();
    assert_eq!(merge_bins(&fine, 16).unwrap(), merged);
}

#[test]
fn peak_offset_lands_in_central_bin() {
    // τ1−τ2 = τ3−τ2 = −0.165 ns is two ticks below zero.
    let s = TimeTagStream::new(
        82_313,
        vec![
            TimeTag::new(Channel::Idler1, 998),
            TimeTag::new(Channel::Idler2, 998),
            TimeTag::new(Channel::Signal2, 1000),
        ],
    );
    let h = build_threefold_histogram(&s, &BinningConfig::default()).unwrap();
    assert_eq!(h.get(228, 228), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn streaming_equals_oracle(
        seed in any::<u64>(),
        n in 0usize..300,
        span in 1u64..5_000,
        origin in -200i64..50,
        width in 1u64..20,
        len in 1usize..40,
    ) {
        let stream = common::random_stream(seed, n, span);
        let axis = BinAxis { origin, width, len };
        let h = build_on_axis(&stream, axis).unwrap();
        prop_assert_eq!(h.counts, common::brute_force_counts(&stream, &axis));
    }

    #[test]
    fn merging_conserves_counts(seed in any::<u64>(), factor in 1usize..=32) {
        let stream = common::random_stream(seed, 400, 3_000);
        let h = build_on_axis(&stream, BinAxis { origin: -150, width: 3, len: 97 }).unwrap();
        let m = merge_bins(&h, factor).unwrap();
        prop_assert_eq!(m.total(), h.total());
        prop_assert_eq!(m.side(), 97usize.div_ceil(factor));
    }
}
