mod common;

use rand::{Rng, SeedableRng};
use triplet_core::sim::{self, SimConfig};
use triplet_core::stream::Channel;

#[test]
fn singles_match_expected_counts() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for trial in 0..5u64 {
        let mut cfg = common::boosted_config(500 + trial);
        cfg.n_pulses = 5_000_000;
        for a in &mut cfg.arms {
            a.channel.transmission = rng.random_range(0.05..1.0);
            a.channel.leakage_rate_per_pulse = rng.random_range(0.0..1e-3);
            a.detector.efficiency = rng.random_range(0.1..0.9);
            a.detector.dark_rate = rng.random_range(0.0..50e3);
            a.detector.dead_time = 0.0;
        }
        cfg.source.pdc2_efficiency = rng.random_range(1e-4..0.2);
        cfg = common::with_mean_pairs(cfg, rng.random_range(0.01..0.5));
        let expected = sim::expected_rates(&cfg);
        let stream = sim::simulate_run(&cfg).unwrap();
        for ch in Channel::ALL {
            let mean = expected.channel(ch).singles_count;
            let z = (stream.count(ch) as f64 - mean) / mean.sqrt();
            assert!(z.abs() < 4.0, "trial {trial} {ch:?}: {} vs {mean:.1} (z = {z:.2})", stream.count(ch));
        }
    }
}

#[test]
fn jitter_width_matches_detector() {
    let mut cfg = common::boosted_config(8);
    cfg.n_pulses = 2_000_000;
    for a in &mut cfg.arms {
        a.detector.dark_rate = 0.0;
        a.detector.dead_time = 0.0;
    }
    cfg.arms[0].detector.jitter_sigma = 300e-12;
    cfg = common::with_mean_pairs(cfg, 0.3);
    let stream = sim::simulate_run(&cfg).unwrap();
    let res = cfg.resolution_seconds();
    let period = cfg.rep_period() / res;
    let delay = (cfg.peak_offset / res).max(0.0);
    let residuals: Vec<f64> = stream
        .timestamps(Channel::Idler1)
        .iter()
        .map(|&t| {
            let x = t as f64 - delay;
            x - (x / period).round() * period
        })
        .collect();
    assert!(residuals.len() > 1000);
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Flooring to whole ticks adds a uniform component of variance 1/12.
    let sigma = 300e-12 / res;
    let expected = (sigma * sigma + 1.0 / 12.0).sqrt();
    assert!((var.sqrt() / expected - 1.0).abs() < 0.05, "{} vs {expected}", var.sqrt());
    assert!((mean + 0.5).abs() < 0.2, "mean {mean}");
}

#[test]
fn dead_time_enforces_spacing() {
    let mut cfg = common::boosted_config(9);
    cfg.n_pulses = 2_000_000;
    for a in &mut cfg.arms {
        a.detector.dark_rate = 2e5;
        a.detector.dead_time = 250e-9;
    }
    let stream = sim::simulate_run(&cfg).unwrap();
    let dead = sim::dead_time_ticks(250e-9, cfg.resolution_fs);
    for ch in Channel::ALL {
        let ts = stream.timestamps(ch);
        assert!(ts.len() > 100);
        assert!(ts.windows(2).all(|w| w[1] - w[0] >= dead), "{ch:?}");
    }
    let mut free = cfg.clone();
    for a in &mut free.arms {
        a.detector.dead_time = 0.0;
    }
    let unlimited = sim::simulate_run(&free).unwrap();
    for ch in Channel::ALL {
        assert!(stream.count(ch) < unlimited.count(ch));
        let rate = stream.count(ch) as f64 / cfg.span_seconds();
        let predicted = sim::expected_rates(&cfg).channel(ch).click_rate;
        assert!((rate / predicted - 1.0).abs() < 0.05, "{ch:?}: {rate} vs {predicted}");
    }
}

#[test]
fn dead_time_rounds_up_to_ticks() {
    assert_eq!(sim::dead_time_ticks(0.0, 82_313), 0);
    assert_eq!(sim::dead_time_ticks(82.313e-12, 82_313), 1);
    assert_eq!(sim::dead_time_ticks(82.314e-12, 82_313), 2);
    assert_eq!(sim::dead_time_ticks(50e-9, 82_313), 608);
}

#[test]
fn central_peak_sits_at_configured_offset() {
    let mut cfg: SimConfig = common::boosted_config(10);
    cfg.n_pulses = 30_000_000;
    let report = common::simulate_and_analyze(&cfg);
    let peak = report.peak.expect("peak");
    let bin = report.bin_width;
    for d in [peak.delay1, peak.delay3] {
        assert!((d - cfg.peak_offset).abs() <= bin, "{d} vs {}", cfg.peak_offset);
    }
    assert!(peak.count > 30);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = SimConfig::reference();
    cfg.arms[0].detector.efficiency = 1.5;
    assert!(sim::simulate_run(&cfg).is_err());
    let mut cfg = SimConfig::reference();
    cfg.arms[2].detector.dead_time = -1.0;
    assert!(sim::simulate_run(&cfg).is_err());
}
