#![allow(dead_code)]

use triplet_core::analysis::{self, AnalysisConfig, TripletReport};
use triplet_core::model::SourceParams;
use triplet_core::sim::{self, ArmModel, ChannelModel, DetectorModel, SimConfig};
use triplet_core::stream::{Channel, TimeTag, TimeTagStream};

pub fn arm(transmission: f64, efficiency: f64, dark_rate: f64, jitter_sigma: f64, dead_time: f64) -> ArmModel {
    ArmModel {
        channel: ChannelModel {
            transmission,
            leakage_rate_per_pulse: 0.0,
        },
        detector: DetectorModel {
            efficiency,
            dark_rate,
            jitter_sigma,
            dead_time,
        },
    }
}

/// Sets the primary efficiency so that `mean_pairs()` equals `mu`.
pub fn with_mean_pairs(mut cfg: SimConfig, mu: f64) -> SimConfig {
    let s = &cfg.source;
    cfg.source.pdc1_efficiency = mu / (s.pump_photons_per_pulse() * s.injection_efficiency);
    cfg
}

/// Both conversion efficiencies ×1000 at 1/1000 of the pump power, so the
/// mean pair number stays at its operating value while triplets become
/// common enough to count.
pub fn boosted_config(seed: u64) -> SimConfig {
    let reference = SourceParams::reference();
    SimConfig {
        source: SourceParams {
            pump_power: reference.pump_power * 1e-3,
            pdc1_efficiency: reference.pdc1_efficiency * 1e3,
            pdc2_efficiency: reference.pdc2_efficiency * 1e3,
            ..reference
        },
        arms: [
            arm(0.9, 0.6, 100.0, 50e-12, 20e-9),
            arm(0.9, 0.25, 100.0, 50e-12, 20e-9),
            arm(0.9, 0.7, 100.0, 50e-12, 20e-9),
        ],
        n_pulses: 100_000_000,
        peak_offset: sim::DEFAULT_PEAK_OFFSET,
        resolution_fs: sim::DEFAULT_RESOLUTION_FS,
        rng_seed: seed,
    }
}

/// Fixed-noise source for CAR studies; only `⟨m⟩` is varied.
pub fn car_config(mu: f64, seed: u64) -> SimConfig {
    let mut cfg = boosted_config(seed);
    cfg.source.pdc2_efficiency = 0.01;
    cfg.arms = [
        arm(0.1, 0.5, 1e3, 50e-12, 100e-9),
        arm(0.8, 0.5, 1e3, 50e-12, 100e-9),
        arm(0.8, 0.5, 1e3, 50e-12, 100e-9),
    ];
    for a in &mut cfg.arms {
        a.channel.leakage_rate_per_pulse = 1e-4;
    }
    with_mean_pairs(cfg, mu)
}

pub fn simulate_and_analyze(cfg: &SimConfig) -> TripletReport {
    let stream = sim::simulate_run(cfg).expect("simulation");
    let acfg = AnalysisConfig {
        n_pulses: Some(cfg.n_pulses),
        ..Default::default()
    };
    analysis::analyze(&stream, &acfg).expect("analysis").1
}

/// Sorted random stream of at most `n` events over `span` ticks.
pub fn random_stream(seed: u64, n: usize, span: u64) -> TimeTagStream {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(0..=n);
    let mut records: Vec<TimeTag> = (0..count)
        .map(|_| {
            let ch = Channel::ALL[rng.random_range(0..3)];
            TimeTag::new(ch, rng.random_range(0..span))
        })
        .collect();
    records.sort();
    TimeTagStream::new(sim::DEFAULT_RESOLUTION_FS, records)
}

/// Three-fold counts by explicit enumeration of every (t2, t1, t3) triple.
pub fn brute_force_counts(stream: &TimeTagStream, axis: &analysis::BinAxis) -> Vec<u64> {
    let t1 = stream.timestamps(Channel::Idler1);
    let t2 = stream.timestamps(Channel::Signal2);
    let t3 = stream.timestamps(Channel::Idler2);
    let len = axis.len as i128;
    let bin = |d: i128| -> Option<usize> {
        let rel = d - axis.origin as i128;
        if rel < 0 {
            return None;
        }
        let i = rel / axis.width as i128;
        (i < len).then_some(i as usize)
    };
    let mut counts = vec![0u64; axis.len * axis.len];
    for &r in &t2 {
        for &a in &t1 {
            let Some(i) = bin(a as i128 - r as i128) else { continue };
            for &b in &t3 {
                if let Some(j) = bin(b as i128 - r as i128) {
                    counts[i * axis.len + j] += 1;
                }
            }
        }
    }
    counts
}
