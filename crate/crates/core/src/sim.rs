//! Pulse-resolved Monte Carlo of the cascaded source and its detection chain.
//!
//! Every pump pulse produces `m ~ Poisson(⟨m⟩)` primary pairs. Each pair's
//! fate (idler detected on channel 1, signal converted in the second stage,
//! secondary photons detected on channels 2 and 3) is independent of all
//! other pairs, so the pairs with a given fate form an independent Poisson
//! process over pulses. The simulator samples those processes directly: per
//! block of pulses it draws the number of pairs that produce at least one
//! detection, scatters them uniformly over the block's pulses and draws each
//! pair's outcome from the conditional distribution. The output distribution
//! is identical to looping over pulses and drawing `m` for each, while the
//! cost scales with the number of detections rather than pulses.
//!
//! Blocks use independent ChaCha streams keyed by block index and are merged
//! in block order before the global sort, so the result depends only on the
//! seed, never on the worker count.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, ArmEfficiencies, ModelError, SourceParams};
use crate::stream::{Channel, TimeTag, TimeTagStream};

/// 16 of these ticks make a 1.317 ns analysis bin.
pub const DEFAULT_RESOLUTION_FS: u64 = 82_313;
pub const DEFAULT_PEAK_OFFSET: f64 = -0.165e-9;
/// Pulses per RNG block.
pub const BLOCK_PULSES: u64 = 1 << 20;
/// Above this mean pair number the Poisson-pumping picture breaks down.
pub const MAX_REGULAR_MEAN_PAIRS: f64 = 10.0;

// Keeps signed tick differences representable.
const MAX_TICKS: f64 = (1u64 << 62) as f64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation config: {0}")]
    Invalid(String),
    #[error("run of {span_ticks:.3e} ticks exceeds the timestamp range")]
    TickRange { span_ticks: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Dark counts per second, including blackbody-induced clicks.
    pub dark_rate: f64,
    /// Gaussian timing jitter, seconds.
    pub jitter_sigma: f64,
    /// Non-paralyzable dead time, seconds.
    pub dead_time: f64,
}

impl DetectorModel {
    pub fn snspd(efficiency: f64) -> Self {
        Self {
            efficiency,
            dark_rate: 18.3e3,
            jitter_sigma: 100e-12,
            dead_time: 50e-9,
        }
    }

    /// Free-running InGaAs APD. The dead time is an assumed preset.
    pub fn ingaas(efficiency: f64) -> Self {
        Self {
            efficiency,
            dark_rate: 2.0e3,
            jitter_sigma: 187.3e-12,
            dead_time: 10e-6,
        }
    }

    /// MoSi nanowire with ~75 ns recovery.
    pub fn mosi_snspd() -> Self {
        Self {
            efficiency: 0.87,
            dark_rate: 100.0,
            jitter_sigma: 50e-12,
            dead_time: 75e-9,
        }
    }

    fn validate(&self, arm: &str) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(SimError::Invalid(format!("{arm}: efficiency {} outside [0, 1]", self.efficiency)));
        }
        for (name, v) in [
            ("dark_rate", self.dark_rate),
            ("jitter_sigma", self.jitter_sigma),
            ("dead_time", self.dead_time),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SimError::Invalid(format!("{arm}: {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Pre-detector transmission of the arm.
    pub transmission: f64,
    /// Mean number of parasitic photons per pulse reaching the detector
    /// (surviving primary photons, Cherenkov-type emission).
    pub leakage_rate_per_pulse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub channel: ChannelModel,
    pub detector: DetectorModel,
}

impl ArmModel {
    /// Probability that a source photon in this arm produces a click.
    pub fn detection_probability(&self) -> f64 {
        self.channel.transmission * self.detector.efficiency
    }

    fn validate(&self, arm: &str) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.channel.transmission) {
            return Err(SimError::Invalid(format!(
                "{arm}: transmission {} outside [0, 1]",
                self.channel.transmission
            )));
        }
        let leak = self.channel.leakage_rate_per_pulse;
        if !(leak >= 0.0) || !leak.is_finite() {
            return Err(SimError::Invalid(format!("{arm}: leakage rate must be >= 0, got {leak}")));
        }
        self.detector.validate(arm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub source: SourceParams,
    /// Arms in channel order: idler 1, signal 2, idler 2.
    pub arms: [ArmModel; 3],
    pub n_pulses: u64,
    /// Delay of channels 1 and 3 relative to channel 2, seconds.
    pub peak_offset: f64,
    pub resolution_fs: u64,
    pub rng_seed: u64,
}

impl SimConfig {
    /// Apparatus defaults. Arm transmissions are an equal split of the
    /// transmission product implied by the measured success probability.
    pub fn reference() -> Self {
        let detectors = [
            DetectorModel::snspd(0.6),
            DetectorModel::ingaas(0.25),
            DetectorModel::snspd(0.7),
        ];
        let det_product: f64 = detectors.iter().map(|d| d.efficiency).product();
        let transmission = (ArmEfficiencies::reference().product() / det_product).cbrt();
        let arms = detectors.map(|detector| ArmModel {
            channel: ChannelModel {
                transmission,
                leakage_rate_per_pulse: 0.0,
            },
            detector,
        });
        Self {
            source: SourceParams::reference(),
            arms,
            n_pulses: 100_000_000,
            peak_offset: DEFAULT_PEAK_OFFSET,
            resolution_fs: DEFAULT_RESOLUTION_FS,
            rng_seed: 0,
        }
    }

    pub fn rep_period(&self) -> f64 {
        1.0 / self.source.rep_rate
    }

    pub fn resolution_seconds(&self) -> f64 {
        self.resolution_fs as f64 * 1e-15
    }

    pub fn span_seconds(&self) -> f64 {
        self.n_pulses as f64 * self.rep_period()
    }

    pub fn arm(&self, channel: Channel) -> &ArmModel {
        &self.arms[channel.index()]
    }

    /// Pairs per pulse that reach the second stage.
    pub fn mean_pairs(&self) -> f64 {
        model::mean_pairs_from_pump(&self.source, true)
    }

    pub fn arm_efficiencies(&self) -> ArmEfficiencies {
        ArmEfficiencies {
            eta_i1: self.arms[0].detection_probability(),
            eta_s2: self.arms[1].detection_probability(),
            eta_i2: self.arms[2].detection_probability(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.source.validate()?;
        for (arm, name) in self.arms.iter().zip(["idler1", "signal2", "idler2"]) {
            arm.validate(name)?;
        }
        if self.n_pulses == 0 {
            return Err(SimError::Invalid("n_pulses must be > 0".into()));
        }
        if self.resolution_fs == 0 {
            return Err(SimError::Invalid("resolution must be > 0".into()));
        }
        if !self.peak_offset.is_finite() {
            return Err(SimError::Invalid("peak_offset must be finite".into()));
        }
        let span_ticks = (self.span_seconds() + self.rep_period()) / self.resolution_seconds();
        if span_ticks >= MAX_TICKS {
            return Err(SimError::TickRange { span_ticks });
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mu = self.mean_pairs();
        let mut out = Vec::new();
        if mu > MAX_REGULAR_MEAN_PAIRS {
            out.push(format!(
                "mean pair number {mu:.3} per pulse exceeds {MAX_REGULAR_MEAN_PAIRS}: far outside the low-gain regime"
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelExpectation {
    /// Mean detected photons per pulse (source + leakage), before dead time.
    pub photons_per_pulse: f64,
    pub dark_rate: f64,
    /// Singles rate without dead time, 1/s.
    pub singles_rate: f64,
    /// Expected singles over the whole run without dead time.
    pub singles_count: f64,
    /// Approximate click rate with binary detection and non-paralyzable
    /// dead time, 1/s.
    pub click_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRates {
    pub mean_pairs: f64,
    pub channels: [ChannelExpectation; 3],
    pub triple_probability_per_pulse: f64,
    pub triple_rate: f64,
    pub expected_triples: f64,
}

impl ExpectedRates {
    pub fn channel(&self, channel: Channel) -> &ChannelExpectation {
        &self.channels[channel.index()]
    }

    /// Mean uncorrelated three-fold count per square bin of width
    /// `bin_width` seconds over the whole run, from dark counts alone.
    pub fn dark_triples_per_bin(&self, bin_width: f64, span: f64) -> f64 {
        let [c1, c2, c3] = self.channels;
        c2.dark_rate * span * (c1.dark_rate * bin_width) * (c3.dark_rate * bin_width)
    }
}

/// Closed-form expectations for a config; the simulator's statistical oracle.
pub fn expected_rates(config: &SimConfig) -> ExpectedRates {
    let mu = config.mean_pairs();
    let rep_rate = config.source.rep_rate;
    let p2 = config.source.pdc2_efficiency;
    let span = config.span_seconds();
    let channels = Channel::ALL.map(|ch| {
        let arm = config.arm(ch);
        let source_photons = match ch {
            Channel::Idler1 => mu,
            Channel::Signal2 | Channel::Idler2 => mu * p2,
        };
        let photons_per_pulse = source_photons * arm.detection_probability()
            + arm.channel.leakage_rate_per_pulse * arm.detector.efficiency;
        let dark_rate = arm.detector.dark_rate;
        let singles_rate = photons_per_pulse * rep_rate + dark_rate;
        let tau = arm.detector.dead_time;
        let photon_clicks = if tau > 0.0 {
            -(-photons_per_pulse).exp_m1()
        } else {
            photons_per_pulse
        };
        let raw = photon_clicks * rep_rate + dark_rate;
        ChannelExpectation {
            photons_per_pulse,
            dark_rate,
            singles_rate,
            singles_count: photons_per_pulse * config.n_pulses as f64 + dark_rate * span,
            click_rate: raw / (1.0 + raw * tau),
        }
    });
    let triple = model::triplet_success_probability(&config.source, &config.arm_efficiencies());
    ExpectedRates {
        mean_pairs: mu,
        channels,
        triple_probability_per_pulse: triple,
        triple_rate: triple * rep_rate,
        expected_triples: triple * config.n_pulses as f64,
    }
}

/// Per-block constants shared by all workers.
struct Plan {
    period_ticks: f64,
    jitter_ticks: [f64; 3],
    delay_ticks: [f64; 3],
    /// Mean relevant pairs per pulse and cumulative outcome weights over the
    /// seven non-empty detection masks.
    relevant_per_pulse: f64,
    outcome_cdf: [f64; 7],
    leak_per_pulse: [f64; 3],
    dark_per_tick: [f64; 3],
}

impl Plan {
    fn new(config: &SimConfig) -> Self {
        let res = config.resolution_seconds();
        let period_ticks = config.rep_period() / res;
        let jitter_ticks = config.arms.map(|a| a.detector.jitter_sigma / res);
        let offset = config.peak_offset / res;
        // Shift whichever side keeps all nominal delays non-negative.
        let delay_ticks = [offset.max(0.0), (-offset).max(0.0), offset.max(0.0)];

        let p = config.arms.map(|a| a.detection_probability());
        let conv = config.source.pdc2_efficiency;
        let mut weights = [0.0; 8];
        for (mask, w) in weights.iter_mut().enumerate() {
            let d1 = mask & 1 != 0;
            let d2 = mask & 2 != 0;
            let d3 = mask & 4 != 0;
            let first = if d1 { p[0] } else { 1.0 - p[0] };
            let second = if d2 || d3 {
                conv * (if d2 { p[1] } else { 1.0 - p[1] }) * (if d3 { p[2] } else { 1.0 - p[2] })
            } else {
                (1.0 - conv) + conv * (1.0 - p[1]) * (1.0 - p[2])
            };
            *w = first * second;
        }
        let relevant: f64 = weights[1..].iter().sum();
        let mut outcome_cdf = [0.0; 7];
        let mut acc = 0.0;
        for (slot, w) in outcome_cdf.iter_mut().zip(&weights[1..]) {
            acc += w;
            *slot = if relevant > 0.0 { acc / relevant } else { 0.0 };
        }
        outcome_cdf[6] = 1.0;

        Self {
            period_ticks,
            jitter_ticks,
            delay_ticks,
            relevant_per_pulse: config.mean_pairs() * relevant,
            outcome_cdf,
            leak_per_pulse: config
                .arms
                .map(|a| a.channel.leakage_rate_per_pulse * a.detector.efficiency),
            dark_per_tick: config.arms.map(|a| a.detector.dark_rate * res),
        }
    }
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn push_tag(out: &mut Vec<TimeTag>, channel: Channel, ticks: f64) {
    if ticks >= 0.0 {
        out.push(TimeTag::new(channel, ticks.floor() as u64));
    }
}

fn simulate_block(plan: &Plan, seed: u64, block: u64, first: u64, pulses: u64) -> Vec<TimeTag> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    let mut out = Vec::new();
    let unit_normal = Normal::new(0.0, 1.0).unwrap();
    let emit = |rng: &mut ChaCha8Rng, out: &mut Vec<TimeTag>, ch: Channel, pulse: u64| {
        let i = ch.index();
        let t = pulse as f64 * plan.period_ticks
            + plan.delay_ticks[i]
            + plan.jitter_ticks[i] * unit_normal.sample(rng);
        push_tag(out, ch, t);
    };

    let n_relevant = poisson_count(&mut rng, plan.relevant_per_pulse * pulses as f64);
    for _ in 0..n_relevant {
        let pulse = first + rng.random_range(0..pulses);
        let u: f64 = rng.random();
        let mask = plan.outcome_cdf.iter().position(|&c| u < c).unwrap_or(6) + 1;
        for ch in Channel::ALL {
            if mask & (1 << ch.index()) != 0 {
                emit(&mut rng, &mut out, ch, pulse);
            }
        }
    }

    for ch in Channel::ALL {
        let n_leak = poisson_count(&mut rng, plan.leak_per_pulse[ch.index()] * pulses as f64);
        for _ in 0..n_leak {
            let pulse = first + rng.random_range(0..pulses);
            emit(&mut rng, &mut out, ch, pulse);
        }
    }

    let start = first as f64 * plan.period_ticks;
    let width = pulses as f64 * plan.period_ticks;
    for ch in Channel::ALL {
        let n_dark = poisson_count(&mut rng, plan.dark_per_tick[ch.index()] * width);
        for _ in 0..n_dark {
            let t = start + width * rng.random::<f64>();
            push_tag(&mut out, ch, t);
        }
    }
    out
}

/// Drops tags that arrive within the dead time of the previous accepted tag
/// on the same channel. `records` must be sorted.
pub fn apply_dead_time(records: &mut Vec<TimeTag>, dead_ticks: [u64; 3]) {
    let mut last: [Option<u64>; 3] = [None; 3];
    records.retain(|tag| {
        let i = tag.channel.index();
        match last[i] {
            Some(prev) if tag.timestamp - prev < dead_ticks[i] => false,
            _ => {
                last[i] = Some(tag.timestamp);
                true
            }
        }
    });
}

/// Smallest whole number of ticks not shorter than `dead_time`.
pub fn dead_time_ticks(dead_time: f64, resolution_fs: u64) -> u64 {
    let fs = (dead_time * 1e15).round() as u128;
    fs.div_ceil(resolution_fs as u128) as u64
}

/// Runs the full simulation. Parallelism comes from the ambient rayon pool.
pub fn simulate_run(config: &SimConfig) -> Result<TimeTagStream, SimError> {
    config.validate()?;
    for w in config.warnings() {
        log::warn!("{w}");
    }
    let plan = Plan::new(config);
    let n_blocks = config.n_pulses.div_ceil(BLOCK_PULSES);
    let done = AtomicUsize::new(0);
    let blocks: Vec<Vec<TimeTag>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let first = b * BLOCK_PULSES;
            let pulses = BLOCK_PULSES.min(config.n_pulses - first);
            let tags = simulate_block(&plan, config.rng_seed, b, first, pulses);
            let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n_blocks >= 10 && finished % (n_blocks as usize / 10) == 0 {
                log::info!("simulated {finished}/{n_blocks} pulse blocks");
            }
            tags
        })
        .collect();

    let mut records: Vec<TimeTag> = blocks.concat();
    records.par_sort_unstable();
    let dead = config
        .arms
        .map(|a| dead_time_ticks(a.detector.dead_time, config.resolution_fs));
    apply_dead_time(&mut records, dead);
    Ok(TimeTagStream::new(config.resolution_fs, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(mut config: SimConfig) -> SimConfig {
        for arm in &mut config.arms {
            arm.detector.dark_rate = 0.0;
            arm.channel.leakage_rate_per_pulse = 0.0;
        }
        config
    }

    #[test]
    fn zero_efficiency_gives_empty_stream() {
        let mut config = quiet(SimConfig::reference());
        config.n_pulses = 3_000_000;
        for arm in &mut config.arms {
            arm.detector.efficiency = 0.0;
        }
        let stream = simulate_run(&config).unwrap();
        assert!(stream.is_empty());
        assert_eq!(stream.resolution_fs, DEFAULT_RESOLUTION_FS);
    }

    #[test]
    fn same_seed_same_stream_and_different_seed_differs() {
        let mut config = SimConfig::reference();
        config.n_pulses = 2_500_000;
        config.rng_seed = 11;
        let a = simulate_run(&config).unwrap();
        let b = simulate_run(&config).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
        config.rng_seed = 12;
        assert_ne!(a, simulate_run(&config).unwrap());
    }

    #[test]
    fn output_is_sorted_and_respects_dead_time() {
        let mut config = SimConfig::reference();
        config.n_pulses = 2_000_000;
        config.source.pdc2_efficiency = 1e-2;
        for arm in &mut config.arms {
            arm.channel.transmission = 1.0;
            arm.detector.dead_time = 3e-6;
        }
        let stream = simulate_run(&config).unwrap();
        assert!(stream.is_sorted());
        let dead = dead_time_ticks(3e-6, config.resolution_fs);
        for ch in Channel::ALL {
            let ts = stream.timestamps(ch);
            assert!(ts.len() > 10);
            assert!(ts.windows(2).all(|w| (w[1] - w[0]) as f64 * stream.resolution_seconds() >= 3e-6 - 1e-18));
            assert!(ts.windows(2).all(|w| w[1] - w[0] >= dead));
        }
    }

    #[test]
    fn dead_time_filter_is_non_paralyzable() {
        let mut recs: Vec<TimeTag> = [0u64, 5, 9, 10, 14, 25]
            .iter()
            .map(|&t| TimeTag::new(Channel::Idler1, t))
            .collect();
        recs.push(TimeTag::new(Channel::Signal2, 1));
        recs.sort();
        apply_dead_time(&mut recs, [10, 0, 0]);
        let kept: Vec<u64> = recs
            .iter()
            .filter(|t| t.channel == Channel::Idler1)
            .map(|t| t.timestamp)
            .collect();
        // 5 and 9 fall inside the window opened at 0; 14 inside the one opened at 10.
        assert_eq!(kept, vec![0, 10, 25]);
        assert_eq!(recs.len(), 4);
    }

    #[test]
    fn dead_time_ticks_round_up() {
        assert_eq!(dead_time_ticks(0.0, 82_313), 0);
        assert_eq!(dead_time_ticks(82_313e-15, 82_313), 1);
        assert_eq!(dead_time_ticks(82_314e-15, 82_313), 2);
    }

    #[test]
    fn expected_rates_basics() {
        let mut config = SimConfig::reference();
        config.source.pump_power = 0.0;
        let rates = expected_rates(&config);
        for (ch, arm) in rates.channels.iter().zip(&config.arms) {
            assert_eq!(ch.singles_rate, arm.detector.dark_rate);
        }
        assert_eq!(rates.triple_rate, 0.0);

        let config = SimConfig::reference();
        let rates = expected_rates(&config);
        assert!((rates.triple_probability_per_pulse / 6.35e-11 - 1.0).abs() < 0.01);

        let mut boosted = config.clone();
        boosted.source.pdc2_efficiency *= 3.0;
        let r2 = expected_rates(&boosted);
        assert!((r2.triple_probability_per_pulse / rates.triple_probability_per_pulse - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reference_dark_rates_give_the_noise_floor() {
        let config = SimConfig::reference();
        let rates = expected_rates(&config);
        let noise = rates.dark_triples_per_bin(16.0 * 82.313e-12, 11.5 * 3600.0);
        assert!((noise - 0.048).abs() < 0.003, "{noise}");
    }

    #[test]
    fn large_mean_raises_warning_and_bad_config_is_rejected() {
        let mut config = SimConfig::reference();
        config.source.pdc1_efficiency = 1e-4;
        assert_eq!(config.warnings().len(), 1);

        let mut bad = SimConfig::reference();
        bad.n_pulses = 0;
        assert!(bad.validate().is_err());
        let mut bad = SimConfig::reference();
        bad.arms[2].channel.transmission = 2.0;
        assert!(bad.validate().is_err());
        let mut bad = SimConfig::reference();
        bad.resolution_fs = 1;
        bad.n_pulses = u64::MAX / 2;
        assert!(matches!(bad.validate(), Err(SimError::TickRange { .. })));
    }
}
