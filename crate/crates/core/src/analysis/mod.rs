//! Three-fold coincidence analysis of time-tag streams.

mod histogram;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use histogram::{
    build_on_axis, build_threefold_histogram, merge_bins, BinAxis, BinningConfig,
    Coincidence2DHistogram, REP_PERIOD_TOLERANCE,
};
pub use stats::{
    accidental_mean, car, locate_central_peak, noise_tail_probability, occupancy_histogram,
    poisson_fit, snr, success_probability_estimate, Accidentals, Estimate, NeighborSite,
    OutlierRule, PeakLocation, PoissonFit, Ratio, DEFAULT_PEAK_SEARCH_RADIUS,
    MIN_ACCIDENTAL_SITES,
};

use crate::model::ModelError;
use crate::stream::TimeTagStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("stream not sorted at record {index}")]
    Unsorted { index: usize },
    #[error("invalid binning: {0}")]
    Binning(String),
    #[error("no nonzero bin in the peak search region")]
    PeakNotFound,
    #[error("only {found} neighbour-pulse bins inside the window")]
    InsufficientSites { found: usize },
    #[error("occupancy table is empty")]
    EmptyOccupancy,
    #[error("every bin was excluded from the Poisson fit")]
    AllExcluded,
    #[error("pulse count must be positive")]
    ZeroPulses,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub binning: BinningConfig,
    pub peak_search_radius: usize,
    pub outlier_rule: OutlierRule,
    /// Pump pulses in the run; the success probability is omitted without it.
    pub n_pulses: Option<u64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            binning: BinningConfig::default(),
            peak_search_radius: DEFAULT_PEAK_SEARCH_RADIUS,
            outlier_rule: OutlierRule::default(),
            n_pulses: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletReport {
    pub total_reference_events: u64,
    pub n_bins: usize,
    /// Analysis bin width, seconds.
    pub bin_width: f64,
    /// Peak bin; `None` when the search region is empty and the zero-delay
    /// bin is used instead.
    pub peak: Option<PeakLocation>,
    pub central_count: u64,
    pub central_error: f64,
    pub accidental_mean: f64,
    pub accidental_sites: usize,
    pub car: Ratio,
    pub noise_fit: PoissonFit,
    pub noise_mean_per_bin: f64,
    pub snr: Ratio,
    /// Probability that the central count arises from noise alone.
    pub noise_probability: f64,
    pub success_probability: Option<Estimate>,
    pub occupancy: BTreeMap<u64, u64>,
}

/// Histogram plus the full three-fold report.
pub fn analyze(
    stream: &TimeTagStream,
    cfg: &AnalysisConfig,
) -> Result<(Coincidence2DHistogram, TripletReport), AnalysisError> {
    let h = build_threefold_histogram(stream, &cfg.binning)?;
    let report = report_from_histogram(&h, cfg)?;
    Ok((h, report))
}

pub fn report_from_histogram(
    h: &Coincidence2DHistogram,
    cfg: &AnalysisConfig,
) -> Result<TripletReport, AnalysisError> {
    let peak = match locate_central_peak(h, cfg.peak_search_radius) {
        Ok(p) => Some(p),
        Err(AnalysisError::PeakNotFound) => None,
        Err(e) => return Err(e),
    };
    let (p1, p3, central) = match peak {
        Some(p) => (p.i1, p.i3, p.count),
        None => {
            let z = h.zero_index().ok_or(AnalysisError::PeakNotFound)?;
            (z, z, h.get(z, z))
        }
    };
    let acc = accidental_mean(h, (p1, p3), cfg.binning.rep_period)?;
    let occupancy = occupancy_histogram(h);
    let noise_fit = poisson_fit(&occupancy, cfg.outlier_rule)?;
    let noise_mean = noise_fit.mean;
    let success_probability = cfg
        .n_pulses
        .map(|n| success_probability_estimate(central, n))
        .transpose()?;
    Ok(TripletReport {
        total_reference_events: h.total_reference_events,
        n_bins: h.n_bins(),
        bin_width: h.bin_width(),
        peak,
        central_count: central,
        central_error: (central as f64).sqrt(),
        accidental_mean: acc.mean,
        accidental_sites: acc.n_sites(),
        car: car(central, acc.mean, acc.n_sites()),
        snr: snr(central, noise_mean, h.n_bins()),
        noise_probability: noise_tail_probability(noise_mean, central)?,
        noise_fit,
        noise_mean_per_bin: noise_mean,
        success_probability,
        occupancy,
    })
}
