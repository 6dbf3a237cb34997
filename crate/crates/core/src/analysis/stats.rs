//! Peak extraction, accidentals and counting statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::histogram::Coincidence2DHistogram;
use super::AnalysisError;
use crate::model::{self, ModelError};

pub const DEFAULT_PEAK_SEARCH_RADIUS: usize = 3;
/// Fewest neighbour-pulse bins accepted for an accidental estimate.
pub const MIN_ACCIDENTAL_SITES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakLocation {
    pub i1: usize,
    pub i3: usize,
    pub count: u64,
    /// Bin-centre delays τ1−τ2 and τ3−τ2, seconds.
    pub delay1: f64,
    pub delay3: f64,
}

/// Largest bin within `radius` bins of zero delay. Ties go to the bin closest
/// to zero delay, then to the lexicographically smallest index.
pub fn locate_central_peak(
    h: &Coincidence2DHistogram,
    radius: usize,
) -> Result<PeakLocation, AnalysisError> {
    let zero = h.zero_index().ok_or(AnalysisError::PeakNotFound)?;
    let lo = zero.saturating_sub(radius);
    let hi = (zero + radius).min(h.side() - 1);
    let mut best: Option<(u64, usize, usize, usize)> = None;
    for i1 in lo..=hi {
        for i3 in lo..=hi {
            let count = h.get(i1, i3);
            let dist = i1.abs_diff(zero).pow(2) + i3.abs_diff(zero).pow(2);
            let better = match best {
                None => true,
                Some((c, d, b1, b3)) => {
                    count > c || (count == c && (dist < d || (dist == d && (i1, i3) < (b1, b3))))
                }
            };
            if better {
                best = Some((count, dist, i1, i3));
            }
        }
    }
    match best {
        Some((count, _, i1, i3)) if count > 0 => Ok(PeakLocation {
            i1,
            i3,
            count,
            delay1: h.delay(i1),
            delay3: h.delay(i3),
        }),
        _ => Err(AnalysisError::PeakNotFound),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSite {
    /// Pulse displacement of channel 1 and channel 3.
    pub j1: i64,
    pub j3: i64,
    pub i1: usize,
    pub i3: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accidentals {
    pub mean: f64,
    pub sites: Vec<NeighborSite>,
}

impl Accidentals {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }
}

/// Mean count over the bins displaced from the peak by whole repetition
/// periods along either or both axes, keeping those inside the window.
pub fn accidental_mean(
    h: &Coincidence2DHistogram,
    peak: (usize, usize),
    rep_period: f64,
) -> Result<Accidentals, AnalysisError> {
    let rep_bins = rep_period / h.bin_width();
    if !(rep_bins >= 1.0)
        || ((rep_bins - rep_bins.round()) / rep_bins).abs() > super::histogram::REP_PERIOD_TOLERANCE
    {
        return Err(AnalysisError::Binning(format!(
            "rep_period is {rep_bins:.4} bins, not a whole number within 1 %"
        )));
    }
    let side = h.side() as i64;
    let reach = (side as f64 / rep_bins).ceil() as i64;
    let shift = |p: usize, j: i64| -> Option<usize> {
        let i = p as i64 + (j as f64 * rep_bins).round() as i64;
        (0..side).contains(&i).then_some(i as usize)
    };
    let mut sites = Vec::new();
    for j1 in -reach..=reach {
        for j3 in -reach..=reach {
            if (j1, j3) == (0, 0) {
                continue;
            }
            if let (Some(i1), Some(i3)) = (shift(peak.0, j1), shift(peak.1, j3)) {
                sites.push(NeighborSite {
                    j1,
                    j3,
                    i1,
                    i3,
                    count: h.get(i1, i3),
                });
            }
        }
    }
    if sites.len() < MIN_ACCIDENTAL_SITES {
        return Err(AnalysisError::InsufficientSites { found: sites.len() });
    }
    let mean = sites.iter().map(|s| s.count as f64).sum::<f64>() / sites.len() as f64;
    Ok(Accidentals { mean, sites })
}

/// A ratio that may be unbounded for lack of a denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ratio {
    Value { value: f64, error: f64 },
    /// Denominator estimated as zero; the true value is at least this.
    LowerBound { value: f64 },
    Undefined { reason: String },
}

impl Ratio {
    pub fn value(&self) -> Option<f64> {
        match self {
            Ratio::Value { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Coincidences-to-accidentals ratio with Poisson error propagated from the
/// central count and from `n_sites` accidental bins.
pub fn car(central: u64, accidental_mean: f64, n_sites: usize) -> Ratio {
    let c = central as f64;
    if accidental_mean > 0.0 && n_sites > 0 {
        let a = accidental_mean;
        let n = n_sites as f64;
        Ratio::Value {
            value: c / a,
            error: (c / (a * a) + c * c / (n * a * a * a)).sqrt(),
        }
    } else if central > 0 && n_sites > 0 {
        // No accidentals in n bins: their mean is below ~1/n.
        Ratio::LowerBound {
            value: c * n_sites as f64,
        }
    } else {
        Ratio::Undefined {
            reason: "no coincidences and no accidentals".into(),
        }
    }
}

/// Central count over the mean noise count per bin.
pub fn snr(central: u64, noise_mean: f64, n_bins: usize) -> Ratio {
    let c = central as f64;
    if noise_mean > 0.0 {
        Ratio::Value {
            value: c / noise_mean,
            error: c.sqrt() / noise_mean,
        }
    } else if central > 0 && n_bins > 0 {
        Ratio::LowerBound {
            value: c * n_bins as f64,
        }
    } else {
        Ratio::Undefined {
            reason: "no signal and no noise".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Detected triplets per pump pulse with Poisson error.
pub fn success_probability_estimate(central: u64, n_pulses: u64) -> Result<Estimate, AnalysisError> {
    if n_pulses == 0 {
        return Err(AnalysisError::ZeroPulses);
    }
    let n = n_pulses as f64;
    Ok(Estimate {
        value: central as f64 / n,
        error: (central as f64).sqrt() / n,
    })
}

/// How many bins hold each count.
pub fn occupancy_histogram(h: &Coincidence2DHistogram) -> BTreeMap<u64, u64> {
    let mut occ = BTreeMap::new();
    for &c in &h.counts {
        *occ.entry(c).or_insert(0) += 1;
    }
    occ
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum OutlierRule {
    None,
    /// Drop counts above `mean + k·√mean`, iterating to a fixed point.
    SigmaAbove(f64),
    /// Drop counts above a fixed value.
    CountAbove(u64),
}

impl Default for OutlierRule {
    fn default() -> Self {
        OutlierRule::SigmaAbove(10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonFit {
    pub mean: f64,
    /// Standard error of the mean estimator, `√(mean/n)`.
    pub std_error: f64,
    pub included_bins: u64,
    /// Count values removed as outliers, with their multiplicities.
    pub excluded: BTreeMap<u64, u64>,
    pub chi_square: f64,
    pub dof: i64,
}

/// Expected frequency below which tail classes are pooled for χ².
const MIN_EXPECTED: f64 = 5.0;

/// Maximum-likelihood Poisson mean of an occupancy table.
pub fn poisson_fit(occupancy: &BTreeMap<u64, u64>, rule: OutlierRule) -> Result<PoissonFit, AnalysisError> {
    if occupancy.values().all(|&n| n == 0) {
        return Err(AnalysisError::EmptyOccupancy);
    }
    let stats = |limit: Option<f64>| -> (u64, f64) {
        occupancy
            .iter()
            .filter(|(&k, _)| limit.is_none_or(|l| k as f64 <= l))
            .fold((0, 0.0), |(n, s), (&k, &f)| (n + f, s + (k * f) as f64))
    };
    let mut limit = match rule {
        OutlierRule::None => None,
        OutlierRule::CountAbove(c) => Some(c as f64),
        OutlierRule::SigmaAbove(_) => Some(f64::INFINITY),
    };
    if let OutlierRule::SigmaAbove(k) = rule {
        for _ in 0..100 {
            let (n, s) = stats(limit);
            if n == 0 {
                break;
            }
            let mean = s / n as f64;
            let next = mean + k * mean.sqrt();
            if Some(next) == limit {
                break;
            }
            limit = Some(next);
        }
    }
    let (n, sum) = stats(limit);
    if n == 0 {
        return Err(AnalysisError::AllExcluded);
    }
    let mean = sum / n as f64;
    let excluded: BTreeMap<u64, u64> = occupancy
        .iter()
        .filter(|(&k, &f)| f > 0 && limit.is_some_and(|l| k as f64 > l))
        .map(|(&k, &f)| (k, f))
        .collect();

    // χ² over classes 0, 1, … with the tail pooled once expectations get small.
    let included = |k: u64| limit.is_none_or(|l| k as f64 <= l);
    let observed = |k: u64| if included(k) { occupancy.get(&k).copied().unwrap_or(0) } else { 0 };
    let pmf = |k: u64| model::poisson_pair_probability(mean, k).unwrap_or(0.0);
    let nf = n as f64;
    let mut chi_square = 0.0;
    let mut classes = 0i64;
    let mut k = 0u64;
    let mut cdf = 0.0;
    let mut seen = 0u64;
    loop {
        let p = pmf(k);
        let e = nf * p;
        let tail = nf * (1.0 - cdf - p).max(0.0);
        if e < MIN_EXPECTED || tail < MIN_EXPECTED {
            let e_rest = nf * (1.0 - cdf).max(0.0);
            let o_rest = (n - seen) as f64;
            if e_rest > 0.0 {
                chi_square += (o_rest - e_rest).powi(2) / e_rest;
                classes += 1;
            }
            break;
        }
        let o = observed(k) as f64;
        chi_square += (o - e).powi(2) / e;
        classes += 1;
        seen += observed(k);
        cdf += p;
        k += 1;
    }

    Ok(PoissonFit {
        mean,
        std_error: (mean / nf).sqrt(),
        included_bins: n,
        excluded,
        chi_square,
        dof: classes - 2,
    })
}

/// Probability that a noise-only bin of mean `mean` holds exactly `n` counts.
pub fn noise_tail_probability(mean: f64, n: u64) -> Result<f64, ModelError> {
    model::poisson_pair_probability(mean, n)
}
