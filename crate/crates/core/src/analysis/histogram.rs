//! Pseudo-heralded two-dimensional three-fold histograms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::stream::{Channel, TimeTagStream};

/// Time binning of the delay plane. All durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningConfig {
    /// Native bin of the time tagger.
    pub base_bin: f64,
    /// Native bins per analysis bin.
    pub merge_factor: u32,
    /// Half-width of the delay window along each axis.
    pub window_half_span: f64,
    pub rep_period: f64,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            base_bin: 82.3125e-12,
            merge_factor: 16,
            window_half_span: 300e-9,
            rep_period: 100e-9,
        }
    }
}

/// Relative slack allowed between `base_bin` and the stream tick.
const BASE_BIN_TOLERANCE: f64 = 1e-3;
/// Relative slack allowed between the repetition period and a whole number of bins.
pub const REP_PERIOD_TOLERANCE: f64 = 0.01;

impl BinningConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |msg: String| Err(AnalysisError::Binning(msg));
        if self.merge_factor < 1 {
            return bad("merge_factor must be >= 1".into());
        }
        for (name, v) in [
            ("base_bin", self.base_bin),
            ("window_half_span", self.window_half_span),
            ("rep_period", self.rep_period),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let rep = self.rep_period / self.merged_width();
        if rep < 1.0 || ((rep - rep.round()) / rep).abs() > REP_PERIOD_TOLERANCE {
            return bad(format!(
                "rep_period is {rep:.4} merged bins, not a whole number within 1 %"
            ));
        }
        Ok(())
    }

    pub fn merged_width(&self) -> f64 {
        self.base_bin * self.merge_factor as f64
    }

    /// Merged bins on each side of the zero-delay bin.
    pub fn half_bins(&self) -> i64 {
        (self.window_half_span / self.merged_width() - 0.5).ceil().max(0.0) as i64
    }

    fn base_ticks(&self, resolution_fs: u64) -> Result<u64, AnalysisError> {
        let exact = self.base_bin * 1e15 / resolution_fs as f64;
        let ticks = exact.round();
        if ticks < 1.0 || ((exact - ticks) / exact).abs() > BASE_BIN_TOLERANCE {
            return Err(AnalysisError::Binning(format!(
                "base bin {:.4e} s is not a whole number of {resolution_fs} fs ticks",
                self.base_bin
            )));
        }
        Ok(ticks as u64)
    }

    /// Analysis-resolution axis centred on zero delay.
    pub fn merged_axis(&self, resolution_fs: u64) -> Result<BinAxis, AnalysisError> {
        self.validate()?;
        let width = self.base_ticks(resolution_fs)? * self.merge_factor as u64;
        let h = self.half_bins();
        Ok(BinAxis {
            origin: -h * width as i64 - (width / 2) as i64,
            width,
            len: (2 * h + 1) as usize,
        })
    }

    /// Native-resolution axis covering exactly the merged axis.
    pub fn fine_axis(&self, resolution_fs: u64) -> Result<BinAxis, AnalysisError> {
        let merged = self.merged_axis(resolution_fs)?;
        let f = self.merge_factor as u64;
        Ok(BinAxis {
            origin: merged.origin,
            width: merged.width / f,
            len: merged.len * f as usize,
        })
    }
}

/// Uniform grid of delays in ticks. Bin `i` holds `[origin + i·width, origin + (i+1)·width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinAxis {
    pub origin: i64,
    pub width: u64,
    pub len: usize,
}

impl BinAxis {
    pub fn index(&self, delay: i64) -> Option<usize> {
        let rel = delay as i128 - self.origin as i128;
        if rel < 0 {
            return None;
        }
        let i = rel / self.width as i128;
        (i < self.len as i128).then_some(i as usize)
    }

    /// First delay past the last bin.
    pub fn end(&self) -> i64 {
        self.origin + (self.len as u64 * self.width) as i64
    }

    /// Centre of bin `i`, in ticks.
    pub fn center(&self, i: usize) -> f64 {
        self.origin as f64 + (i as f64 + 0.5) * self.width as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coincidence2DHistogram {
    /// Shared by τ1−τ2 (rows) and τ3−τ2 (columns).
    pub axis: BinAxis,
    pub resolution_fs: u64,
    /// Row-major, `counts[i1 * len + i3]`.
    pub counts: Vec<u64>,
    /// Channel-2 events used as references.
    pub total_reference_events: u64,
}

impl Coincidence2DHistogram {
    pub fn zeros(axis: BinAxis, resolution_fs: u64) -> Self {
        Self {
            axis,
            resolution_fs,
            counts: vec![0; axis.len * axis.len],
            total_reference_events: 0,
        }
    }

    pub fn side(&self) -> usize {
        self.axis.len
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, i1: usize, i3: usize) -> u64 {
        self.counts[i1 * self.axis.len + i3]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin containing zero delay, if inside the window.
    pub fn zero_index(&self) -> Option<usize> {
        self.axis.index(0)
    }

    /// Bin width in seconds.
    pub fn bin_width(&self) -> f64 {
        self.axis.width as f64 * self.resolution_fs as f64 * 1e-15
    }

    /// Delay at the centre of bin `i`, seconds.
    pub fn delay(&self, i: usize) -> f64 {
        self.axis.center(i) * self.resolution_fs as f64 * 1e-15
    }
}

/// Three-fold histogram on the merged grid of `cfg`.
pub fn build_threefold_histogram(
    stream: &TimeTagStream,
    cfg: &BinningConfig,
) -> Result<Coincidence2DHistogram, AnalysisError> {
    build_on_axis(stream, cfg.merged_axis(stream.resolution_fs)?)
}

/// Above this many bins a per-shard copy is too costly; fall back to one shard.
const MAX_SHARDED_BINS: usize = 1 << 22;
const MIN_SHARD_EVENTS: usize = 4096;

/// Counts, for every channel-2 event, each (channel-1, channel-3) pair whose
/// delays both fall on `axis`.
pub fn build_on_axis(
    stream: &TimeTagStream,
    axis: BinAxis,
) -> Result<Coincidence2DHistogram, AnalysisError> {
    if let Some(index) = stream.first_unsorted() {
        return Err(AnalysisError::Unsorted { index });
    }
    if axis.width == 0 || axis.len == 0 {
        return Err(AnalysisError::Binning("empty axis".into()));
    }
    let t1 = stream.timestamps(Channel::Idler1);
    let t2 = stream.timestamps(Channel::Signal2);
    let t3 = stream.timestamps(Channel::Idler2);
    let n_bins = axis.len * axis.len;

    let shards = if n_bins > MAX_SHARDED_BINS {
        1
    } else {
        (t2.len() / MIN_SHARD_EVENTS).clamp(1, 2 * rayon::current_num_threads())
    };
    let chunk = t2.len().div_ceil(shards).max(1);
    let counts = t2
        .par_chunks(chunk)
        .map(|refs| accumulate(refs, &t1, &t3, &axis))
        .reduce_with(|mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        })
        .unwrap_or_else(|| vec![0; n_bins]);

    Ok(Coincidence2DHistogram {
        axis,
        resolution_fs: stream.resolution_fs,
        counts,
        total_reference_events: t2.len() as u64,
    })
}

fn accumulate(refs: &[u64], t1: &[u64], t3: &[u64], axis: &BinAxis) -> Vec<u64> {
    let len = axis.len;
    let mut counts = vec![0u64; len * len];
    let Some(&first) = refs.first() else {
        return counts;
    };
    let lo = axis.origin as i128;
    let hi = axis.end() as i128;
    let start = |ts: &[u64], t: u64, edge: i128| ts.partition_point(|&x| (x as i128) < t as i128 + edge);
    let (mut a1, mut b1) = (start(t1, first, lo), start(t1, first, lo));
    let (mut a3, mut b3) = (start(t3, first, lo), start(t3, first, lo));
    let mut rows = Vec::new();
    let mut cols = Vec::new();

    for &t2 in refs {
        let (from, to) = (t2 as i128 + lo, t2 as i128 + hi);
        while a1 < t1.len() && (t1[a1] as i128) < from {
            a1 += 1;
        }
        b1 = b1.max(a1);
        while b1 < t1.len() && (t1[b1] as i128) < to {
            b1 += 1;
        }
        while a3 < t3.len() && (t3[a3] as i128) < from {
            a3 += 1;
        }
        b3 = b3.max(a3);
        while b3 < t3.len() && (t3[b3] as i128) < to {
            b3 += 1;
        }
        if a1 == b1 || a3 == b3 {
            continue;
        }
        let bin = |t: u64| ((t as i128 - from) / axis.width as i128) as usize;
        rows.clear();
        rows.extend(t1[a1..b1].iter().map(|&t| bin(t) * len));
        cols.clear();
        cols.extend(t3[a3..b3].iter().map(|&t| bin(t)));
        for &r in &rows {
            for &c in &cols {
                counts[r + c] += 1;
            }
        }
    }
    counts
}

/// Sums `factor × factor` blocks. A side that is not a multiple of `factor`
/// is padded with empty bins at the far end.
pub fn merge_bins(
    h: &Coincidence2DHistogram,
    factor: usize,
) -> Result<Coincidence2DHistogram, AnalysisError> {
    if factor < 1 {
        return Err(AnalysisError::Binning("merge factor must be >= 1".into()));
    }
    let side = h.side();
    let merged_side = side.div_ceil(factor);
    let mut counts = vec![0u64; merged_side * merged_side];
    for i in 0..side {
        let row = (i / factor) * merged_side;
        for j in 0..side {
            counts[row + j / factor] += h.counts[i * side + j];
        }
    }
    Ok(Coincidence2DHistogram {
        axis: BinAxis {
            origin: h.axis.origin,
            width: h.axis.width * factor as u64,
            len: merged_side,
        },
        resolution_fs: h.resolution_fs,
        counts,
        total_reference_events: h.total_reference_events,
    })
}
