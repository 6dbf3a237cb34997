//! Quasi-phase-matching of the two down-conversion stages.
//!
//! Wave numbers are `k = 2π·n_eff(λ, θ)/λ`; a poling period `Λ` adds the
//! grating wave number `±2π/Λ` to the mismatch `Δk = k_p − k_s − k_i`.
//! All wavelengths are in metres, temperatures in °C, wave numbers in 1/m.

mod dispersion;
mod fit;
mod roots;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dispersion::{DispersionModel, IndexFormula, SellmeierCoefficients};
pub use fit::{fit_gaussian, FitFailure, GaussianFit};
pub use roots::{brent, Root};

/// Largest accepted `|Δk|` at a reported solution, 1/m.
pub const MISMATCH_TOLERANCE: f64 = 1e-3;
/// Brent stopping width in metres.
pub const ROOT_XTOL: f64 = 1e-21;
pub const ROOT_MAX_ITER: usize = 200;
/// Grid used to locate sign changes before refining.
pub const ROOT_SCAN_POINTS: usize = 400;
pub const ACCEPTANCE_SIGNAL_POINTS: usize = 1000;
/// Half-width of the signal integration window, in sinc lobes.
pub const ACCEPTANCE_LOBES: f64 = 4.0;
/// Default secondary-stage interaction length, m.
pub const STAGE2_LENGTH: f64 = 19.2e-3;
/// Pump-scan half-width times interaction length, m².
const ACCEPTANCE_SCAN_SCALE: f64 = 1.6e-11;

/// Pump wavelength of the primary stage.
pub const STAGE1_PUMP: f64 = 532e-9;
/// Primary signal at the principal operating point; also the secondary pump.
pub const STAGE1_SIGNAL: f64 = 790.5e-9;
/// Principal operating temperature used for calibration, °C.
pub const CALIBRATION_TEMPERATURE: f64 = 163.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseMatchError {
    #[error("wavelength {wavelength:e} m outside model range [{min:e}, {max:e}] m")]
    WavelengthOutOfRange { wavelength: f64, min: f64, max: f64 },
    #[error("temperature {temperature} °C outside model range [{min}, {max}] °C")]
    TemperatureOutOfRange { temperature: f64, min: f64, max: f64 },
    #[error("signal wavelength {signal:e} m must exceed pump wavelength {pump:e} m")]
    SignalBelowPump { pump: f64, signal: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("no phase-matched signal in [{lo:e}, {hi:e}] m")]
    NoRoot { lo: f64, hi: f64 },
    #[error("root refinement stalled with |Δk| = {residual:e} 1/m")]
    NotConverged { residual: f64 },
    #[error("Gaussian fit failed: {reason} (relative rms residual {relative_rms:e})")]
    Fit { reason: String, relative_rms: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GratingSign {
    Plus,
    Minus,
}

impl GratingSign {
    pub fn value(self) -> f64 {
        match self {
            GratingSign::Plus => 1.0,
            GratingSign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpmGrating {
    /// Poling period Λ in m.
    pub poling_period: f64,
    pub sign: GratingSign,
}

impl QpmGrating {
    pub fn new(poling_period: f64, sign: GratingSign) -> Result<Self, PhaseMatchError> {
        if !(poling_period > 0.0) || !poling_period.is_finite() {
            return Err(PhaseMatchError::Invalid(format!(
                "poling period must be positive, got {poling_period}"
            )));
        }
        Ok(Self { poling_period, sign })
    }

    pub fn wavenumber(&self) -> f64 {
        self.sign.value() * 2.0 * PI / self.poling_period
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpmProcess {
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub lambda_i: f64,
    pub temperature: f64,
    pub grating: QpmGrating,
    pub dispersion: DispersionModel,
}

impl QpmProcess {
    /// Builds the process with the idler fixed by energy conservation.
    pub fn new(
        lambda_p: f64,
        lambda_s: f64,
        temperature: f64,
        grating: QpmGrating,
        dispersion: DispersionModel,
    ) -> Result<Self, PhaseMatchError> {
        let lambda_i = idler_partner(lambda_p, lambda_s)?;
        Ok(Self {
            lambda_p,
            lambda_s,
            lambda_i,
            temperature,
            grating,
            dispersion,
        })
    }
}

/// Idler wavelength closing `1/λ_p = 1/λ_s + 1/λ_i`.
pub fn idler_partner(lambda_p: f64, lambda_s: f64) -> Result<f64, PhaseMatchError> {
    if !(lambda_p > 0.0) || !lambda_p.is_finite() {
        return Err(PhaseMatchError::Invalid(format!("pump wavelength {lambda_p}")));
    }
    if !(lambda_s > lambda_p) || !lambda_s.is_finite() {
        return Err(PhaseMatchError::SignalBelowPump {
            pump: lambda_p,
            signal: lambda_s,
        });
    }
    Ok(lambda_p * lambda_s / (lambda_s - lambda_p))
}

/// Pump wavelength recombined from signal and idler.
pub fn recombined_pump(lambda_s: f64, lambda_i: f64) -> f64 {
    lambda_s * lambda_i / (lambda_s + lambda_i)
}

fn material_mismatch(
    dispersion: &DispersionModel,
    temperature: f64,
    lambda_p: f64,
    lambda_s: f64,
    lambda_i: f64,
) -> Result<f64, PhaseMatchError> {
    Ok(dispersion.wavenumber(lambda_p, temperature)?
        - dispersion.wavenumber(lambda_s, temperature)?
        - dispersion.wavenumber(lambda_i, temperature)?)
}

/// `Δk = k_p − k_s − k_i ± 2π/Λ`.
pub fn phase_mismatch(p: &QpmProcess) -> Result<f64, PhaseMatchError> {
    Ok(material_mismatch(&p.dispersion, p.temperature, p.lambda_p, p.lambda_s, p.lambda_i)?
        + p.grating.wavenumber())
}

fn mismatch_at_signal(
    dispersion: &DispersionModel,
    grating: &QpmGrating,
    temperature: f64,
    lambda_p: f64,
    lambda_s: f64,
) -> Result<f64, PhaseMatchError> {
    let lambda_i = idler_partner(lambda_p, lambda_s)?;
    Ok(material_mismatch(dispersion, temperature, lambda_p, lambda_s, lambda_i)? + grating.wavenumber())
}

/// Poling period that phase-matches `λ_p → λ_s + λ_i` exactly at `temperature`.
pub fn grating_for_process(
    lambda_p: f64,
    lambda_s: f64,
    temperature: f64,
    dispersion: &DispersionModel,
) -> Result<QpmGrating, PhaseMatchError> {
    let lambda_i = idler_partner(lambda_p, lambda_s)?;
    let dk = material_mismatch(dispersion, temperature, lambda_p, lambda_s, lambda_i)?;
    let kp = dispersion.wavenumber(lambda_p, temperature)?;
    if dk.abs() <= 1e-12 * kp {
        return Err(PhaseMatchError::Invalid(
            "material mismatch vanishes; no finite poling period".into(),
        ));
    }
    let sign = if dk > 0.0 { GratingSign::Minus } else { GratingSign::Plus };
    QpmGrating::new(2.0 * PI / dk.abs(), sign)
}

/// Primary stage calibrated to 532 nm → 790.5 nm at 163.5 °C.
pub fn stage1_calibrated(dispersion: &DispersionModel) -> Result<QpmGrating, PhaseMatchError> {
    grating_for_process(STAGE1_PUMP, STAGE1_SIGNAL, CALIBRATION_TEMPERATURE, dispersion)
}

/// Secondary stage calibrated to degenerate emission at 2 × 790.5 nm and 163.5 °C.
pub fn stage2_calibrated(dispersion: &DispersionModel) -> Result<QpmGrating, PhaseMatchError> {
    grating_for_process(STAGE1_SIGNAL, 2.0 * STAGE1_SIGNAL, CALIBRATION_TEMPERATURE, dispersion)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSolution {
    pub lambda_s: f64,
    pub lambda_i: f64,
    pub mismatch: f64,
    /// Number of distinct roots seen in the bracket.
    pub roots_in_bracket: usize,
}

impl SignalSolution {
    pub fn is_multiple(&self) -> bool {
        self.roots_in_bracket > 1
    }
}

/// Finds the signal wavelength with `Δk = 0` inside `bracket`.
///
/// The bracket is scanned for sign changes, each is refined with Brent's
/// method, and the root nearest the bracket centre is returned.
pub fn solve_phasematched_signal(
    lambda_p: f64,
    grating: &QpmGrating,
    temperature: f64,
    dispersion: &DispersionModel,
    bracket: (f64, f64),
) -> Result<SignalSolution, PhaseMatchError> {
    let (lo, hi) = bracket;
    if !(lo < hi) {
        return Err(PhaseMatchError::Invalid(format!("empty bracket [{lo}, {hi}]")));
    }
    if lo <= lambda_p {
        return Err(PhaseMatchError::SignalBelowPump {
            pump: lambda_p,
            signal: lo,
        });
    }
    let f = |ls: f64| mismatch_at_signal(dispersion, grating, temperature, lambda_p, ls);
    let xs: Vec<f64> = (0..=ROOT_SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / ROOT_SCAN_POINTS as f64)
        .collect();
    let ys = xs.iter().map(|&x| f(x)).collect::<Result<Vec<_>, _>>()?;

    let mut roots = Vec::new();
    for i in 0..ROOT_SCAN_POINTS {
        let (y0, y1) = (ys[i], ys[i + 1]);
        if y0 == 0.0 {
            roots.push(xs[i]);
        } else if y0.signum() != y1.signum() && y1 != 0.0 {
            let root = brent(|x| f(x).unwrap_or(f64::NAN), xs[i], xs[i + 1], ROOT_XTOL, ROOT_MAX_ITER)
                .ok_or(PhaseMatchError::NoRoot { lo, hi })?;
            roots.push(root.x);
        }
    }
    if ys[ROOT_SCAN_POINTS] == 0.0 {
        roots.push(hi);
    }
    let centre = 0.5 * (lo + hi);
    let lambda_s = roots
        .iter()
        .cloned()
        .min_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs()))
        .ok_or(PhaseMatchError::NoRoot { lo, hi })?;
    let mismatch = f(lambda_s)?;
    if mismatch.abs() >= MISMATCH_TOLERANCE {
        return Err(PhaseMatchError::NotConverged { residual: mismatch.abs() });
    }
    Ok(SignalSolution {
        lambda_s,
        lambda_i: idler_partner(lambda_p, lambda_s)?,
        mismatch,
        roots_in_bracket: roots.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningPoint {
    pub temperature: f64,
    /// `None` where no phase-matched signal exists in the bracket.
    pub solution: Option<SignalSolution>,
}

/// Evenly spaced temperatures from `theta_range.0` to `theta_range.1`
/// inclusive (a single step uses the lower bound).
pub fn temperature_grid(theta_range: (f64, f64), steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![theta_range.0],
        n => (0..n)
            .map(|i| theta_range.0 + (theta_range.1 - theta_range.0) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Phase-matched signal and idler over a temperature grid. Points without a
/// root are marked absent; range violations are reported as errors.
pub fn temperature_tuning_curve(
    grating: &QpmGrating,
    lambda_p: f64,
    theta_range: (f64, f64),
    steps: usize,
    dispersion: &DispersionModel,
    bracket: (f64, f64),
) -> Result<Vec<TuningPoint>, PhaseMatchError> {
    temperature_grid(theta_range, steps)
        .into_par_iter()
        .map(|temperature| {
            match solve_phasematched_signal(lambda_p, grating, temperature, dispersion, bracket) {
                Ok(solution) => Ok(TuningPoint {
                    temperature,
                    solution: Some(solution),
                }),
                Err(PhaseMatchError::NoRoot { .. }) => Ok(TuningPoint {
                    temperature,
                    solution: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

fn sinc2(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 3.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// `Δk` of second-harmonic generation at fundamental `λ_F`.
pub fn shg_mismatch(
    grating: &QpmGrating,
    temperature: f64,
    dispersion: &DispersionModel,
    fundamental: f64,
) -> Result<f64, PhaseMatchError> {
    Ok(material_mismatch(dispersion, temperature, 0.5 * fundamental, fundamental, fundamental)?
        + grating.wavenumber())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShgPeak {
    pub fundamental: f64,
    /// Normalized efficiency `sinc²(Δk·L/2)` at the peak.
    pub efficiency: f64,
    /// Set when the maximum sits on the first or last scan point.
    pub at_boundary: bool,
    pub curve: Vec<(f64, f64)>,
}

/// Fundamental wavelength that maximizes the SHG response over `scan`.
pub fn shg_peak_wavelength(
    grating: &QpmGrating,
    temperature: f64,
    dispersion: &DispersionModel,
    length: f64,
    scan: (f64, f64),
    points: usize,
) -> Result<ShgPeak, PhaseMatchError> {
    if !(length > 0.0) {
        return Err(PhaseMatchError::Invalid(format!("length must be positive, got {length}")));
    }
    if points < 3 || !(scan.0 < scan.1) {
        return Err(PhaseMatchError::Invalid("SHG scan needs >= 3 points over a non-empty range".into()));
    }
    let xs: Vec<f64> = (0..points)
        .map(|i| scan.0 + (scan.1 - scan.0) * i as f64 / (points - 1) as f64)
        .collect();
    let dks = xs
        .iter()
        .map(|&x| shg_mismatch(grating, temperature, dispersion, x))
        .collect::<Result<Vec<_>, _>>()?;
    let curve: Vec<(f64, f64)> = xs
        .iter()
        .zip(&dks)
        .map(|(&x, &dk)| (x, sinc2(0.5 * dk * length)))
        .collect();
    let imax = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap();
    let at_boundary = imax == 0 || imax == points - 1;
    if at_boundary {
        log::warn!("SHG maximum at the scan boundary ({:.4} nm)", xs[imax] * 1e9);
    }

    // Refine: exact zero of Δk next to the grid maximum if there is one.
    let lo = imax.saturating_sub(1);
    let hi = (imax + 1).min(points - 1);
    let f = |x: f64| shg_mismatch(grating, temperature, dispersion, x).unwrap_or(f64::NAN);
    let refined = [(lo, imax), (imax, hi)]
        .iter()
        .filter(|(a, b)| a != b && dks[*a].signum() != dks[*b].signum())
        .find_map(|&(a, b)| brent(f, xs[a], xs[b], ROOT_XTOL, ROOT_MAX_ITER))
        .map(|r| r.x);
    let fundamental = refined.unwrap_or(xs[imax]);
    let efficiency = sinc2(0.5 * shg_mismatch(grating, temperature, dispersion, fundamental)? * length);
    Ok(ShgPeak {
        fundamental,
        efficiency,
        at_boundary,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceBandwidth {
    pub fwhm: f64,
    /// Centre of the Gaussian fit.
    pub peak: f64,
    /// Pump wavelength of the largest integrated response on the grid.
    pub grid_peak: f64,
    /// Pump wavelength whose degenerate signal is exactly phase-matched.
    pub degeneracy_pump: f64,
    pub fit: GaussianFit,
    /// Signal integration window used for every pump wavelength.
    pub signal_window: (f64, f64),
    /// (pump wavelength, integrated response in m).
    pub curve: Vec<(f64, f64)>,
}

/// Whether every signal/idler pair of the window stays inside the model
/// range for both ends of the pump scan.
fn window_in_range(
    pump_scan: (f64, f64),
    centre: f64,
    w: f64,
    temperature: f64,
    dispersion: &DispersionModel,
) -> bool {
    [pump_scan.0, pump_scan.1].iter().all(|&lp| {
        [centre - w, centre + w].iter().all(|&ls| {
            idler_partner(lp, ls).is_ok_and(|li| {
                dispersion.check(ls, temperature).is_ok() && dispersion.check(li, temperature).is_ok()
            })
        })
    })
}

/// Half-width of the signal window around `centre` over which the sinc²
/// argument moves by `ACCEPTANCE_LOBES·π`, capped by the model range.
fn signal_half_width(
    pump_scan: (f64, f64),
    centre: f64,
    grating: &QpmGrating,
    temperature: f64,
    dispersion: &DispersionModel,
    length: f64,
) -> Result<f64, PhaseMatchError> {
    let lambda_p = 0.5 * (pump_scan.0 + pump_scan.1);
    dispersion.check(centre, temperature)?;
    if !window_in_range(pump_scan, centre, 0.0, temperature, dispersion) {
        let li = idler_partner(pump_scan.1, centre)?;
        dispersion.check(li, temperature)?;
    }
    let limit = {
        let (mut a, mut b) = (0.0, 0.5 * centre);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if window_in_range(pump_scan, centre, m, temperature, dispersion) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let target = 2.0 * ACCEPTANCE_LOBES * PI / length;
    let dk0 = mismatch_at_signal(dispersion, grating, temperature, lambda_p, centre)?;
    let excursion = |w: f64| -> Result<f64, PhaseMatchError> {
        let a = mismatch_at_signal(dispersion, grating, temperature, lambda_p, centre - w)?;
        let b = mismatch_at_signal(dispersion, grating, temperature, lambda_p, centre + w)?;
        Ok((a - dk0).abs().max((b - dk0).abs()))
    };
    if excursion(limit)? < target {
        log::warn!(
            "signal window capped at ±{:.2} nm by the model range",
            limit * 1e9
        );
        return Ok(limit);
    }
    let mut w = 1e-12_f64.min(limit);
    while excursion(w)? < target {
        w = (2.0 * w).min(limit);
    }
    let (mut a, mut b) = (0.5 * w, w);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if excursion(m)? < target {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(b)
}

/// Pump acceptance of a down-conversion stage.
///
/// For each pump wavelength in `pump_scan` the sinc² phase-matching response
/// is integrated over a fixed signal window (1000 points spanning ±4 lobes
/// around the degenerate signal at the scan centre); a Gaussian is then
/// fitted to the integrated curve.
pub fn pump_acceptance_bandwidth(
    grating: &QpmGrating,
    temperature: f64,
    dispersion: &DispersionModel,
    length: f64,
    pump_scan: (f64, f64),
    pump_points: usize,
) -> Result<AcceptanceBandwidth, PhaseMatchError> {
    if !(length > 0.0) {
        return Err(PhaseMatchError::Invalid(format!("length must be positive, got {length}")));
    }
    if pump_points < 5 || !(pump_scan.0 < pump_scan.1) {
        return Err(PhaseMatchError::Invalid("pump scan needs >= 5 points over a non-empty range".into()));
    }
    let degeneracy = degeneracy_pump(grating, temperature, dispersion, pump_scan)?;
    let centre = 2.0 * degeneracy;
    let half = signal_half_width(pump_scan, centre, grating, temperature, dispersion, length)?;
    let signal_window = (centre - half, centre + half);

    let pumps: Vec<f64> = (0..pump_points)
        .map(|i| pump_scan.0 + (pump_scan.1 - pump_scan.0) * i as f64 / (pump_points - 1) as f64)
        .collect();
    let response = pumps
        .par_iter()
        .map(|&lp| {
            acceptance_response(
                grating,
                temperature,
                dispersion,
                length,
                lp,
                signal_window,
                ACCEPTANCE_SIGNAL_POINTS,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let fit = fit_gaussian(&pumps, &response).map_err(|f| PhaseMatchError::Fit {
        reason: f.reason,
        relative_rms: f.relative_rms,
    })?;
    let grid_peak = pumps
        .iter()
        .zip(&response)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(&x, _)| x)
        .unwrap();
    Ok(AcceptanceBandwidth {
        fwhm: fit.fwhm(),
        degeneracy_pump: degeneracy,
        peak: fit.center,
        grid_peak,
        fit,
        signal_window,
        curve: pumps.into_iter().zip(response).collect(),
    })
}

/// Pump scan around `centre` wide enough to cover the acceptance curve of a
/// stage of the given length. The width scales as `1/length`.
pub fn acceptance_scan(centre: f64, length: f64) -> (f64, f64) {
    let h = ACCEPTANCE_SCAN_SCALE / length;
    (centre - h, centre + h)
}

/// Pump wavelength in `pump_scan` with `Δk(λ_p, 2λ_p, 2λ_p) = 0`.
pub fn degeneracy_pump(
    grating: &QpmGrating,
    temperature: f64,
    dispersion: &DispersionModel,
    pump_scan: (f64, f64),
) -> Result<f64, PhaseMatchError> {
    let f = |lp: f64| shg_mismatch(grating, temperature, dispersion, 2.0 * lp);
    f(pump_scan.0)?;
    f(pump_scan.1)?;
    brent(|lp| f(lp).unwrap_or(f64::NAN), pump_scan.0, pump_scan.1, ROOT_XTOL, ROOT_MAX_ITER)
        .map(|r| r.x)
        .ok_or(PhaseMatchError::NoRoot {
            lo: pump_scan.0,
            hi: pump_scan.1,
        })
}

/// `∫ sinc²(Δk·L/2) dλ_s` over `window`, summed on `points` evenly spaced
/// signal wavelengths, in m.
pub fn acceptance_response(
    grating: &QpmGrating,
    temperature: f64,
    dispersion: &DispersionModel,
    length: f64,
    lambda_p: f64,
    window: (f64, f64),
    points: usize,
) -> Result<f64, PhaseMatchError> {
    if points < 2 {
        return Err(PhaseMatchError::Invalid("need at least two signal points".into()));
    }
    let step = (window.1 - window.0) / (points - 1) as f64;
    let sum = (0..points).try_fold(0.0, |acc, j| {
        let ls = window.0 + step * j as f64;
        let dk = mismatch_at_signal(dispersion, grating, temperature, lambda_p, ls)?;
        Ok::<_, PhaseMatchError>(acc + sinc2(0.5 * dk * length))
    })?;
    Ok(sum * step)
}

/// Overlap of two co-centred unit-area Gaussian spectra, normalized so that
/// equal widths give 1: `√(2σ₁σ₂/(σ₁² + σ₂²))`.
pub fn spectral_overlap(fwhm_source: f64, fwhm_acceptance: f64) -> Result<f64, PhaseMatchError> {
    for w in [fwhm_source, fwhm_acceptance] {
        if !(w > 0.0) || !w.is_finite() {
            return Err(PhaseMatchError::Invalid(format!("FWHM must be positive, got {w}")));
        }
    }
    let (a, b) = (fwhm_source, fwhm_acceptance);
    Ok((2.0 * a * b / (a * a + b * b)).sqrt())
}

/// Source FWHM, broader than `fwhm_acceptance`, giving the requested overlap.
pub fn source_fwhm_for_overlap(overlap: f64, fwhm_acceptance: f64) -> Result<f64, PhaseMatchError> {
    if !(overlap > 0.0 && overlap <= 1.0) {
        return Err(PhaseMatchError::Invalid(format!("overlap must lie in (0, 1], got {overlap}")));
    }
    let e2 = overlap * overlap;
    Ok(fwhm_acceptance * (1.0 + (1.0 - e2 * e2).sqrt()) / e2)
}
