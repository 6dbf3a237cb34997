//! Photon-number statistics of the primary down-conversion stage and the
//! analytic triplet success probability.
//!
//! The primary stage is pumped by a classical, spectrally multi-mode field, so
//! the number of pairs per pulse is Poisson distributed with mean `⟨m⟩`.
//! Everything here is a pure function of its arguments.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Planck constant in J·s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum in m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Above this order the pmf is evaluated in log space.
const DIRECT_PMF_MAX_ORDER: u64 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("mean must be finite and non-negative, got {0}")]
    NegativeMean(f64),
    #[error("{name} must lie in [0, 1], got {value}")]
    EfficiencyOutOfRange { name: &'static str, value: f64 },
    #[error("{name} must be finite and positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Poisson probability of `m` pairs at mean `mean`.
///
/// Orders up to 20 use the exact factorial; above that the factorial goes
/// through `ln Γ(m + 1)` so large orders neither overflow nor lose range.
pub fn poisson_pair_probability(mean: f64, m: u64) -> Result<f64, ModelError> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(ModelError::NegativeMean(mean));
    }
    if mean == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    if m <= DIRECT_PMF_MAX_ORDER {
        let factorial: f64 = (1..=m).map(|k| k as f64).product();
        Ok((-mean).exp() * mean.powi(m as i32) / factorial)
    } else {
        let ln_p = -mean + m as f64 * mean.ln() - ln_gamma(m as f64 + 1.0);
        Ok(ln_p.exp())
    }
}

/// Default truncation order `⌈μ⌉ + 40`.
pub fn default_truncation(mean: f64) -> usize {
    mean.max(0.0).ceil() as usize + 40
}

/// Truncated pair-number distribution `ρ = (ρ₀ … ρₙ)` of the primary stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairNumberDistribution {
    pub mean_pairs: f64,
    pub probabilities: Vec<f64>,
}

impl PairNumberDistribution {
    pub fn new(mean_pairs: f64) -> Result<Self, ModelError> {
        Self::with_truncation(mean_pairs, default_truncation(mean_pairs))
    }

    pub fn with_truncation(mean_pairs: f64, truncation_order: usize) -> Result<Self, ModelError> {
        let probabilities = (0..=truncation_order as u64)
            .map(|m| poisson_pair_probability(mean_pairs, m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            mean_pairs,
            probabilities,
        })
    }

    pub fn truncation_order(&self) -> usize {
        self.probabilities.len() - 1
    }

    /// Probability mass lost to truncation, `1 − Σ ρₘ`.
    pub fn residual(&self) -> f64 {
        1.0 - self.probabilities.iter().sum::<f64>()
    }

    /// `Σ m·ρₘ` over the retained orders.
    pub fn mean_from_probabilities(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * p)
            .sum()
    }
}

/// Pump and conversion parameters of the cascaded source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Continuous-wave-equivalent pump power in W.
    pub pump_power: f64,
    /// Pump wavelength in m.
    pub pump_wavelength: f64,
    /// Pulse repetition rate in Hz.
    pub rep_rate: f64,
    pub injection_efficiency: f64,
    /// Primary-stage pairs per pump photon.
    pub pdc1_efficiency: f64,
    /// Secondary-stage pairs per primary signal photon.
    pub pdc2_efficiency: f64,
}

impl SourceParams {
    /// Operating point of the on-chip triplet source at 10 µW, 532 nm, 10 MHz.
    pub fn reference() -> Self {
        Self {
            pump_power: 10.0e-6,
            pump_wavelength: 532.0e-9,
            rep_rate: 10.0e6,
            injection_efficiency: 0.5,
            pdc1_efficiency: 8.1e-8,
            pdc2_efficiency: 2.7e-7,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        positive("pump_wavelength", self.pump_wavelength)?;
        positive("rep_rate", self.rep_rate)?;
        if !(self.pump_power >= 0.0) || !self.pump_power.is_finite() {
            return Err(ModelError::NonPositive {
                name: "pump_power",
                value: self.pump_power,
            });
        }
        unit_interval("injection_efficiency", self.injection_efficiency)?;
        unit_interval("pdc1_efficiency", self.pdc1_efficiency)?;
        unit_interval("pdc2_efficiency", self.pdc2_efficiency)?;
        Ok(())
    }

    /// Pump photons per pulse in front of the chip.
    pub fn pump_photons_per_pulse(&self) -> f64 {
        self.pump_power * self.pump_wavelength / (PLANCK * SPEED_OF_LIGHT * self.rep_rate)
    }
}

/// Total efficiencies (coupling × filtering × detection) of the three arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmEfficiencies {
    pub eta_i1: f64,
    pub eta_s2: f64,
    pub eta_i2: f64,
}

impl ArmEfficiencies {
    /// Equal split of the product `2.17e-3` that reproduces the measured
    /// success probability; the individual arm values are not known.
    pub fn reference() -> Self {
        let each = 2.17e-3_f64.cbrt();
        Self {
            eta_i1: each,
            eta_s2: each,
            eta_i2: each,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        unit_interval("eta_i1", self.eta_i1)?;
        unit_interval("eta_s2", self.eta_s2)?;
        unit_interval("eta_i2", self.eta_i2)
    }

    pub fn product(&self) -> f64 {
        self.eta_i1 * self.eta_s2 * self.eta_i2
    }
}

/// Mean number of primary pairs per pulse,
/// `⟨m⟩ = P·λ·P_PDC,1·(η_in)/(h·c·R)`.
pub fn mean_pairs_from_pump(params: &SourceParams, include_injection: bool) -> f64 {
    let injection = if include_injection {
        params.injection_efficiency
    } else {
        1.0
    };
    params.pump_photons_per_pulse() * params.pdc1_efficiency * injection
}

/// How a "genuine triplet" fraction is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletFractionMode {
    /// `ρ₁ / (1 − ρ₀)`: among pulses that produced any pair, those with one.
    #[default]
    NonEmptyPulses,
    /// `ρ₁ / ⟨m⟩`: fraction of all emitted pairs that were alone in their pulse.
    PerPair,
}

pub fn genuine_triplet_fraction(mean: f64) -> Result<f64, ModelError> {
    genuine_triplet_fraction_with(mean, TripletFractionMode::default())
}

pub fn genuine_triplet_fraction_with(
    mean: f64,
    mode: TripletFractionMode,
) -> Result<f64, ModelError> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(ModelError::NegativeMean(mean));
    }
    if mean == 0.0 {
        return Ok(1.0);
    }
    Ok(match mode {
        // μ e^{-μ} / (1 - e^{-μ}) written with expm1 to stay accurate as μ → 0.
        TripletFractionMode::NonEmptyPulses => mean * (-mean).exp() / -(-mean).exp_m1(),
        TripletFractionMode::PerPair => (-mean).exp(),
    })
}

/// Theoretical detected-triplet probability per pump pulse:
/// `η_i1·η_s2·η_i2·P_PDC,1·P_PDC,2·P·η_in·λ / (h·c·R)`.
pub fn triplet_success_probability(params: &SourceParams, arms: &ArmEfficiencies) -> f64 {
    arms.product() * params.pdc2_efficiency * mean_pairs_from_pump(params, true)
}

fn unit_interval(name: &'static str, value: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::EfficiencyOutOfRange { name, value })
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}
