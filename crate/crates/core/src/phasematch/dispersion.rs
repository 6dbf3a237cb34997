//! Effective-index models `n_eff(λ, θ)`.

use serde::{Deserialize, Serialize};

use super::PhaseMatchError;

/// Temperature-dependent Sellmeier form for the extraordinary index of
/// lithium niobate, wavelength in µm and temperature in °C:
///
/// ```text
/// n² = a1 + b1·f + (a2 + b2·f)/(λ² − (a3 + b3·f)²) + (a4 + b4·f)/(λ² − a5²) − a6·λ²
/// f  = (θ − θ₀)(θ + 570.82)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    /// θ₀ in °C.
    pub reference_temperature: f64,
}

impl SellmeierCoefficients {
    /// Congruent LiNbO₃, extraordinary polarization.
    pub fn congruent_lithium_niobate() -> Self {
        Self {
            a1: 5.35583,
            a2: 0.100473,
            a3: 0.20692,
            a4: 100.0,
            a5: 11.34927,
            a6: 1.5334e-2,
            b1: 4.629e-7,
            b2: 3.862e-8,
            b3: -0.89e-8,
            b4: 2.657e-5,
            reference_temperature: 24.5,
        }
    }

    fn index(&self, wavelength: f64, temperature: f64) -> f64 {
        let l2 = (wavelength * 1e6).powi(2);
        let f = (temperature - self.reference_temperature) * (temperature + 570.82);
        let uv = self.a3 + self.b3 * f;
        let n2 = self.a1
            + self.b1 * f
            + (self.a2 + self.b2 * f) / (l2 - uv * uv)
            + (self.a4 + self.b4 * f) / (l2 - self.a5 * self.a5)
            - self.a6 * l2;
        n2.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexFormula {
    Sellmeier(SellmeierCoefficients),
    /// `n = index` everywhere. Any energy-conserving triple has zero
    /// material mismatch under this model.
    Constant { index: f64 },
    /// `n = a + b/λ² + dn_dt·(θ − θ₀)`, λ in µm.
    Cauchy {
        a: f64,
        b: f64,
        dn_dt: f64,
        reference_temperature: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionModel {
    pub name: String,
    pub formula: IndexFormula,
    /// Valid wavelengths in m, inclusive. Lower the upper bound with
    /// [`DispersionModel::with_cutoff`] to model a guiding cut-off.
    pub wavelength_range: (f64, f64),
    /// Valid temperatures in °C, inclusive.
    pub temperature_range: (f64, f64),
}

impl Default for DispersionModel {
    fn default() -> Self {
        Self::congruent_lithium_niobate()
    }
}

impl DispersionModel {
    pub fn congruent_lithium_niobate() -> Self {
        Self {
            name: "congruent-LN-extraordinary".into(),
            formula: IndexFormula::Sellmeier(SellmeierCoefficients::congruent_lithium_niobate()),
            wavelength_range: (400e-9, 5000e-9),
            temperature_range: (20.0, 250.0),
        }
    }

    pub fn constant(index: f64) -> Self {
        Self {
            name: format!("constant-{index}"),
            formula: IndexFormula::Constant { index },
            wavelength_range: (100e-9, 10e-6),
            temperature_range: (-273.15, 1000.0),
        }
    }

    /// Smooth toy model with normal dispersion, for exact constructions.
    pub fn toy_cauchy() -> Self {
        Self {
            name: "toy-cauchy".into(),
            formula: IndexFormula::Cauchy {
                a: 2.1,
                b: 0.03,
                dn_dt: 4e-5,
                reference_temperature: 25.0,
            },
            wavelength_range: (100e-9, 10e-6),
            temperature_range: (-273.15, 1000.0),
        }
    }

    /// Moves the long-wavelength validity bound, e.g. to a guiding cut-off.
    pub fn with_cutoff(mut self, max_wavelength: f64) -> Self {
        self.wavelength_range.1 = max_wavelength;
        self
    }

    pub fn check(&self, wavelength: f64, temperature: f64) -> Result<(), PhaseMatchError> {
        let (lo, hi) = self.wavelength_range;
        if !(wavelength >= lo && wavelength <= hi) {
            return Err(PhaseMatchError::WavelengthOutOfRange {
                wavelength,
                min: lo,
                max: hi,
            });
        }
        let (tlo, thi) = self.temperature_range;
        if !(temperature >= tlo && temperature <= thi) {
            return Err(PhaseMatchError::TemperatureOutOfRange {
                temperature,
                min: tlo,
                max: thi,
            });
        }
        Ok(())
    }

    pub fn n_eff(&self, wavelength: f64, temperature: f64) -> Result<f64, PhaseMatchError> {
        self.check(wavelength, temperature)?;
        Ok(self.index_unchecked(wavelength, temperature))
    }

    pub(crate) fn index_unchecked(&self, wavelength: f64, temperature: f64) -> f64 {
        match self.formula {
            IndexFormula::Sellmeier(ref c) => c.index(wavelength, temperature),
            IndexFormula::Constant { index } => index,
            IndexFormula::Cauchy {
                a,
                b,
                dn_dt,
                reference_temperature,
            } => {
                let l_um = wavelength * 1e6;
                a + b / (l_um * l_um) + dn_dt * (temperature - reference_temperature)
            }
        }
    }

    /// Wave number `2π·n/λ` in 1/m.
    pub fn wavenumber(&self, wavelength: f64, temperature: f64) -> Result<f64, PhaseMatchError> {
        Ok(2.0 * std::f64::consts::PI * self.n_eff(wavelength, temperature)? / wavelength)
    }
}
