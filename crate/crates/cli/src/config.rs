//! JSON run configuration. Every physical quantity carries its unit in the key.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use triplet_core::analysis::{AnalysisConfig, BinningConfig, OutlierRule};
use triplet_core::model::{ArmEfficiencies, SourceParams, TripletFractionMode};
use triplet_core::phasematch::{
    self, DispersionModel, GratingSign, IndexFormula, QpmGrating, SellmeierCoefficients,
};
use triplet_core::sim::{ArmModel, ChannelModel, DetectorModel, SimConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub simulate: SimulateSection,
    pub analyze: AnalyzeSection,
    pub phasematch: PhaseMatchSection,
    pub report: ReportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            simulate: SimulateSection::default(),
            analyze: AnalyzeSection::default(),
            phasematch: PhaseMatchSection::default(),
            report: ReportSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            );
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical serialization with all defaults filled in.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ArmSection {
    pub transmission: f64,
    pub leakage_photons_per_pulse: f64,
    pub detector_efficiency: f64,
    pub dark_rate_Hz: f64,
    pub jitter_sigma_ps: f64,
    pub dead_time_ns: f64,
}

impl From<&ArmSection> for ArmModel {
    fn from(a: &ArmSection) -> Self {
        Self {
            channel: ChannelModel {
                transmission: a.transmission,
                leakage_rate_per_pulse: a.leakage_photons_per_pulse,
            },
            detector: DetectorModel {
                efficiency: a.detector_efficiency,
                dark_rate: a.dark_rate_Hz,
                jitter_sigma: a.jitter_sigma_ps * 1e-12,
                dead_time: a.dead_time_ns * 1e-9,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmsSection {
    pub idler1: ArmSection,
    pub signal2: ArmSection,
    pub idler2: ArmSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct SimulateSection {
    pub pump_power_uW: f64,
    pub pump_wavelength_nm: f64,
    pub rep_rate_MHz: f64,
    pub injection_efficiency: f64,
    pub pdc1_efficiency: f64,
    pub pdc2_efficiency: f64,
    pub arms: ArmsSection,
    pub n_pulses: u64,
    pub peak_offset_ns: f64,
    pub resolution_fs: u64,
    pub seed: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let reference = SimConfig::reference();
        let arm = |i: usize, efficiency: f64, dark_rate: f64, jitter_sigma_ps: f64, dead_time_ns: f64| {
            ArmSection {
                transmission: reference.arms[i].channel.transmission,
                leakage_photons_per_pulse: 0.0,
                detector_efficiency: efficiency,
                dark_rate_Hz: dark_rate,
                jitter_sigma_ps,
                dead_time_ns,
            }
        };
        Self {
            pump_power_uW: 10.0,
            pump_wavelength_nm: 532.0,
            rep_rate_MHz: 10.0,
            injection_efficiency: 0.5,
            pdc1_efficiency: 8.1e-8,
            pdc2_efficiency: 2.7e-7,
            arms: ArmsSection {
                idler1: arm(0, 0.6, 18.3e3, 100.0, 50.0),
                signal2: arm(1, 0.25, 2.0e3, 187.3, 10_000.0),
                idler2: arm(2, 0.7, 18.3e3, 100.0, 50.0),
            },
            n_pulses: reference.n_pulses,
            peak_offset_ns: -0.165,
            resolution_fs: reference.resolution_fs,
            seed: 0,
        }
    }
}

impl SimulateSection {
    pub fn source(&self) -> SourceParams {
        SourceParams {
            pump_power: self.pump_power_uW * 1e-6,
            pump_wavelength: self.pump_wavelength_nm * 1e-9,
            rep_rate: self.rep_rate_MHz * 1e6,
            injection_efficiency: self.injection_efficiency,
            pdc1_efficiency: self.pdc1_efficiency,
            pdc2_efficiency: self.pdc2_efficiency,
        }
    }

    pub fn to_sim(&self) -> SimConfig {
        SimConfig {
            source: self.source(),
            arms: [
                (&self.arms.idler1).into(),
                (&self.arms.signal2).into(),
                (&self.arms.idler2).into(),
            ],
            n_pulses: self.n_pulses,
            peak_offset: self.peak_offset_ns * 1e-9,
            resolution_fs: self.resolution_fs,
            rng_seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSection {
    pub base_bin_ps: f64,
    pub merge_factor: u32,
    pub window_half_span_ns: f64,
    pub rep_period_ns: f64,
    pub peak_search_radius_bins: usize,
    pub outlier_rule: OutlierRule,
    /// Falls back to the run manifest next to the TTAG file when absent.
    pub n_pulses: Option<u64>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        let a = AnalysisConfig::default();
        Self {
            base_bin_ps: 82.3125,
            merge_factor: a.binning.merge_factor,
            window_half_span_ns: 300.0,
            rep_period_ns: 100.0,
            peak_search_radius_bins: a.peak_search_radius,
            outlier_rule: a.outlier_rule,
            n_pulses: a.n_pulses,
        }
    }
}

impl AnalyzeSection {
    pub fn to_analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            binning: BinningConfig {
                base_bin: self.base_bin_ps * 1e-12,
                merge_factor: self.merge_factor,
                window_half_span: self.window_half_span_ns * 1e-9,
                rep_period: self.rep_period_ns * 1e-9,
            },
            peak_search_radius: self.peak_search_radius_bins,
            outlier_rule: self.outlier_rule,
            n_pulses: self.n_pulses,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[allow(non_snake_case)]
pub enum DispersionSection {
    CongruentLithiumNiobate,
    ToyCauchy,
    Constant {
        index: f64,
    },
    /// Coefficients as in the lithium-niobate form (λ in µm).
    Sellmeier {
        coefficients: SellmeierCoefficients,
        wavelength_min_nm: f64,
        wavelength_max_nm: f64,
        temperature_min_C: f64,
        temperature_max_C: f64,
    },
    Cauchy {
        a: f64,
        b_um2: f64,
        dn_dT_per_K: f64,
        reference_temperature_C: f64,
        wavelength_min_nm: f64,
        wavelength_max_nm: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[allow(non_snake_case)]
pub enum GratingSection {
    /// Poling period solved so that the given process is phase-matched.
    Calibrated {
        pump_nm: f64,
        signal_nm: f64,
        temperature_C: f64,
    },
    Explicit {
        poling_period_um: f64,
        sign: GratingSign,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct StageSection {
    pub grating: GratingSection,
    pub pump_nm: f64,
    pub temperature_C: f64,
    pub length_mm: f64,
    pub signal_bracket_nm: [f64; 2],
    pub tune_range_C: [f64; 2],
    pub tune_steps: usize,
    pub shg_scan_nm: [f64; 2],
    pub scan_points: usize,
    /// Derived from the length around the degeneracy point when absent.
    pub acceptance_scan_nm: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseMatchSection {
    pub dispersion: DispersionSection,
    /// Long-wavelength guiding limit applied on top of the model range.
    pub cutoff_nm: Option<f64>,
    pub stage1: StageSection,
    pub stage2: StageSection,
}

impl Default for PhaseMatchSection {
    fn default() -> Self {
        let pump = phasematch::STAGE1_PUMP * 1e9;
        let signal = phasematch::STAGE1_SIGNAL * 1e9;
        let theta = phasematch::CALIBRATION_TEMPERATURE;
        Self {
            dispersion: DispersionSection::CongruentLithiumNiobate,
            cutoff_nm: None,
            stage1: StageSection {
                grating: GratingSection::Calibrated {
                    pump_nm: pump,
                    signal_nm: signal,
                    temperature_C: theta,
                },
                pump_nm: pump,
                temperature_C: theta,
                length_mm: 20.0,
                signal_bracket_nm: [700.0, 900.0],
                tune_range_C: [140.0, 190.0],
                tune_steps: 51,
                shg_scan_nm: [1000.0, 1100.0],
                scan_points: 2001,
                acceptance_scan_nm: None,
            },
            stage2: StageSection {
                grating: GratingSection::Calibrated {
                    pump_nm: signal,
                    signal_nm: 2.0 * signal,
                    temperature_C: theta,
                },
                pump_nm: signal,
                temperature_C: theta,
                length_mm: phasematch::STAGE2_LENGTH * 1e3,
                signal_bracket_nm: [1400.0, 1575.0],
                tune_range_C: [140.0, 190.0],
                tune_steps: 51,
                shg_scan_nm: [1560.0, 1600.0],
                scan_points: 2001,
                acceptance_scan_nm: None,
            },
        }
    }
}

impl PhaseMatchSection {
    pub fn dispersion(&self) -> DispersionModel {
        let model = match self.dispersion {
            DispersionSection::CongruentLithiumNiobate => DispersionModel::congruent_lithium_niobate(),
            DispersionSection::ToyCauchy => DispersionModel::toy_cauchy(),
            DispersionSection::Constant { index } => DispersionModel::constant(index),
            DispersionSection::Sellmeier {
                coefficients,
                wavelength_min_nm,
                wavelength_max_nm,
                temperature_min_C,
                temperature_max_C,
            } => DispersionModel {
                name: "sellmeier".into(),
                formula: IndexFormula::Sellmeier(coefficients),
                wavelength_range: (wavelength_min_nm * 1e-9, wavelength_max_nm * 1e-9),
                temperature_range: (temperature_min_C, temperature_max_C),
            },
            DispersionSection::Cauchy {
                a,
                b_um2,
                dn_dT_per_K,
                reference_temperature_C,
                wavelength_min_nm,
                wavelength_max_nm,
            } => DispersionModel {
                name: "cauchy".into(),
                formula: IndexFormula::Cauchy {
                    a,
                    b: b_um2,
                    dn_dt: dn_dT_per_K,
                    reference_temperature: reference_temperature_C,
                },
                wavelength_range: (wavelength_min_nm * 1e-9, wavelength_max_nm * 1e-9),
                temperature_range: (-273.15, 1000.0),
            },
        };
        match self.cutoff_nm {
            Some(c) => model.with_cutoff(c * 1e-9),
            None => model,
        }
    }

    pub fn stage(&self, n: u8) -> Result<&StageSection> {
        match n {
            1 => Ok(&self.stage1),
            2 => Ok(&self.stage2),
            _ => bail!("stage must be 1 or 2, got {n}"),
        }
    }
}

impl StageSection {
    pub fn grating(&self, dispersion: &DispersionModel) -> Result<QpmGrating> {
        Ok(match self.grating {
            GratingSection::Calibrated {
                pump_nm,
                signal_nm,
                temperature_C,
            } => phasematch::grating_for_process(
                pump_nm * 1e-9,
                signal_nm * 1e-9,
                temperature_C,
                dispersion,
            )?,
            GratingSection::Explicit {
                poling_period_um,
                sign,
            } => QpmGrating::new(poling_period_um * 1e-6, sign)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    /// Overrides the product of the simulate arms when set.
    pub arm_efficiency_product: Option<f64>,
    pub triplet_fraction_mode: TripletFractionMode,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            arm_efficiency_product: Some(ArmEfficiencies::reference().product()),
            triplet_fraction_mode: TripletFractionMode::default(),
        }
    }
}
