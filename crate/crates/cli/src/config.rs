//! Per-subcommand JSON run configurations. Every schema rejects unknown
//! keys by name and is fully validated before any computation runs.

use nv_strain::spectrum::{
    PhaseConvention, SpectrumModel, DEFAULT_GRID_HALF_SPAN, DEFAULT_GRID_POINTS,
};
use nv_strain::spin::StrainAmplitudes;
use nv_strain::strain::{
    amplitudes_from_tensor, default_couplings, rotate_to_nv_frame, CouplingConstants, Frame,
    NvFrame, StrainScenario, StrainTensor,
};
use nv_strain::FitOptions;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_D_GHZ: f64 = 2.87;
pub const DEFAULT_GAMMA_GHZ: f64 = 2e-3;
pub const DEFAULT_DEPTH: f64 = 0.2;

fn default_d() -> f64 {
    DEFAULT_D_GHZ
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA_GHZ
}
fn default_depth() -> f64 {
    DEFAULT_DEPTH
}
fn default_baseline() -> f64 {
    1.0
}
fn default_points() -> usize {
    DEFAULT_GRID_POINTS
}
fn default_half_span() -> f64 {
    DEFAULT_GRID_HALF_SPAN
}

/// Output format for spectrum data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumFormat {
    #[default]
    Csv,
    Json,
}

/// Frequency grid specification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Grid center in GHz; the zero-field splitting when absent.
    #[serde(default)]
    pub center_ghz: Option<f64>,
    #[serde(default = "default_half_span")]
    pub half_span_ghz: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            center_ghz: None,
            half_span_ghz: DEFAULT_GRID_HALF_SPAN,
            points: DEFAULT_GRID_POINTS,
        }
    }
}

/// Configuration of a `simulate` run. The strain enters through exactly one
/// of `scenario`, `tensor`, or `amplitudes`; with none given the strain is
/// zero and a single dip is emitted at `d_ghz`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_d")]
    pub d_ghz: f64,
    #[serde(default)]
    pub phi_mw_rad: f64,
    #[serde(default = "default_gamma")]
    pub gamma_ghz: f64,
    /// Dimensionless depth of a unit-weight dip; the Lorentzian amplitude
    /// is `depth * gamma_ghz`.
    #[serde(default = "default_depth")]
    pub depth: f64,
    #[serde(default = "default_baseline")]
    pub baseline: f64,
    #[serde(default)]
    pub phase_convention: PhaseConvention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<StrainScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<StrainTensor>,
    /// NV orientation index (1-4) used to rotate a lab-frame tensor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nv_orientation: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<StrainAmplitudes>,
    /// Coupling constants; the literature defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<CouplingConstants>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub format: SpectrumFormat,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            d_ghz: DEFAULT_D_GHZ,
            phi_mw_rad: 0.0,
            gamma_ghz: DEFAULT_GAMMA_GHZ,
            depth: DEFAULT_DEPTH,
            baseline: 1.0,
            phase_convention: PhaseConvention::default(),
            scenario: None,
            tensor: None,
            nv_orientation: None,
            amplitudes: None,
            couplings: None,
            grid: GridConfig::default(),
            format: SpectrumFormat::default(),
        }
    }
}

impl SimulateConfig {
    /// Resolves the configured strain input to the five amplitudes.
    pub fn resolve_amplitudes(&self) -> Result<StrainAmplitudes, CliError> {
        let sources = [
            self.scenario.is_some(),
            self.tensor.is_some(),
            self.amplitudes.is_some(),
        ]
        .iter()
        .filter(|&&s| s)
        .count();
        if sources > 1 {
            return Err(CliError::config(
                "give at most one of `scenario`, `tensor`, `amplitudes`",
            ));
        }
        let couplings = self.couplings.unwrap_or_else(default_couplings);
        let warn_bound = |t: &StrainTensor| {
            if t.exceeds_physical_bound() {
                eprintln!(
                    "warning: strain component above {:.0e}; diamond fractures well below this",
                    nv_strain::strain::PHYSICAL_STRAIN_BOUND
                );
            }
        };
        let amps = if let Some(scenario) = &self.scenario {
            let tensor = scenario.tensor();
            warn_bound(&tensor);
            amplitudes_from_tensor(&tensor, &couplings)?
        } else if let Some(tensor) = &self.tensor {
            let nv_tensor = match tensor.frame {
                Frame::Nv => *tensor,
                Frame::Lab => {
                    let index = self.nv_orientation.ok_or_else(|| {
                        CliError::config(
                            "a LAB-frame tensor needs `nv_orientation` (1-4) to rotate into",
                        )
                    })?;
                    rotate_to_nv_frame(tensor, &NvFrame::standard(index)?)?
                }
            };
            warn_bound(&nv_tensor);
            amplitudes_from_tensor(&nv_tensor, &couplings)?
        } else if let Some(amps) = self.amplitudes {
            amps
        } else {
            StrainAmplitudes::ZERO
        };
        if amps.exceeds_physical_bound() {
            eprintln!(
                "warning: strain amplitude above {:.1} GHz is far outside the physical range",
                nv_strain::spin::PHYSICAL_AMPLITUDE_BOUND
            );
        }
        Ok(amps)
    }

    /// Builds and validates the spectrum model.
    pub fn model(&self) -> Result<SpectrumModel, CliError> {
        let amps = self.resolve_amplitudes()?;
        let mut model = SpectrumModel::new(
            self.d_ghz,
            amps,
            self.phi_mw_rad,
            self.gamma_ghz,
            self.depth * self.gamma_ghz,
            self.baseline,
        )?;
        model.convention = self.phase_convention;
        Ok(model)
    }

    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let center = self.grid.center_ghz.unwrap_or(self.d_ghz);
        Ok(nv_strain::frequency_grid(
            center,
            self.grid.half_span_ghz,
            self.grid.points,
        )?)
    }
}

/// Configuration of a `fit` run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Zero-field splitting used by the strain inversion.
    #[serde(default = "default_d")]
    pub d_ghz: f64,
    /// Drive angle, when known, to recover the strain phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_mw_rad: Option<f64>,
    #[serde(default = "FitConfig::default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "FitConfig::default_cost_tol")]
    pub cost_tol: f64,
    #[serde(default = "FitConfig::default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "FitConfig::default_initial_damping")]
    pub initial_damping: f64,
    #[serde(default = "FitConfig::default_shared_width")]
    pub shared_width: bool,
    /// Explicit starting parameters; the built-in heuristic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guess: Option<nv_strain::FitParams>,
}

impl FitConfig {
    fn default_max_iterations() -> usize {
        FitOptions::default().max_iterations
    }
    fn default_cost_tol() -> f64 {
        FitOptions::default().cost_tol
    }
    fn default_grad_tol() -> f64 {
        FitOptions::default().grad_tol
    }
    fn default_initial_damping() -> f64 {
        FitOptions::default().initial_damping
    }
    fn default_shared_width() -> bool {
        true
    }

    pub fn options(&self) -> Result<FitOptions, CliError> {
        if self.max_iterations == 0 {
            return Err(CliError::config("max_iterations must be at least 1"));
        }
        for (v, name) in [
            (self.cost_tol, "cost_tol"),
            (self.grad_tol, "grad_tol"),
            (self.initial_damping, "initial_damping"),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CliError::config(format!("{name} must be positive")));
            }
        }
        Ok(FitOptions {
            max_iterations: self.max_iterations,
            cost_tol: self.cost_tol,
            grad_tol: self.grad_tol,
            initial_damping: self.initial_damping,
            shared_width: self.shared_width,
        })
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            d_ghz: DEFAULT_D_GHZ,
            phi_mw_rad: None,
            max_iterations: Self::default_max_iterations(),
            cost_tol: Self::default_cost_tol(),
            grad_tol: Self::default_grad_tol(),
            initial_damping: Self::default_initial_damping(),
            shared_width: true,
            guess: None,
        }
    }
}

/// Parses a JSON config, turning serde's message (which names unknown keys)
/// into a config error.
pub fn parse_config<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::config(format!("{what}: {e}")))
}
