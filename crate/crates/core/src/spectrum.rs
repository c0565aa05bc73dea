//! Forward synthesis of the zero-field CW-ODMR spectrum.
//!
//! The spectrum is a baseline minus two Lorentzian dips at the transition
//! frequencies nu_-, nu_+, with depths weighted by the microwave-drive
//! projections alpha_+, alpha_-. A pure axial strain shifts both dips, a
//! transverse strain splits them, and the drive angle against the strain
//! phase sets the depth asymmetry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{strain_phase, StrainAmplitudes};

/// Default frequency grid: 601 points over d +- 0.03 GHz.
pub const DEFAULT_GRID_POINTS: usize = 601;
pub const DEFAULT_GRID_HALF_SPAN: f64 = 0.03;

/// Sign with which the strain phase enters the dip-weight argument
/// cos(2 phi_mw +- phi_str). `Plus` is the convention used throughout this
/// crate; `Minus` exists for cross-checks against sources that absorb the
/// phase with the opposite sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    #[default]
    Plus,
    Minus,
}

impl PhaseConvention {
    fn apply(self, phi_str: f64) -> f64 {
        match self {
            PhaseConvention::Plus => phi_str,
            PhaseConvention::Minus => -phi_str,
        }
    }
}

/// Everything needed to synthesize a spectrum.
///
/// `amplitude` multiplies the un-normalized Lorentzian L(nu) = gamma /
/// (nu^2 + gamma^2), whose peak is 1/gamma; the dimensionless depth of a
/// dip carrying weight alpha is therefore `amplitude * alpha / gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    /// Zero-field splitting in GHz.
    pub d_ghz: f64,
    pub amps: StrainAmplitudes,
    /// Angle between the in-plane microwave field and the NV x axis, radians.
    pub phi_mw_rad: f64,
    /// Lorentzian half width at half maximum, GHz.
    pub gamma_ghz: f64,
    /// Contrast amplitude multiplying the Lorentzians (GHz, see above).
    pub amplitude: f64,
    /// Photoluminescence level far from resonance.
    pub baseline: f64,
    #[serde(default)]
    pub convention: PhaseConvention,
}

impl SpectrumModel {
    pub fn new(
        d_ghz: f64,
        amps: StrainAmplitudes,
        phi_mw_rad: f64,
        gamma_ghz: f64,
        amplitude: f64,
        baseline: f64,
    ) -> Result<Self> {
        let model = Self {
            d_ghz,
            amps,
            phi_mw_rad,
            gamma_ghz,
            amplitude,
            baseline,
            convention: PhaseConvention::default(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (value, name) in [
            (self.d_ghz, "d_ghz"),
            (self.phi_mw_rad, "phi_mw_rad"),
            (self.gamma_ghz, "gamma_ghz"),
            (self.amplitude, "amplitude"),
            (self.baseline, "baseline"),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidModel(format!("{name} is not finite")));
            }
        }
        if !self.amps.is_finite() {
            return Err(Error::NonFinite("strain amplitudes"));
        }
        if self.gamma_ghz <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "gamma_ghz must be positive, got {}",
                self.gamma_ghz
            )));
        }
        if self.amplitude <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if self.amplitude / self.gamma_ghz > self.baseline {
            return Err(Error::InvalidModel(format!(
                "dip depth {} exceeds the baseline {}; the spectrum would go negative",
                self.amplitude / self.gamma_ghz,
                self.baseline
            )));
        }
        Ok(())
    }

    /// Dimensionless depth of a dip of weight 1, amplitude / gamma.
    pub fn depth_scale(&self) -> f64 {
        self.amplitude / self.gamma_ghz
    }
}

/// Transition frequencies (nu_minus, nu_plus) in GHz:
/// nu_± = d + m_z ± sqrt(m_x^2 + m_y^2).
pub fn transition_frequencies(d_ghz: f64, amps: &StrainAmplitudes) -> (f64, f64) {
    let t = amps.transverse();
    (d_ghz + amps.m_z - t, d_ghz + amps.m_z + t)
}

/// Dip weights (alpha_plus, alpha_minus) = (1 ± cos(2 phi_mw + phi_str)) / 2.
/// They sum to one for every angle pair.
pub fn transition_amplitudes(phi_mw: f64, phi_str: f64) -> (f64, f64) {
    transition_amplitudes_with(PhaseConvention::Plus, phi_mw, phi_str)
}

/// Same as [`transition_amplitudes`] with an explicit sign convention for
/// the strain phase.
pub fn transition_amplitudes_with(
    convention: PhaseConvention,
    phi_mw: f64,
    phi_str: f64,
) -> (f64, f64) {
    let c = (2.0 * phi_mw + convention.apply(phi_str)).cos();
    ((1.0 + c) / 2.0, (1.0 - c) / 2.0)
}

/// Un-normalized Lorentzian line shape gamma / (nu^2 + gamma^2); peak value
/// 1/gamma at nu = 0, half maximum at nu = ±gamma.
pub fn lorentzian(nu: f64, gamma: f64) -> f64 {
    gamma / (nu * nu + gamma * gamma)
}

/// Evenly spaced grid of `points` frequencies over `center ± half_span`.
pub fn frequency_grid(center: f64, half_span: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !center.is_finite() || !half_span.is_finite() || half_span <= 0.0 {
        return Err(Error::InvalidModel(format!(
            "bad grid spec: center {center}, half span {half_span}, {points} points"
        )));
    }
    let step = 2.0 * half_span / (points - 1) as f64;
    Ok((0..points)
        .map(|k| center - half_span + k as f64 * step)
        .collect())
}

/// The default grid around a given zero-field splitting.
pub fn default_grid(d_ghz: f64) -> Vec<f64> {
    frequency_grid(d_ghz, DEFAULT_GRID_HALF_SPAN, DEFAULT_GRID_POINTS).unwrap()
}

/// Ordered (frequency, photoluminescence) samples with optional per-point
/// standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSamples {
    nu_ghz: Vec<f64>,
    pl: Vec<f64>,
    sigma: Option<Vec<f64>>,
}

impl SpectrumSamples {
    /// Validates that frequencies are strictly increasing and everything is
    /// finite (sigmas must additionally be positive).
    pub fn new(nu_ghz: Vec<f64>, pl: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        if nu_ghz.len() != pl.len() {
            return Err(Error::InvalidModel(format!(
                "{} frequencies but {} photoluminescence values",
                nu_ghz.len(),
                pl.len()
            )));
        }
        if let Some(s) = &sigma {
            if s.len() != nu_ghz.len() {
                return Err(Error::InvalidModel(format!(
                    "{} frequencies but {} sigma values",
                    nu_ghz.len(),
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::NonFinite("sample sigma"));
            }
        }
        if nu_ghz.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample frequency"));
        }
        if pl.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample photoluminescence"));
        }
        for (i, pair) in nu_ghz.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::GridNotIncreasing(i + 1));
            }
        }
        Ok(Self { nu_ghz, pl, sigma })
    }

    pub fn len(&self) -> usize {
        self.nu_ghz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu_ghz.is_empty()
    }

    pub fn nu_ghz(&self) -> &[f64] {
        &self.nu_ghz
    }

    pub fn pl(&self) -> &[f64] {
        &self.pl
    }

    pub fn sigma(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nu_ghz.iter().cloned().zip(self.pl.iter().cloned())
    }
}

/// Evaluates the spectrum over a strictly increasing frequency grid.
///
/// With both transverse amplitudes exactly zero the strain phase is
/// undefined and a single dip of total weight one is emitted at d + m_z;
/// otherwise the two dips carry the weights of [`transition_amplitudes`].
pub fn synthesize(model: &SpectrumModel, grid: &[f64]) -> Result<SpectrumSamples> {
    model.validate()?;
    let pl = evaluate(model, grid)?;
    SpectrumSamples::new(grid.to_vec(), pl, None)
}

/// Pointwise model evaluation without packing into [`SpectrumSamples`].
pub fn evaluate(model: &SpectrumModel, grid: &[f64]) -> Result<Vec<f64>> {
    for (i, pair) in grid.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::GridNotIncreasing(i + 1));
        }
    }
    let values = match strain_phase(&model.amps) {
        Ok(phi_str) => {
            let (nu_minus, nu_plus) = transition_frequencies(model.d_ghz, &model.amps);
            let (alpha_plus, alpha_minus) =
                transition_amplitudes_with(model.convention, model.phi_mw_rad, phi_str);
            grid.iter()
                .map(|&nu| {
                    model.baseline
                        - model.amplitude
                            * (alpha_plus * lorentzian(nu - nu_plus, model.gamma_ghz)
                                + alpha_minus * lorentzian(nu - nu_minus, model.gamma_ghz))
                })
                .collect()
        }
        Err(Error::DegeneratePhase) => {
            let center = model.d_ghz + model.amps.m_z;
            grid.iter()
                .map(|&nu| {
                    model.baseline - model.amplitude * lorentzian(nu - center, model.gamma_ghz)
                })
                .collect()
        }
        Err(e) => return Err(e),
    };
    Ok(values)
}

/// Scalar spectral observables: shift of the dip midpoint from d, dip
/// splitting, and the normalized depth imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainMetrics {
    /// (nu_+ + nu_-)/2 - d = m_z, in GHz.
    pub shift_ghz: f64,
    /// nu_+ - nu_- = 2 sqrt(m_x^2 + m_y^2), in GHz.
    pub splitting_ghz: f64,
    /// alpha_+ - alpha_- = cos(2 phi_mw + phi_str); `None` when the
    /// splitting vanishes and the phase is undefined.
    pub imbalance: Option<f64>,
}

impl StrainMetrics {
    pub fn is_degenerate(&self) -> bool {
        self.imbalance.is_none()
    }
}

/// Computes the metrics directly from the model parameters. The shift and
/// splitting identities hold exactly; the imbalance inherits the model's
/// phase convention.
pub fn metrics(model: &SpectrumModel) -> StrainMetrics {
    let imbalance = strain_phase(&model.amps).ok().map(|phi_str| {
        let (alpha_plus, alpha_minus) =
            transition_amplitudes_with(model.convention, model.phi_mw_rad, phi_str);
        alpha_plus - alpha_minus
    });
    StrainMetrics {
        shift_ghz: model.amps.m_z,
        splitting_ghz: 2.0 * model.amps.transverse(),
        imbalance,
    }
}
