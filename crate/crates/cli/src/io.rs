//! Output documents and file formats.
//!
//! Every emitted JSON document has the shape `{meta, model|fit, metrics}`
//! with fixed key order, and all floats are rounded to 12 significant
//! digits before serialization, so identical inputs produce byte-identical
//! output. Spectrum CSV files carry the header `nu_ghz,pl[,sigma]`, LF line
//! endings, and `.` as the decimal separator.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nv_strain::fit::{FitParams, FitResult, StrainEstimate};
use nv_strain::spectrum::{SpectrumModel, SpectrumSamples, StrainMetrics};
use nv_strain::NvOrientation;
use serde::Serialize;

use crate::CliError;

/// Rounds to 12 significant digits; the shortest representation of the
/// rounded value is what ends up in the output files.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

/// Formats a float for CSV output (shortest form of the 12-digit rounding).
pub fn fmt_f64(x: f64) -> String {
    format!("{}", sig12(x))
}

#[derive(Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
}

impl Meta {
    pub fn new() -> Self {
        Self {
            tool: "nv-strain",
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AmplitudesDoc {
    pub m_z_ghz: f64,
    pub m_x_ghz: f64,
    pub m_y_ghz: f64,
    pub n_x_ghz: f64,
    pub n_y_ghz: f64,
}

#[derive(Debug, Serialize)]
pub struct ModelDoc {
    pub d_ghz: f64,
    pub amplitudes: AmplitudesDoc,
    pub phi_mw_rad: f64,
    pub gamma_ghz: f64,
    pub amplitude: f64,
    pub depth: f64,
    pub baseline: f64,
    pub phase_convention: nv_strain::PhaseConvention,
}

impl ModelDoc {
    pub fn from_model(model: &SpectrumModel) -> Self {
        Self {
            d_ghz: sig12(model.d_ghz),
            amplitudes: AmplitudesDoc {
                m_z_ghz: sig12(model.amps.m_z),
                m_x_ghz: sig12(model.amps.m_x),
                m_y_ghz: sig12(model.amps.m_y),
                n_x_ghz: sig12(model.amps.n_x),
                n_y_ghz: sig12(model.amps.n_y),
            },
            phi_mw_rad: sig12(model.phi_mw_rad),
            gamma_ghz: sig12(model.gamma_ghz),
            amplitude: sig12(model.amplitude),
            depth: sig12(model.depth_scale()),
            baseline: sig12(model.baseline),
            phase_convention: model.convention,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MetricsDoc {
    pub shift_ghz: f64,
    pub splitting_ghz: f64,
    pub imbalance: Option<f64>,
    pub degenerate: bool,
}

impl MetricsDoc {
    pub fn from_metrics(m: &StrainMetrics) -> Self {
        Self {
            shift_ghz: sig12(m.shift_ghz),
            splitting_ghz: sig12(m.splitting_ghz),
            imbalance: m.imbalance.map(sig12),
            degenerate: m.is_degenerate(),
        }
    }
}

/// Sidecar written by `simulate`: the exact model plus its observables.
#[derive(Debug, Serialize)]
pub struct SimulateDoc {
    pub meta: Meta,
    pub model: ModelDoc,
    pub metrics: MetricsDoc,
}

#[derive(Debug, Serialize)]
pub struct FitParamsDoc {
    pub nu_plus_ghz: f64,
    pub nu_minus_ghz: f64,
    pub depth_plus: f64,
    pub depth_minus: f64,
    pub gamma_ghz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_minus_ghz: Option<f64>,
    pub baseline: f64,
}

impl FitParamsDoc {
    fn from_params(p: &FitParams) -> Self {
        Self {
            nu_plus_ghz: sig12(p.nu_plus_ghz),
            nu_minus_ghz: sig12(p.nu_minus_ghz),
            depth_plus: sig12(p.depth_plus),
            depth_minus: sig12(p.depth_minus),
            gamma_ghz: sig12(p.gamma_ghz),
            gamma_minus_ghz: p.gamma_minus_ghz.map(sig12),
            baseline: sig12(p.baseline),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FitDoc {
    pub nu_plus_ghz: f64,
    pub nu_minus_ghz: f64,
    pub depth_plus: f64,
    pub depth_minus: f64,
    pub gamma_ghz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_minus_ghz: Option<f64>,
    pub baseline: f64,
    pub uncertainties: Option<FitParamsDoc>,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rank_warning: bool,
}

impl FitDoc {
    pub fn from_result(r: &FitResult) -> Self {
        let p = FitParamsDoc::from_params(&r.params);
        Self {
            nu_plus_ghz: p.nu_plus_ghz,
            nu_minus_ghz: p.nu_minus_ghz,
            depth_plus: p.depth_plus,
            depth_minus: p.depth_minus,
            gamma_ghz: p.gamma_ghz,
            gamma_minus_ghz: p.gamma_minus_ghz,
            baseline: p.baseline,
            uncertainties: r.uncertainties.as_ref().map(FitParamsDoc::from_params),
            residual_rms: sig12(r.residual_rms),
            iterations: r.iterations,
            converged: r.converged,
            rank_warning: r.rank_warning,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct StrainEstimateDoc {
    pub d_ghz: f64,
    pub m_z_hat_ghz: f64,
    pub m_perp_hat_ghz: f64,
    pub imbalance_hat: f64,
    pub phase_sum_hat_rad: f64,
    pub ambiguity_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_str_hat_rad: Option<f64>,
}

impl StrainEstimateDoc {
    pub fn from_estimate(d_ghz: f64, e: &StrainEstimate) -> Self {
        Self {
            d_ghz: sig12(d_ghz),
            m_z_hat_ghz: sig12(e.m_z_hat_ghz),
            m_perp_hat_ghz: sig12(e.m_perp_hat_ghz),
            imbalance_hat: sig12(e.imbalance_hat),
            phase_sum_hat_rad: sig12(e.phase_sum_hat_rad),
            ambiguity_flag: e.ambiguity_flag,
            phi_str_hat_rad: e.phi_str_hat_rad.map(sig12),
        }
    }
}

/// Result document written by `fit`.
#[derive(Debug, Serialize)]
pub struct FitResultDoc {
    pub meta: Meta,
    pub fit: FitDoc,
    /// Absent when the fit did not converge.
    pub metrics: Option<StrainEstimateDoc>,
}

#[derive(Debug, Serialize)]
pub struct OrientationsDoc {
    pub meta: Meta,
    pub orientations: Vec<NvOrientation>,
}

/// Serializes a document with stable key order and a trailing newline.
pub fn to_json_string<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serialization");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// Spectrum CSV body: header `nu_ghz,pl`, one row per sample, LF endings.
pub fn spectrum_to_csv(samples: &SpectrumSamples) -> String {
    let mut out = String::from("nu_ghz,pl\n");
    for (nu, pl) in samples.iter() {
        let _ = writeln!(out, "{},{}", fmt_f64(nu), fmt_f64(pl));
    }
    out
}

/// Spectrum as a JSON document with parallel arrays.
#[derive(Debug, Serialize)]
pub struct SpectrumJsonDoc {
    pub meta: Meta,
    pub nu_ghz: Vec<f64>,
    pub pl: Vec<f64>,
}

pub fn spectrum_to_json(samples: &SpectrumSamples) -> String {
    to_json_string(&SpectrumJsonDoc {
        meta: Meta::new(),
        nu_ghz: samples.nu_ghz().iter().map(|&x| sig12(x)).collect(),
        pl: samples.pl().iter().map(|&x| sig12(x)).collect(),
    })
}

/// Reads a spectrum CSV (`nu_ghz,pl[,sigma]`). Parse failures name the
/// offending 1-based line.
pub fn read_spectrum_csv(path: &Path) -> Result<SpectrumSamples, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_spectrum_csv(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn parse_spectrum_csv(text: &str) -> Result<SpectrumSamples, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("empty file")?;
    let columns = match header.trim() {
        "nu_ghz,pl" => 2,
        "nu_ghz,pl,sigma" => 3,
        other => {
            return Err(format!(
                "line 1: expected header `nu_ghz,pl` or `nu_ghz,pl,sigma`, got `{other}`"
            ))
        }
    };
    let mut nu = Vec::new();
    let mut pl = Vec::new();
    let mut sigma = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(format!(
                "line {line_no}: expected {columns} fields, got {}",
                fields.len()
            ));
        }
        let mut parsed = [0.0f64; 3];
        for (k, field) in fields.iter().enumerate() {
            parsed[k] = field
                .trim()
                .parse()
                .map_err(|_| format!("line {line_no}: `{}` is not a number", field.trim()))?;
        }
        if let Some(&last) = nu.last() {
            if parsed[0] <= last {
                return Err(format!(
                    "line {line_no}: frequency {} does not increase past {}",
                    parsed[0], last
                ));
            }
        }
        nu.push(parsed[0]);
        pl.push(parsed[1]);
        if columns == 3 {
            sigma.push(parsed[2]);
        }
    }
    let sigma = if columns == 3 { Some(sigma) } else { None };
    SpectrumSamples::new(nu, pl, sigma).map_err(|e| e.to_string())
}

/// Residuals CSV: `nu_ghz,residual` rows of data minus model.
pub fn residuals_to_csv(samples: &SpectrumSamples, params: &FitParams) -> String {
    let mut out = String::from("nu_ghz,residual\n");
    for (nu, pl) in samples.iter() {
        let r = pl - nv_strain::fit::model_value(params, nu);
        let _ = writeln!(out, "{},{}", fmt_f64(nu), fmt_f64(r));
    }
    out
}

/// Fidelity curve CSV: `n_avg,fidelity`.
pub fn fidelity_to_csv(points: &[nv_strain::FidelityPoint]) -> String {
    let mut out = String::from("n_avg,fidelity\n");
    for p in points {
        let _ = writeln!(out, "{},{}", fmt_f64(p.n_avg), fmt_f64(p.fidelity));
    }
    out
}
