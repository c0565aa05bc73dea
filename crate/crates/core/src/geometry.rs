//! NV symmetry-axis and optical-dipole geometry for a (100)-oriented diamond
//! surface, plus the photon-readout fidelity model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lab-frame spherical angles (degrees) of the four NV symmetry axes in a
/// (100)-oriented sample: (theta, phi) per orientation index 1-4.
pub const STANDARD_AXIS_ANGLES_DEG: [(f64, f64); 4] = [
    (123.14, 254.14),
    (53.98, 162.81),
    (126.64, 72.75),
    (57.80, 343.79),
];

/// Unit symmetry axis (sin t cos p, sin t sin p, cos t) for lab-frame polar
/// angle `theta` and azimuth `phi`, both in radians.
pub fn nv_axis(theta: f64, phi: f64) -> [f64; 3] {
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

/// The two orthogonal unit dipole vectors of an emitter whose symmetry axis
/// has spherical angles (`theta`, `phi`) in radians:
/// d1 = (-sin p, cos p, 0) and d2 = (cos t cos p, cos t sin p, -sin t).
///
/// At the poles (theta = 0 or pi) the azimuth is degenerate; d1 is then fixed
/// by whatever `phi` the caller supplies.
pub fn dipoles(theta: f64, phi: f64) -> ([f64; 3], [f64; 3]) {
    let d1 = [-phi.sin(), phi.cos(), 0.0];
    let d2 = [
        theta.cos() * phi.cos(),
        theta.cos() * phi.sin(),
        -theta.sin(),
    ];
    (d1, d2)
}

/// One NV orientation: symmetry axis, the two optical dipoles, and the
/// lab-frame spherical angles of the axis in degrees.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NvOrientation {
    /// Orientation index, 1-4.
    pub index: u8,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub e_nv: [f64; 3],
    pub d1: [f64; 3],
    pub d2: [f64; 3],
}

impl NvOrientation {
    /// Builds the orientation from its axis angles (radians). The dipole d1
    /// is oriented so that (d1, d2, e_nv) is a right-handed triad
    /// (d1 x d2 = e_nv), which fixes the otherwise free sign of d1.
    pub fn from_angles(index: u8, theta: f64, phi: f64) -> Self {
        let e_nv = nv_axis(theta, phi);
        let (d1_raw, d2) = dipoles(theta, phi);
        let d1 = if dot(&cross(&d1_raw, &d2), &e_nv) >= 0.0 {
            d1_raw
        } else {
            [-d1_raw[0], -d1_raw[1], -d1_raw[2]]
        };
        Self {
            index,
            theta_deg: theta.to_degrees(),
            phi_deg: phi.to_degrees(),
            e_nv,
            d1,
            d2,
        }
    }
}

/// The four NV orientations of a (100)-oriented sample, reconstructed from
/// their axis angles.
pub fn standard_orientations() -> [NvOrientation; 4] {
    let mut out = [NvOrientation {
        index: 0,
        theta_deg: 0.0,
        phi_deg: 0.0,
        e_nv: [0.0; 3],
        d1: [0.0; 3],
        d2: [0.0; 3],
    }; 4];
    for (i, &(theta_deg, phi_deg)) in STANDARD_AXIS_ANGLES_DEG.iter().enumerate() {
        out[i] =
            NvOrientation::from_angles((i + 1) as u8, theta_deg.to_radians(), phi_deg.to_radians());
    }
    out
}

pub fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Spin-readout fidelity C sqrt(n) / sqrt(C^2 n + 1) for fluorescence
/// contrast `contrast` in [0, 1] and `n_avg` photons per measurement.
pub fn readout_fidelity(contrast: f64, n_avg: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&contrast) {
        return Err(Error::ContrastOutOfRange(contrast));
    }
    if !n_avg.is_finite() || n_avg < 0.0 {
        return Err(Error::NegativePhotonCount(n_avg));
    }
    Ok(contrast * n_avg.sqrt() / (contrast * contrast * n_avg + 1.0).sqrt())
}

/// One point of a readout-fidelity curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub n_avg: f64,
    pub contrast: f64,
    pub fidelity: f64,
}

/// Evaluates the fidelity pointwise over an ascending, non-negative photon
/// grid. The output is monotone non-decreasing for fixed contrast.
pub fn fidelity_curve(contrast: f64, n_grid: &[f64]) -> Result<Vec<FidelityPoint>> {
    for (i, pair) in n_grid.windows(2).enumerate() {
        if pair[1] < pair[0] {
            return Err(Error::GridNotIncreasing(i + 1));
        }
    }
    n_grid
        .iter()
        .map(|&n| {
            readout_fidelity(contrast, n).map(|fidelity| FidelityPoint {
                n_avg: n,
                contrast,
                fidelity,
            })
        })
        .collect()
}
