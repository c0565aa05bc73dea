//! Strain tensors, their rotation into the NV frame, and the contraction
//! with the spin-strain coupling constants that yields the five Hamiltonian
//! amplitudes.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cross, NvOrientation, STANDARD_AXIS_ANGLES_DEG};
use crate::spin::StrainAmplitudes;

/// Strain components above this are flagged: diamond fractures well below
/// one percent strain.
pub const PHYSICAL_STRAIN_BOUND: f64 = 1e-2;

/// Reference frame a strain tensor is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Frame {
    /// NV frame: z along the symmetry axis.
    Nv,
    /// Laboratory / crystal frame.
    Lab,
}

/// Symmetric dimensionless strain tensor; only the six independent
/// components are stored. Shears are tensor shears e_ij, not engineering
/// shears 2 e_ij.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrainTensor {
    pub e_xx: f64,
    pub e_yy: f64,
    pub e_zz: f64,
    pub e_xy: f64,
    pub e_xz: f64,
    pub e_yz: f64,
    pub frame: Frame,
}

impl StrainTensor {
    pub fn zero(frame: Frame) -> Self {
        Self {
            e_xx: 0.0,
            e_yy: 0.0,
            e_zz: 0.0,
            e_xy: 0.0,
            e_xz: 0.0,
            e_yz: 0.0,
            frame,
        }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.e_xx, self.e_xy, self.e_xz, self.e_xy, self.e_yy, self.e_yz, self.e_xz, self.e_yz,
            self.e_zz,
        )
    }

    /// Reads the six independent components back from a symmetric matrix.
    pub fn from_matrix(m: &Matrix3<f64>, frame: Frame) -> Self {
        Self {
            e_xx: m[(0, 0)],
            e_yy: m[(1, 1)],
            e_zz: m[(2, 2)],
            e_xy: 0.5 * (m[(0, 1)] + m[(1, 0)]),
            e_xz: 0.5 * (m[(0, 2)] + m[(2, 0)]),
            e_yz: 0.5 * (m[(1, 2)] + m[(2, 1)]),
            frame,
        }
    }

    pub fn trace(&self) -> f64 {
        self.e_xx + self.e_yy + self.e_zz
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|v| v.is_finite())
    }

    pub fn components(&self) -> [f64; 6] {
        [
            self.e_xx, self.e_yy, self.e_zz, self.e_xy, self.e_xz, self.e_yz,
        ]
    }

    /// True when any component exceeds `PHYSICAL_STRAIN_BOUND` in magnitude.
    pub fn exceeds_physical_bound(&self) -> bool {
        self.components()
            .iter()
            .any(|v| v.abs() > PHYSICAL_STRAIN_BOUND)
    }
}

/// Spin-strain coupling strengths in GHz per unit strain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConstants {
    pub h41: f64,
    pub h43: f64,
    pub h15: f64,
    pub h16: f64,
    pub h25: f64,
    pub h26: f64,
}

impl CouplingConstants {
    /// One-sigma uncertainties of the default coupling strengths (GHz per
    /// unit strain). Metadata only; computations use the central values.
    pub fn default_uncertainties() -> CouplingConstants {
        CouplingConstants {
            h41: 0.09,
            h43: 0.2,
            h15: 0.2,
            h16: 0.09,
            h25: 0.08,
            h26: 0.07,
        }
    }
}

impl Default for CouplingConstants {
    fn default() -> Self {
        default_couplings()
    }
}

/// Central literature values of the six spin-strain coupling strengths.
pub fn default_couplings() -> CouplingConstants {
    CouplingConstants {
        h41: -6.42,
        h43: 2.3,
        h15: 5.7,
        h16: 19.66,
        h25: -2.6,
        h26: -2.83,
    }
}

/// Contracts an NV-frame strain tensor with the coupling constants:
///
///   m_z = h41 (e_xx + e_yy) + h43 e_zz
///   m_x = 1/2 [ h16 e_xz - 1/2 h15 (e_xx - e_yy) ]
///   m_y = 1/2 [ h16 e_yz + h15 e_xy ]
///   n_x = 1/2 [ h26 e_xz - 1/2 h25 (e_xx - e_yy) ]
///   n_y = 1/2 [ h26 e_yz + h25 e_xy ]
///
/// Lab-frame tensors are rejected; rotate them first.
pub fn amplitudes_from_tensor(
    eps: &StrainTensor,
    c: &CouplingConstants,
) -> Result<StrainAmplitudes> {
    if eps.frame != Frame::Nv {
        return Err(Error::FrameMismatch {
            expected: Frame::Nv,
            found: eps.frame,
        });
    }
    if !eps.is_finite() {
        return Err(Error::NonFinite("strain tensor"));
    }
    let aniso = eps.e_xx - eps.e_yy;
    Ok(StrainAmplitudes {
        m_z: c.h41 * (eps.e_xx + eps.e_yy) + c.h43 * eps.e_zz,
        m_x: 0.5 * (c.h16 * eps.e_xz - 0.5 * c.h15 * aniso),
        m_y: 0.5 * (c.h16 * eps.e_yz + c.h15 * eps.e_xy),
        n_x: 0.5 * (c.h26 * eps.e_xz - 0.5 * c.h25 * aniso),
        n_y: 0.5 * (c.h26 * eps.e_yz + c.h25 * eps.e_xy),
    })
}

/// Rotation taking lab-frame vectors into the frame of one NV orientation:
/// z along the symmetry axis, x along the second optical dipole.
#[derive(Debug, Clone)]
pub struct NvFrame {
    orientation: u8,
    rotation: Matrix3<f64>,
}

impl NvFrame {
    /// Frame of one of the four standard orientations (index 1-4).
    pub fn standard(index: u8) -> Result<Self> {
        if !(1..=4).contains(&index) {
            return Err(Error::UnknownOrientation(index));
        }
        let (theta_deg, phi_deg) = STANDARD_AXIS_ANGLES_DEG[(index - 1) as usize];
        Ok(Self::from_orientation(&NvOrientation::from_angles(
            index,
            theta_deg.to_radians(),
            phi_deg.to_radians(),
        )))
    }

    /// Builds the frame from an orientation: rows of the rotation are the
    /// NV-frame basis vectors x = d2, y = e_nv x d2, z = e_nv expressed in
    /// lab coordinates, so the matrix is orthogonal with determinant +1.
    pub fn from_orientation(o: &NvOrientation) -> Self {
        let x = o.d2;
        let z = o.e_nv;
        let y = cross(&z, &x);
        let rotation = Matrix3::new(x[0], x[1], x[2], y[0], y[1], y[2], z[0], z[1], z[2]);
        Self {
            orientation: o.index,
            rotation,
        }
    }

    pub fn orientation(&self) -> u8 {
        self.orientation
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }
}

/// Rotates a lab-frame tensor into the NV frame: e' = R e R^T. The trace and
/// the eigenvalues are preserved.
pub fn rotate_to_nv_frame(eps: &StrainTensor, frame: &NvFrame) -> Result<StrainTensor> {
    if eps.frame != Frame::Lab {
        return Err(Error::FrameMismatch {
            expected: Frame::Lab,
            found: eps.frame,
        });
    }
    let r = frame.rotation();
    let rotated = r * eps.to_matrix() * r.transpose();
    Ok(StrainTensor::from_matrix(&rotated, Frame::Nv))
}

/// The three canonical NV-frame strain patterns used to classify spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrainScenario {
    /// Isotropic dilation: the total volumetric strain `epsilon` is split
    /// equally over the three diagonal components. Produces a pure spectral
    /// shift (negative `epsilon`, compression, shifts upward).
    Volumetric { epsilon: f64 },
    /// Pure shear in the YZ plane: splits the spectrum symmetrically.
    ShearYz { e_yz: f64 },
    /// In-plane strain with e_zz = 0: shifts and splits asymmetrically.
    ShearXy { e_xx: f64, e_yy: f64, e_xy: f64 },
}

impl StrainScenario {
    /// NV-frame tensor realizing the scenario.
    pub fn tensor(&self) -> StrainTensor {
        let mut t = StrainTensor::zero(Frame::Nv);
        match *self {
            StrainScenario::Volumetric { epsilon } => {
                t.e_xx = epsilon / 3.0;
                t.e_yy = epsilon / 3.0;
                t.e_zz = epsilon / 3.0;
            }
            StrainScenario::ShearYz { e_yz } => {
                t.e_yz = e_yz;
            }
            StrainScenario::ShearXy { e_xx, e_yy, e_xy } => {
                t.e_xx = e_xx;
                t.e_yy = e_yy;
                t.e_xy = e_xy;
            }
        }
        t
    }
}
