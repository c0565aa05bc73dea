//! Spin-1 operator algebra and the zero-field ground-state Hamiltonian under
//! crystal strain.
//!
//! All matrices use the basis order |+1>, |0>, |-1> and all energies are
//! frequencies in GHz (the Hamiltonian divided by Planck's constant).

use nalgebra::{Complex, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Relative Hermiticity tolerance enforced when a [`Hamiltonian`] is built.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Relative Hermiticity tolerance accepted by [`eigensystem`].
pub const EIGEN_HERMITICITY_TOL: f64 = 1e-9;
/// Strain amplitudes above this magnitude (GHz) are flagged as unphysical.
pub const PHYSICAL_AMPLITUDE_BOUND: f64 = 0.5;

/// The three spin-1 operator matrices in the |+1>, |0>, |-1> basis.
#[derive(Debug, Clone)]
pub struct SpinOperatorSet {
    pub sx: Matrix3<C64>,
    pub sy: Matrix3<C64>,
    pub sz: Matrix3<C64>,
}

/// Canonical spin-1 matrices (dimensionless) in the |+1>, |0>, |-1> basis.
///
/// They satisfy [sx, sy] = i sz (and cyclic) and sx^2 + sy^2 + sz^2 = 2 I.
pub fn spin1_matrices() -> SpinOperatorSet {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| C64::new(re, im);
    let z = c(0.0, 0.0);
    SpinOperatorSet {
        sx: Matrix3::new(z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z),
        sy: Matrix3::new(z, c(0.0, -r), z, c(0.0, r), z, c(0.0, -r), z, c(0.0, r), z),
        sz: Matrix3::new(c(1.0, 0.0), z, z, z, z, z, z, z, c(-1.0, 0.0)),
    }
}

/// The five spin-strain frequencies entering the ground-state Hamiltonian,
/// in GHz.
///
/// `m_z` shifts both |±1> levels, (`m_x`, `m_y`) mix and split them, and
/// (`n_x`, `n_y`) couple |±1> to |0> (usually negligible).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrainAmplitudes {
    pub m_z: f64,
    pub m_x: f64,
    pub m_y: f64,
    #[serde(default)]
    pub n_x: f64,
    #[serde(default)]
    pub n_y: f64,
}

impl StrainAmplitudes {
    pub const ZERO: Self = Self {
        m_z: 0.0,
        m_x: 0.0,
        m_y: 0.0,
        n_x: 0.0,
        n_y: 0.0,
    };

    pub fn new(m_z: f64, m_x: f64, m_y: f64, n_x: f64, n_y: f64) -> Self {
        Self {
            m_z,
            m_x,
            m_y,
            n_x,
            n_y,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.m_z, self.m_x, self.m_y, self.n_x, self.n_y]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Magnitude of the transverse (splitting) component, sqrt(m_x^2 + m_y^2).
    /// This plays the role of the off-axis splitting parameter commonly
    /// written E: the zero-field lines sit at d + m_z ± this value.
    pub fn transverse(&self) -> f64 {
        self.m_x.hypot(self.m_y)
    }

    /// True when any amplitude exceeds the physically plausible bound of
    /// 0.5 GHz. Such values are accepted but callers may want to warn.
    pub fn exceeds_physical_bound(&self) -> bool {
        [self.m_z, self.m_x, self.m_y, self.n_x, self.n_y]
            .iter()
            .any(|v| v.abs() > PHYSICAL_AMPLITUDE_BOUND)
    }
}

/// 3x3 Hermitian Hamiltonian with entries in GHz, basis |+1>, |0>, |-1>.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    matrix: Matrix3<C64>,
}

fn hermiticity_deviation(m: &Matrix3<C64>) -> (f64, f64) {
    let dev = (m - m.adjoint()).map(|z| z.norm()).max();
    let scale = m.map(|z| z.norm()).max().max(1.0);
    (dev, scale)
}

impl Hamiltonian {
    /// Wraps a matrix, rejecting it if it deviates from Hermitian symmetry
    /// by more than `HERMITICITY_TOL` relative to its largest entry.
    pub fn from_matrix(matrix: Matrix3<C64>) -> Result<Self> {
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("Hamiltonian matrix"));
        }
        let (dev, scale) = hermiticity_deviation(&matrix);
        if dev > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian {
                max_dev: dev / scale,
                tol: HERMITICITY_TOL,
            });
        }
        // Symmetrize so downstream consumers see an exactly Hermitian matrix.
        let matrix = (matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix3<C64> {
        &self.matrix
    }

    /// Real trace in GHz (the imaginary part vanishes for Hermitian input).
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

/// Builds h = d Sz^2 + m_z Sz^2 + m_x (Sy^2 - Sx^2) + m_y (SxSy + SySx)
///           + n_x (SxSz + SzSx) + n_y (SySz + SzSy), all in GHz.
pub fn build_hamiltonian(d_ghz: f64, amps: &StrainAmplitudes) -> Result<Hamiltonian> {
    if !d_ghz.is_finite() {
        return Err(Error::NonFinite("zero-field splitting d"));
    }
    if !amps.is_finite() {
        return Err(Error::NonFinite("strain amplitudes"));
    }
    let ops = spin1_matrices();
    let (sx, sy, sz) = (&ops.sx, &ops.sy, &ops.sz);
    let re = |v: f64| C64::new(v, 0.0);
    let m = (sz * sz) * re(d_ghz + amps.m_z)
        + (sy * sy - sx * sx) * re(amps.m_x)
        + (sx * sy + sy * sx) * re(amps.m_y)
        + (sx * sz + sz * sx) * re(amps.n_x)
        + (sy * sz + sz * sy) * re(amps.n_y);
    Hamiltonian::from_matrix(m)
}

/// Full eigen-decomposition: energies ascending, states orthonormal and
/// paired with their energies; basis |+1>, |0>, |-1>.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Energies in GHz, ascending.
    pub energies: [f64; 3],
    /// Unit eigenvectors, `states[k]` belongs to `energies[k]`.
    pub states: [Vector3<C64>; 3],
}

/// Numerically diagonalizes a Hermitian Hamiltonian.
///
/// Energies come back ascending. The phase of each eigenvector is fixed
/// deterministically: the first component of largest magnitude is made real
/// and positive. Inputs whose Hermiticity deviation exceeds 1e-9 (relative)
/// are rejected.
pub fn eigensystem(h: &Hamiltonian) -> Result<EigenSystem> {
    let (dev, scale) = hermiticity_deviation(h.matrix());
    if dev > EIGEN_HERMITICITY_TOL * scale {
        return Err(Error::NotHermitian {
            max_dev: dev / scale,
            tol: EIGEN_HERMITICITY_TOL,
        });
    }
    let se = h.matrix().symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());

    let mut energies = [0.0; 3];
    let mut states = [Vector3::zeros(); 3];
    for (slot, &k) in order.iter().enumerate() {
        energies[slot] = se.eigenvalues[k];
        let mut v: Vector3<C64> = se.eigenvectors.column(k).into_owned();
        v /= C64::new(v.norm(), 0.0);
        // Deterministic phase: first component of largest magnitude -> real positive.
        let mut imax = 0;
        for i in 1..3 {
            if v[i].norm() > v[imax].norm() {
                imax = i;
            }
        }
        let phase = v[imax] / C64::new(v[imax].norm(), 0.0);
        v *= phase.conj();
        states[slot] = v;
    }
    Ok(EigenSystem { energies, states })
}

/// Closed-form levels (e0, e_minus, e_plus) in GHz:
/// e0 = 0, e_± = d + m_z ± sqrt(m_x^2 + m_y^2).
///
/// The n_x, n_y couplings are treated as zero here; they only enter the
/// numeric path of [`eigensystem`].
pub fn analytic_levels(d_ghz: f64, amps: &StrainAmplitudes) -> (f64, f64, f64) {
    let t = amps.transverse();
    (0.0, d_ghz + amps.m_z - t, d_ghz + amps.m_z + t)
}

/// In-plane phase of the transverse strain, atan2(m_y, m_x), range (-pi, pi].
///
/// Fails with [`Error::DegeneratePhase`] when m_x = m_y = 0: the splitting
/// vanishes and the phase is undefined.
pub fn strain_phase(amps: &StrainAmplitudes) -> Result<f64> {
    if amps.m_x == 0.0 && amps.m_y == 0.0 {
        return Err(Error::DegeneratePhase);
    }
    let phi = amps.m_y.atan2(amps.m_x);
    // atan2 can return exactly -pi (e.g. for m_y = -0.0); fold it onto +pi.
    if phi == -std::f64::consts::PI {
        Ok(std::f64::consts::PI)
    } else {
        Ok(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Closed-form entries of the strained Hamiltonian, derived once by hand
    /// from the operator expansion. Independent of `build_hamiltonian`, which
    /// composes the operator matrices.
    fn hamiltonian_oracle(d: f64, a: &StrainAmplitudes) -> Matrix3<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Matrix3::new(
            c(d + a.m_z, 0.0),
            c(a.n_x * s, -a.n_y * s),
            c(-a.m_x, -a.m_y),
            c(a.n_x * s, a.n_y * s),
            c(0.0, 0.0),
            c(-a.n_x * s, a.n_y * s),
            c(-a.m_x, a.m_y),
            c(-a.n_x * s, -a.n_y * s),
            c(d + a.m_z, 0.0),
        )
    }

    /// Roots of det(H - x I) = 0 for Hermitian H via the trigonometric cubic
    /// solution, ascending. Test-only oracle for the numeric eigensolver.
    fn cubic_eigenvalue_oracle(h: &Matrix3<C64>) -> [f64; 3] {
        // Characteristic polynomial x^3 - tr x^2 + c1 x - det = 0 with real
        // coefficients for Hermitian input.
        let tr = h.trace().re;
        let det = h.determinant().re;
        // c1 = sum of principal 2x2 minors.
        let minor = |i: usize, j: usize| (h[(i, i)] * h[(j, j)] - h[(i, j)] * h[(j, i)]).re;
        let c1 = minor(0, 1) + minor(0, 2) + minor(1, 2);
        // Depressed cubic t^3 + p t + q with x = t + tr/3; q = f(tr/3).
        let shift = tr / 3.0;
        let p = c1 - tr * tr / 3.0;
        let q = shift * shift * shift - tr * shift * shift + c1 * shift - det;
        if p.abs() < 1e-300 {
            return [shift; 3];
        }
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut roots = [
            shift + m * theta.cos(),
            shift + m * (theta - 2.0 * PI / 3.0).cos(),
            shift + m * (theta + 2.0 * PI / 3.0).cos(),
        ];
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        roots
    }

    fn random_amplitudes(rng: &mut impl Rng, scale: f64, with_n: bool) -> StrainAmplitudes {
        StrainAmplitudes {
            m_z: rng.random_range(-scale..scale),
            m_x: rng.random_range(-scale..scale),
            m_y: rng.random_range(-scale..scale),
            n_x: if with_n {
                rng.random_range(-scale..scale)
            } else {
                0.0
            },
            n_y: if with_n {
                rng.random_range(-scale..scale)
            } else {
                0.0
            },
        }
    }

    #[test]
    fn sz_is_diagonal() {
        let ops = spin1_matrices();
        let expect = Matrix3::from_diagonal(&Vector3::new(c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)));
        assert_eq!(ops.sz, expect);
    }

    #[test]
    fn operators_are_hermitian() {
        let ops = spin1_matrices();
        for m in [&ops.sx, &ops.sy, &ops.sz] {
            assert!((m - m.adjoint()).map(|z| z.norm()).max() < 1e-15);
        }
    }

    #[test]
    fn commutators_close_the_algebra() {
        let ops = spin1_matrices();
        let i = c(0.0, 1.0);
        let pairs = [
            (&ops.sx, &ops.sy, &ops.sz),
            (&ops.sy, &ops.sz, &ops.sx),
            (&ops.sz, &ops.sx, &ops.sy),
        ];
        for (a, b, expect) in pairs {
            let comm = a * b - b * a - *expect * i;
            assert!(comm.map(|z| z.norm()).max() < 1e-15, "commutator residual");
        }
    }

    #[test]
    fn casimir_is_two_identity() {
        let ops = spin1_matrices();
        let total = ops.sx * ops.sx + ops.sy * ops.sy + ops.sz * ops.sz;
        let residual = total - Matrix3::identity() * c(2.0, 0.0);
        assert!(residual.map(|z| z.norm()).max() < 1e-15);
    }

    #[test]
    fn bare_hamiltonian_is_diagonal() {
        let h = build_hamiltonian(2.87, &StrainAmplitudes::ZERO).unwrap();
        let expect = Matrix3::from_diagonal(&Vector3::new(c(2.87, 0.0), c(0.0, 0.0), c(2.87, 0.0)));
        assert!((h.matrix() - expect).map(|z| z.norm()).max() < 1e-15);
    }

    #[test]
    fn axial_strain_adds_to_the_diagonal() {
        let amps = StrainAmplitudes::new(0.01, 0.0, 0.0, 0.0, 0.0);
        let h = build_hamiltonian(2.87, &amps).unwrap();
        let expect = Matrix3::from_diagonal(&Vector3::new(c(2.88, 0.0), c(0.0, 0.0), c(2.88, 0.0)));
        assert!((h.matrix() - expect).map(|z| z.norm()).max() < 1e-15);
    }

    #[test]
    fn operator_expansion_matches_closed_form_entries() {
        let amps = StrainAmplitudes::new(0.0, 0.005, 0.0, 0.0, 0.0);
        let h = build_hamiltonian(2.87, &amps).unwrap();
        let expect = hamiltonian_oracle(2.87, &amps);
        assert!((h.matrix() - expect).map(|z| z.norm()).max() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let amps = random_amplitudes(&mut rng, 0.1, true);
            let h = build_hamiltonian(2.87, &amps).unwrap();
            let expect = hamiltonian_oracle(2.87, &amps);
            assert!((h.matrix() - expect).map(|z| z.norm()).max() < 1e-15);
        }
    }

    #[test]
    fn build_rejects_non_finite() {
        let amps = StrainAmplitudes::new(f64::NAN, 0.0, 0.0, 0.0, 0.0);
        assert!(build_hamiltonian(2.87, &amps).is_err());
        assert!(build_hamiltonian(f64::INFINITY, &StrainAmplitudes::ZERO).is_err());
    }

    #[test]
    fn eigensystem_of_diagonal_input() {
        let h = build_hamiltonian(2.87, &StrainAmplitudes::ZERO).unwrap();
        let es = eigensystem(&h).unwrap();
        assert_relative_eq!(es.energies[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(es.energies[1], 2.87, epsilon = 1e-14);
        assert_relative_eq!(es.energies[2], 2.87, epsilon = 1e-14);
    }

    #[test]
    fn eigensystem_rejects_non_hermitian() {
        let mut m = Matrix3::zeros();
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            Hamiltonian::from_matrix(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn numeric_matches_analytic_without_tilt_couplings() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let amps = random_amplitudes(&mut rng, 0.1, false);
            let h = build_hamiltonian(2.87, &amps).unwrap();
            let es = eigensystem(&h).unwrap();
            let (e0, em, ep) = analytic_levels(2.87, &amps);
            let mut expect = [e0, em, ep];
            expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (k, (got, want)) in es.energies.iter().zip(expect.iter()).enumerate() {
                assert!((got - want).abs() < 1e-10, "level {k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn numeric_matches_cubic_roots_with_tilt_couplings() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..500 {
            let amps = random_amplitudes(&mut rng, 0.05, true);
            let h = build_hamiltonian(2.87, &amps).unwrap();
            let es = eigensystem(&h).unwrap();
            let roots = cubic_eigenvalue_oracle(h.matrix());
            for (k, (got, want)) in es.energies.iter().zip(roots.iter()).enumerate() {
                assert!((got - want).abs() < 1e-9, "level {k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn eigenstates_are_orthonormal_and_satisfy_the_eigen_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let amps = random_amplitudes(&mut rng, 0.1, true);
            let h = build_hamiltonian(2.87, &amps).unwrap();
            let es = eigensystem(&h).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    let dot = es.states[a].dotc(&es.states[b]).norm();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-10, "orthonormality ({a},{b})");
                }
                let r = h.matrix() * es.states[a] - es.states[a] * c(es.energies[a], 0.0);
                assert!(r.iter().all(|z| z.norm() < 1e-9), "eigen residual");
            }
        }
    }

    /// The split eigenstates are equal-weight superpositions of |+1> and |-1>
    /// with no |0> admixture: (|+1> + e^{i phi} |-1>)/sqrt(2) for e_+ and the
    /// opposite relative sign for e_-, where phi = pi - atan2(m_y, m_x) is the
    /// phase that actually diagonalizes the operator expansion.
    #[test]
    fn split_eigenstates_have_the_expected_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..300 {
            let amps = random_amplitudes(&mut rng, 0.05, false);
            if amps.transverse() < 1e-9 {
                continue;
            }
            let h = build_hamiltonian(2.87, &amps).unwrap();
            let es = eigensystem(&h).unwrap();
            let phi_eff = PI - strain_phase(&amps).unwrap();
            // energies[1] = e_-, energies[2] = e_+ for these magnitudes.
            for (slot, sign) in [(2usize, 1.0f64), (1, -1.0)] {
                let expect = Vector3::new(
                    c(inv_sqrt2, 0.0),
                    c(0.0, 0.0),
                    c(
                        sign * inv_sqrt2 * phi_eff.cos(),
                        sign * inv_sqrt2 * phi_eff.sin(),
                    ),
                );
                let state = &es.states[slot];
                // Align global phase onto the first component.
                let align = state[0] / c(state[0].norm(), 0.0);
                let aligned = state * align.conj();
                for i in 0..3 {
                    assert!(
                        (aligned[i] - expect[i]).norm() < 1e-8,
                        "component {i}: {:?} vs {:?} (amps {amps:?})",
                        aligned[i],
                        expect[i]
                    );
                }
            }
        }
    }

    #[test]
    fn trace_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..200 {
            let amps = random_amplitudes(&mut rng, 0.1, true);
            let h = build_hamiltonian(2.87, &amps).unwrap();
            let expect = 2.0 * (2.87 + amps.m_z);
            assert!((h.trace() - expect).abs() < 1e-12);
            let es = eigensystem(&h).unwrap();
            let sum: f64 = es.energies.iter().sum();
            assert!((sum - expect).abs() < 1e-12, "trace after diagonalization");
        }
    }

    #[test]
    fn energies_invariant_under_transverse_sign_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..200 {
            let amps = random_amplitudes(&mut rng, 0.1, false);
            let flipped = StrainAmplitudes {
                m_x: -amps.m_x,
                m_y: -amps.m_y,
                ..amps
            };
            let ea = eigensystem(&build_hamiltonian(2.87, &amps).unwrap()).unwrap();
            let eb = eigensystem(&build_hamiltonian(2.87, &flipped).unwrap()).unwrap();
            for k in 0..3 {
                assert!((ea.energies[k] - eb.energies[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analytic_levels_examples() {
        let (e0, em, ep) = analytic_levels(2.87, &StrainAmplitudes::ZERO);
        assert_eq!((e0, em, ep), (0.0, 2.87, 2.87));

        let amps = StrainAmplitudes::new(-0.002, 0.003, 0.004, 0.0, 0.0);
        let (e0, em, ep) = analytic_levels(2.87, &amps);
        assert_eq!(e0, 0.0);
        assert_relative_eq!(em, 2.863, epsilon = 1e-15);
        assert_relative_eq!(ep, 2.873, epsilon = 1e-15);

        let amps = StrainAmplitudes::new(0.004, 0.0, 0.0, 0.0, 0.0);
        let (_, em, ep) = analytic_levels(2.87, &amps);
        assert_eq!(em, ep);
    }

    #[test]
    fn strain_phase_quadrants() {
        let phi =
            |mx: f64, my: f64| strain_phase(&StrainAmplitudes::new(0.0, mx, my, 0.0, 0.0)).unwrap();
        assert_eq!(phi(1e-3, 0.0), 0.0);
        assert_eq!(phi(0.0, 1e-3), PI / 2.0);
        assert_eq!(phi(-1e-3, 0.0), PI);
        assert_eq!(phi(-1e-3, -0.0), PI, "range is (-pi, pi]");
        assert!(phi(1e-3, 1e-3) > 0.0 && phi(1e-3, 1e-3) < PI / 2.0);
    }

    #[test]
    fn strain_phase_degenerate() {
        assert!(matches!(
            strain_phase(&StrainAmplitudes::ZERO),
            Err(Error::DegeneratePhase)
        ));
    }

    #[test]
    fn amplitude_physical_bound_flag() {
        assert!(!StrainAmplitudes::new(0.1, 0.0, 0.0, 0.0, 0.0).exceeds_physical_bound());
        assert!(StrainAmplitudes::new(0.6, 0.0, 0.0, 0.0, 0.0).exceeds_physical_bound());
    }
}
