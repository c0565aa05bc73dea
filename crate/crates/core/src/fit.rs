//! Inverse problem: fit a dual-Lorentzian dip model to measured samples by
//! damped nonlinear least squares and convert the fitted line parameters to
//! strain observables.
//!
//! Three spectral observables (shift, splitting, depth imbalance) cannot
//! determine the six components of a strain tensor, so no tensor
//! reconstruction is offered; the inversion stops at the amplitude level.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumSamples;

/// Minimum number of samples required to seed and run a fit.
pub const MIN_SAMPLES: usize = 20;

/// Parameters of the dual-Lorentzian dip model
///
///   f(nu) = baseline - depth_plus  * g(nu - nu_plus,  gamma_plus)
///                    - depth_minus * g(nu - nu_minus, gamma_minus)
///
/// with the peak-normalized dip shape g(u, gamma) = gamma^2 / (u^2 + gamma^2),
/// so each depth is the dimensionless depression at its dip center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub nu_plus_ghz: f64,
    pub nu_minus_ghz: f64,
    pub depth_plus: f64,
    pub depth_minus: f64,
    /// Shared width; the width of the upper dip when widths are independent.
    pub gamma_ghz: f64,
    /// Width of the lower dip when widths are fitted independently.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_minus_ghz: Option<f64>,
    pub baseline: f64,
}

impl FitParams {
    pub fn gamma_plus(&self) -> f64 {
        self.gamma_ghz
    }

    pub fn gamma_minus(&self) -> f64 {
        self.gamma_minus_ghz.unwrap_or(self.gamma_ghz)
    }
}

/// Knobs of the damped least-squares loop. The defaults implement the
/// documented contract: damping starts at 1e-3, doubles on rejection,
/// shrinks by three on acceptance; convergence on relative cost change
/// below 1e-10 or gradient max-norm below 1e-12; at most 500 iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub cost_tol: f64,
    pub grad_tol: f64,
    pub initial_damping: f64,
    /// Fit a single width shared by both dips (default) or one per dip.
    pub shared_width: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            cost_tol: 1e-10,
            grad_tol: 1e-12,
            initial_damping: 1e-3,
            shared_width: true,
        }
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FitParams,
    /// One-sigma uncertainties from the linearized covariance
    /// s^2 (J^T J)^{-1} at the optimum; `None` when J^T J is singular.
    pub uncertainties: Option<FitParams>,
    /// Root mean square of the raw residuals f(nu_i) - pl_i.
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the normal equations were near-singular at any point.
    pub rank_warning: bool,
    /// Cost (sum of squared residuals) after each accepted step, starting
    /// with the cost of the initial guess. Non-increasing by construction.
    pub cost_history: Vec<f64>,
}

/// Strain observables recovered from fitted line parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainEstimate {
    /// Axial amplitude: dip midpoint minus the zero-field splitting, GHz.
    pub m_z_hat_ghz: f64,
    /// Transverse magnitude sqrt(m_x^2 + m_y^2): half the splitting, GHz.
    pub m_perp_hat_ghz: f64,
    /// Normalized depth difference (depth_+ - depth_-)/(depth_+ + depth_-).
    pub imbalance_hat: f64,
    /// arccos of the imbalance, in [0, pi]: the combination
    /// 2 phi_mw + phi_str up to its sign.
    pub phase_sum_hat_rad: f64,
    /// True when the sign of `phase_sum_hat_rad` is not determined by the
    /// data (always, except at full imbalance).
    pub ambiguity_flag: bool,
    /// Strain phase when the caller supplies the drive angle; inherits the
    /// sign ambiguity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_str_hat_rad: Option<f64>,
}

fn n_params(shared_width: bool) -> usize {
    if shared_width {
        6
    } else {
        7
    }
}

/// Packs parameters in the fixed column order
/// [nu_plus, nu_minus, depth_plus, depth_minus, gamma (, gamma_minus), baseline].
pub fn pack_params(p: &FitParams, shared_width: bool) -> DVector<f64> {
    let mut v = DVector::zeros(n_params(shared_width));
    v[0] = p.nu_plus_ghz;
    v[1] = p.nu_minus_ghz;
    v[2] = p.depth_plus;
    v[3] = p.depth_minus;
    v[4] = p.gamma_plus();
    if shared_width {
        v[5] = p.baseline;
    } else {
        v[5] = p.gamma_minus();
        v[6] = p.baseline;
    }
    v
}

/// Inverse of [`pack_params`].
pub fn unpack_params(v: &DVector<f64>, shared_width: bool) -> FitParams {
    FitParams {
        nu_plus_ghz: v[0],
        nu_minus_ghz: v[1],
        depth_plus: v[2],
        depth_minus: v[3],
        gamma_ghz: v[4],
        gamma_minus_ghz: if shared_width { None } else { Some(v[5]) },
        baseline: v[if shared_width { 5 } else { 6 }],
    }
}

fn dip_shape(u: f64, gamma: f64) -> f64 {
    gamma * gamma / (u * u + gamma * gamma)
}

/// Model value at one frequency.
pub fn model_value(p: &FitParams, nu: f64) -> f64 {
    p.baseline
        - p.depth_plus * dip_shape(nu - p.nu_plus_ghz, p.gamma_plus())
        - p.depth_minus * dip_shape(nu - p.nu_minus_ghz, p.gamma_minus())
}

/// Analytic Jacobian of the model over a frequency grid, one row per sample,
/// columns in [`pack_params`] order.
pub fn model_jacobian(p: &FitParams, nus: &[f64], shared_width: bool) -> DMatrix<f64> {
    let n = n_params(shared_width);
    let mut j = DMatrix::zeros(nus.len(), n);
    let (gp, gm) = (p.gamma_plus(), p.gamma_minus());
    for (row, &nu) in nus.iter().enumerate() {
        let up = nu - p.nu_plus_ghz;
        let um = nu - p.nu_minus_ghz;
        let denp = up * up + gp * gp;
        let denm = um * um + gm * gm;
        let shape_p = gp * gp / denp;
        let shape_m = gm * gm / denm;
        // d f / d nu_±  = -depth * 2 u gamma^2 / den^2
        j[(row, 0)] = -p.depth_plus * 2.0 * up * gp * gp / (denp * denp);
        j[(row, 1)] = -p.depth_minus * 2.0 * um * gm * gm / (denm * denm);
        j[(row, 2)] = -shape_p;
        j[(row, 3)] = -shape_m;
        // d f / d gamma = -depth * 2 gamma u^2 / den^2
        let dgp = -p.depth_plus * 2.0 * gp * up * up / (denp * denp);
        let dgm = -p.depth_minus * 2.0 * gm * um * um / (denm * denm);
        if shared_width {
            j[(row, 4)] = dgp + dgm;
            j[(row, 5)] = 1.0;
        } else {
            j[(row, 4)] = dgp;
            j[(row, 5)] = dgm;
            j[(row, 6)] = 1.0;
        }
    }
    j
}

/// Keeps a packed parameter vector inside the feasible region: depths
/// non-negative, widths at least `gamma_floor`, and nu_plus >= nu_minus
/// (restored by relabeling the dips, which leaves the model unchanged).
fn project(v: &mut DVector<f64>, gamma_floor: f64, shared_width: bool) {
    if v[0] < v[1] {
        v.swap_rows(0, 1);
        v.swap_rows(2, 3);
        if !shared_width {
            v.swap_rows(4, 5);
        }
    }
    v[2] = v[2].max(0.0);
    v[3] = v[3].max(0.0);
    v[4] = v[4].max(gamma_floor);
    if !shared_width {
        v[5] = v[5].max(gamma_floor);
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Heuristic starting point: the baseline from the upper quartile of the
/// photoluminescence, dip positions from the two deepest local minima of a
/// five-sample moving average (at least two grid steps apart), and the
/// width from the half-depth extent of the deeper dip.
pub fn initial_guess(samples: &SpectrumSamples) -> Result<FitParams> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            n,
            min: MIN_SAMPLES,
        });
    }
    let nu = samples.nu_ghz();
    let pl = samples.pl();
    let step = nu.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);

    // Baseline: median of the top quarter of the photoluminescence values.
    let mut sorted = pl.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let q = n.div_ceil(4);
    let baseline = median(&mut sorted[..q].to_vec());

    // Robust noise level from successive differences.
    let mut diffs: Vec<f64> = pl.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let noise = median(&mut diffs) * 1.4826 / std::f64::consts::SQRT_2;

    // Five-sample moving average (window clamped at the edges).
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            pl[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();

    // Local minima deeper than three noise levels below the baseline.
    let threshold = baseline - (3.0 * noise).max(1e-12);
    let mut candidates: Vec<(usize, f64)> = (1..n - 1)
        .filter(|&i| smooth[i - 1] >= smooth[i] && smooth[i] < smooth[i + 1])
        .filter(|&i| smooth[i] < threshold)
        .map(|i| (i, baseline - smooth[i]))
        .collect();
    if candidates.is_empty() {
        return Err(Error::FlatSpectrum);
    }
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let (deepest, depth_deepest) = candidates[0];

    // Width seed: half-depth extent of the deeper dip. A neighboring dip can
    // block the walk on one side, so take the cleaner (narrower) side.
    let half_level = baseline - 0.5 * depth_deepest;
    let mut l = deepest;
    while l > 0 && smooth[l - 1] < half_level {
        l -= 1;
    }
    let mut r = deepest;
    while r < n - 1 && smooth[r + 1] < half_level {
        r += 1;
    }
    let (left, right) = (nu[deepest] - nu[l], nu[r] - nu[deepest]);
    let half_width = match (left > 0.0, right > 0.0) {
        (true, true) => left.min(right),
        (true, false) => left,
        (false, true) => right,
        (false, false) => step,
    };
    let gamma = half_width.max(step).min(0.25 * (nu[n - 1] - nu[0]));

    // Second dip, first from the smoothed minima themselves: at least two
    // grid steps away and separated from the first by a genuine barrier
    // (noise wiggles inside one dip bottom produce nearby minima with no
    // rise between them).
    // `true` marks a depth estimate already free of the strong dip's tail.
    let mut second: Option<(usize, f64, bool)> = candidates[1..]
        .iter()
        .find(|(i, _)| {
            if i.abs_diff(deepest) < 2 {
                return false;
            }
            let (a, b) = (*i.min(&deepest), *i.max(&deepest));
            let barrier = smooth[a..=b].iter().cloned().fold(f64::MIN, f64::max)
                - smooth[*i].max(smooth[deepest]);
            barrier >= (3.0 * noise).max(1e-12)
        })
        .map(|&(i, depth)| (i, depth, false));

    // A strongly imbalanced pair hides the weak dip as a shoulder with no
    // local minimum of its own. Strip the estimated strong dip and look for
    // the deepest remaining depression outside its core.
    if second.is_none() {
        let stripped: Vec<f64> = (0..n)
            .map(|i| {
                let u = nu[i] - nu[deepest];
                smooth[i] + depth_deepest * gamma * gamma / (u * u + gamma * gamma)
            })
            .collect();
        let exclusion = ((gamma / step).ceil() as usize).max(2);
        // Imperfect stripping leaves wiggles of a few percent of the strong
        // dip near its core; require more than that.
        let min_depth = (3.0 * noise).max(0.05 * depth_deepest).max(1e-12);
        second = (1..n - 1)
            .filter(|&i| i.abs_diff(deepest) >= exclusion)
            .filter(|&i| stripped[i - 1] >= stripped[i] && stripped[i] < stripped[i + 1])
            .map(|i| (i, baseline - stripped[i]))
            .filter(|(_, depth)| *depth >= min_depth)
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(i, depth)| (i, depth, true));
    }

    let (lo, hi) = match second {
        Some((other, raw_other, tail_free)) => {
            // Decouple the two depth estimates from each other's tails.
            let du = nu[deepest] - nu[other];
            let tail = gamma * gamma / (du * du + gamma * gamma);
            let (d_main, d_other) = if tail_free {
                (
                    (depth_deepest - raw_other * tail).max(0.2 * depth_deepest),
                    raw_other,
                )
            } else {
                let denom = (1.0 - tail * tail).max(0.1);
                (
                    ((depth_deepest - raw_other * tail) / denom).max(0.2 * depth_deepest),
                    ((raw_other - depth_deepest * tail) / denom).max(0.2 * raw_other),
                )
            };
            let (a, b) = if nu[deepest] <= nu[other] {
                ((deepest, d_main), (other, d_other))
            } else {
                ((other, d_other), (deepest, d_main))
            };
            ((nu[a.0], a.1), (nu[b.0], b.1))
        }
        // A single resolved dip: bracket it one grid step on each side and
        // split the depth evenly.
        None => (
            (nu[deepest] - step, 0.5 * depth_deepest),
            (nu[deepest] + step, 0.5 * depth_deepest),
        ),
    };

    Ok(FitParams {
        nu_plus_ghz: hi.0,
        nu_minus_ghz: lo.0,
        depth_plus: hi.1,
        depth_minus: lo.1,
        gamma_ghz: gamma,
        gamma_minus_ghz: None,
        baseline,
    })
}

/// Fits with default options, seeding from [`initial_guess`] when no guess
/// is supplied.
pub fn fit_dual_lorentzian(
    samples: &SpectrumSamples,
    guess: Option<FitParams>,
) -> Result<FitResult> {
    fit_dual_lorentzian_with(samples, guess, &FitOptions::default())
}

/// Damped least squares over the dual-Lorentzian parameters.
///
/// Minimizes the (optionally sigma-weighted) sum of squared residuals with
/// an analytic Jacobian. Each iteration solves
/// (J^T J + lambda diag(J^T J)) delta = -J^T r and accepts the step only if
/// the cost does not increase, so the accepted cost sequence is
/// non-increasing. Non-convergence returns the best parameters found with
/// `converged = false` rather than an error.
pub fn fit_dual_lorentzian_with(
    samples: &SpectrumSamples,
    guess: Option<FitParams>,
    options: &FitOptions,
) -> Result<FitResult> {
    let guess = match guess {
        Some(g) => g,
        None => initial_guess(samples)?,
    };
    let shared = options.shared_width;
    let npar = n_params(shared);
    let nu = samples.nu_ghz();
    let pl = samples.pl();
    let m = samples.len();
    if m < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            n: m,
            min: MIN_SAMPLES,
        });
    }
    let weights: Option<Vec<f64>> = samples
        .sigma()
        .map(|s| s.iter().map(|sig| 1.0 / sig).collect());
    let step = nu.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
    let gamma_floor = step / 10.0;

    let residuals = |p: &FitParams| -> DVector<f64> {
        DVector::from_iterator(
            m,
            nu.iter().zip(pl.iter()).enumerate().map(|(i, (&x, &y))| {
                let w = weights.as_ref().map_or(1.0, |w| w[i]);
                w * (model_value(p, x) - y)
            }),
        )
    };
    let jacobian = |p: &FitParams| -> DMatrix<f64> {
        let mut j = model_jacobian(p, nu, shared);
        if let Some(w) = &weights {
            for (row, &wi) in w.iter().enumerate() {
                for col in 0..npar {
                    j[(row, col)] *= wi;
                }
            }
        }
        j
    };

    let mut v = pack_params(&guess, shared);
    project(&mut v, gamma_floor, shared);
    let mut params = unpack_params(&v, shared);
    let mut r = residuals(&params);
    let mut cost = r.norm_squared();
    let mut cost_history = vec![cost];
    let mut lambda = options.initial_damping;
    let mut converged = false;
    let mut rank_warning = false;
    let mut iterations = 0;

    let mut j = jacobian(&params);
    while iterations < options.max_iterations {
        iterations += 1;
        let gradient = j.transpose() * &r;
        if gradient.amax() <= options.grad_tol {
            converged = true;
            break;
        }
        let jtj = j.transpose() * &j;
        let diag_max = (0..npar).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
        let mut normal = jtj.clone();
        for k in 0..npar {
            // Floor tiny diagonal entries so the damping keeps the system
            // positive definite even when a parameter has no local gradient.
            let d = jtj[(k, k)].max(1e-12 * diag_max).max(f64::MIN_POSITIVE);
            normal[(k, k)] += lambda * d;
        }
        let delta = match Cholesky::new(normal) {
            Some(ch) => ch.solve(&(-&gradient)),
            None => {
                rank_warning = true;
                lambda *= 2.0;
                if lambda > 1e15 {
                    break;
                }
                continue;
            }
        };
        let mut v_trial = &v + delta;
        project(&mut v_trial, gamma_floor, shared);
        let params_trial = unpack_params(&v_trial, shared);
        let r_trial = residuals(&params_trial);
        let cost_trial = r_trial.norm_squared();
        if cost_trial <= cost {
            let drop = cost - cost_trial;
            v = v_trial;
            params = params_trial;
            r = r_trial;
            j = jacobian(&params);
            cost = cost_trial;
            cost_history.push(cost);
            lambda = (lambda / 3.0).max(1e-18);
            if drop <= options.cost_tol * cost_history[cost_history.len() - 2].max(1e-300) {
                converged = true;
                break;
            }
        } else {
            lambda *= 2.0;
            if lambda > 1e15 {
                break;
            }
        }
    }

    // Linearized covariance at the optimum.
    let jtj = j.transpose() * &j;
    let dof = m.saturating_sub(npar).max(1) as f64;
    let s2 = cost / dof;
    let uncertainties = match Cholesky::new(jtj.clone()) {
        Some(ch) => {
            // Flag near-singular curvature (hugely correlated parameters).
            let l = ch.l();
            let (mut lmin, mut lmax) = (f64::MAX, 0.0f64);
            for k in 0..npar {
                lmin = lmin.min(l[(k, k)]);
                lmax = lmax.max(l[(k, k)]);
            }
            if lmin <= 0.0 || lmax / lmin > 1e8 {
                rank_warning = true;
            }
            let cov = ch.inverse() * s2;
            let sigmas =
                DVector::from_iterator(npar, (0..npar).map(|k| cov[(k, k)].max(0.0).sqrt()));
            Some(unpack_params(&sigmas, shared))
        }
        None => {
            rank_warning = true;
            None
        }
    };

    let raw_rms = {
        let ss: f64 = nu
            .iter()
            .zip(pl.iter())
            .map(|(&x, &y)| {
                let e = model_value(&params, x) - y;
                e * e
            })
            .sum();
        (ss / m as f64).sqrt()
    };

    Ok(FitResult {
        params,
        uncertainties,
        residual_rms: raw_rms,
        iterations,
        converged,
        rank_warning,
        cost_history,
    })
}

/// Converts fitted line parameters to strain observables:
/// m_z from the dip midpoint, the transverse magnitude from the splitting,
/// and the phase combination 2 phi_mw + phi_str from the depth imbalance
/// (up to sign; the arccos branch in [0, pi] is reported and the ambiguity
/// flagged).
pub fn invert_to_strain(
    fit: &FitResult,
    d_ghz: f64,
    phi_mw_rad: Option<f64>,
) -> Result<StrainEstimate> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let p = &fit.params;
    let total = p.depth_plus + p.depth_minus;
    if total <= 0.0 {
        return Err(Error::ZeroTotalDepth);
    }
    let imbalance = (p.depth_plus - p.depth_minus) / total;
    let phase = imbalance.clamp(-1.0, 1.0).acos();
    Ok(StrainEstimate {
        m_z_hat_ghz: 0.5 * (p.nu_plus_ghz + p.nu_minus_ghz) - d_ghz,
        m_perp_hat_ghz: 0.5 * (p.nu_plus_ghz - p.nu_minus_ghz),
        imbalance_hat: imbalance,
        phase_sum_hat_rad: phase,
        ambiguity_flag: imbalance.abs() < 1.0,
        phi_str_hat_rad: phi_mw_rad.map(|pm| phase - 2.0 * pm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{
        default_grid, synthesize, transition_amplitudes, transition_frequencies, SpectrumModel,
    };
    use crate::spin::{strain_phase, StrainAmplitudes};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Line parameters a synthesized model should fit to.
    fn expected_fit_params(model: &SpectrumModel) -> FitParams {
        let (nu_minus, nu_plus) = transition_frequencies(model.d_ghz, &model.amps);
        let phi_str = strain_phase(&model.amps).unwrap();
        let (ap, am) = transition_amplitudes(model.phi_mw_rad, phi_str);
        FitParams {
            nu_plus_ghz: nu_plus,
            nu_minus_ghz: nu_minus,
            depth_plus: model.depth_scale() * ap,
            depth_minus: model.depth_scale() * am,
            gamma_ghz: model.gamma_ghz,
            gamma_minus_ghz: None,
            baseline: model.baseline,
        }
    }

    fn two_dip_model() -> SpectrumModel {
        SpectrumModel::new(
            2.87,
            StrainAmplitudes::new(-1e-3, 3e-3, 4e-3, 0.0, 0.0),
            0.4,
            2e-3,
            0.2 * 2e-3,
            1.0,
        )
        .unwrap()
    }

    /// Random model whose dips stay well inside the default grid and whose
    /// imbalance keeps both dips visible.
    fn random_model(rng: &mut impl Rng) -> SpectrumModel {
        let gamma = rng.random_range(1e-3..3e-3);
        let m_perp = rng.random_range(gamma..8e-3);
        let m_z = rng.random_range(-2e-3..2e-3);
        // Keep |imbalance| <= 0.8 so both depths stay away from zero.
        let target = rng.random_range(-0.8..0.8f64);
        let phi_str_plus_2mw = target.acos() * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let phi_str = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let phi_mw = 0.5 * (phi_str_plus_2mw - phi_str);
        let depth = rng.random_range(0.1..0.3);
        SpectrumModel::new(
            2.87,
            StrainAmplitudes::new(
                m_z,
                m_perp * phi_str.cos(),
                m_perp * phi_str.sin(),
                0.0,
                0.0,
            ),
            phi_mw,
            gamma,
            depth * gamma,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn guess_locates_both_dips() {
        let model = two_dip_model();
        let grid = default_grid(model.d_ghz);
        let step = grid[1] - grid[0];
        let samples = synthesize(&model, &grid).unwrap();
        let guess = initial_guess(&samples).unwrap();
        let truth = expected_fit_params(&model);
        assert!((guess.nu_plus_ghz - truth.nu_plus_ghz).abs() <= 2.0 * step);
        assert!((guess.nu_minus_ghz - truth.nu_minus_ghz).abs() <= 2.0 * step);
        // The slow Lorentzian tails depress even the upper quartile a little.
        assert!((guess.baseline - 1.0).abs() < 5e-3);
    }

    #[test]
    fn guess_brackets_a_single_dip() {
        let model =
            SpectrumModel::new(2.87, StrainAmplitudes::ZERO, 0.0, 2e-3, 0.2 * 2e-3, 1.0).unwrap();
        let grid = default_grid(2.87);
        let step = grid[1] - grid[0];
        let samples = synthesize(&model, &grid).unwrap();
        let guess = initial_guess(&samples).unwrap();
        assert!(guess.nu_minus_ghz < 2.87 && 2.87 < guess.nu_plus_ghz);
        assert!((guess.nu_plus_ghz - guess.nu_minus_ghz - 2.0 * step).abs() < 1e-12);
    }

    #[test]
    fn guess_rejects_flat_and_short_input() {
        let nu: Vec<f64> = (0..100).map(|k| 2.84 + k as f64 * 1e-4).collect();
        let flat = SpectrumSamples::new(nu.clone(), vec![1.0; 100], None).unwrap();
        assert!(matches!(initial_guess(&flat), Err(Error::FlatSpectrum)));

        let short = SpectrumSamples::new(nu[..10].to_vec(), vec![1.0; 10], None).unwrap();
        assert!(matches!(
            initial_guess(&short),
            Err(Error::TooFewSamples { n: 10, .. })
        ));
    }

    #[test]
    fn noiseless_round_trip_recovers_parameters() {
        let model = two_dip_model();
        let samples = synthesize(&model, &default_grid(model.d_ghz)).unwrap();
        let fit = fit_dual_lorentzian(&samples, None).unwrap();
        assert!(fit.converged, "fit did not converge: {fit:?}");
        let truth = expected_fit_params(&model);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        assert!(rel(fit.params.nu_plus_ghz, truth.nu_plus_ghz) < 1e-6);
        assert!(rel(fit.params.nu_minus_ghz, truth.nu_minus_ghz) < 1e-6);
        assert!(rel(fit.params.depth_plus, truth.depth_plus) < 1e-6);
        assert!(rel(fit.params.depth_minus, truth.depth_minus) < 1e-6);
        assert!(rel(fit.params.gamma_ghz, truth.gamma_ghz) < 1e-6);
        assert!(rel(fit.params.baseline, truth.baseline) < 1e-6);

        let est = invert_to_strain(&fit, model.d_ghz, Some(model.phi_mw_rad)).unwrap();
        assert!((est.m_z_hat_ghz - model.amps.m_z).abs() < 1e-6);
        assert!((est.m_perp_hat_ghz - model.amps.transverse()).abs() < 1e-6);
    }

    #[test]
    fn accepted_costs_never_increase() {
        let model = two_dip_model();
        let samples = synthesize(&model, &default_grid(model.d_ghz)).unwrap();
        let fit = fit_dual_lorentzian(&samples, None).unwrap();
        assert!(fit.cost_history.len() >= 2);
        for pair in fit.cost_history.windows(2) {
            assert!(pair[1] <= pair[0], "cost rose: {pair:?}");
        }
    }

    #[test]
    fn noisy_fit_stays_close() {
        let model = two_dip_model();
        let grid = default_grid(model.d_ghz);
        let clean = synthesize(&model, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let noisy: Vec<f64> = clean
            .pl()
            .iter()
            .map(|&y| y + noise.sample(&mut rng))
            .collect();
        let samples = SpectrumSamples::new(grid, noisy, None).unwrap();
        let fit = fit_dual_lorentzian(&samples, None).unwrap();
        assert!(fit.converged);
        let truth = expected_fit_params(&model);
        assert!((fit.params.nu_plus_ghz - truth.nu_plus_ghz).abs() < 0.2 * model.gamma_ghz);
        assert!((fit.params.nu_minus_ghz - truth.nu_minus_ghz).abs() < 0.2 * model.gamma_ghz);
    }

    #[test]
    fn noisy_trials_recover_positions_and_depths_at_the_ninetieth_percentile() {
        let model = SpectrumModel::new(
            2.87,
            StrainAmplitudes::new(-1e-3, 3e-3, 4e-3, 0.0, 0.0),
            0.45,
            2e-3,
            0.3 * 2e-3,
            1.0,
        )
        .unwrap();
        let grid = default_grid(2.87);
        let clean = synthesize(&model, &grid).unwrap();
        let truth = expected_fit_params(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(707);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut nu_err = Vec::new();
        let mut depth_err = Vec::new();
        for _ in 0..100 {
            let noisy: Vec<f64> = clean
                .pl()
                .iter()
                .map(|&y| y + noise.sample(&mut rng))
                .collect();
            let samples = SpectrumSamples::new(grid.clone(), noisy, None).unwrap();
            let fit = fit_dual_lorentzian(&samples, None).unwrap();
            if !fit.converged {
                nu_err.push(f64::INFINITY);
                depth_err.push(f64::INFINITY);
                continue;
            }
            nu_err.push((fit.params.nu_plus_ghz - truth.nu_plus_ghz).abs() / model.gamma_ghz);
            nu_err.push((fit.params.nu_minus_ghz - truth.nu_minus_ghz).abs() / model.gamma_ghz);
            depth_err.push((fit.params.depth_plus - truth.depth_plus).abs() / truth.depth_plus);
            depth_err.push((fit.params.depth_minus - truth.depth_minus).abs() / truth.depth_minus);
        }
        let p90 = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[(v.len() * 9) / 10]
        };
        let nu_p90 = p90(&mut nu_err);
        let depth_p90 = p90(&mut depth_err);
        assert!(nu_p90 < 0.2, "p90 position error {nu_p90} linewidths");
        assert!(depth_p90 < 0.05, "p90 depth error {depth_p90}");
    }

    #[test]
    fn merged_dips_do_not_crash() {
        // Splitting of gamma/4: far below resolution. A touch of noise
        // gives the covariance a meaningful scale.
        let gamma = 4e-3;
        let model = SpectrumModel::new(
            2.87,
            StrainAmplitudes::new(0.0, gamma / 8.0, 0.0, 0.0, 0.0),
            0.7,
            gamma,
            0.2 * gamma,
            1.0,
        )
        .unwrap();
        let grid = default_grid(2.87);
        let clean = synthesize(&model, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let noise = Normal::new(0.0, 2e-3).unwrap();
        let pl: Vec<f64> = clean
            .pl()
            .iter()
            .map(|&y| y + noise.sample(&mut rng))
            .collect();
        let samples = SpectrumSamples::new(grid, pl, None).unwrap();
        let fit = fit_dual_lorentzian(&samples, None).unwrap();
        assert!(fit.converged);
        assert!(fit.residual_rms.is_finite());
        // Strong parameter correlation shows up as a rank warning or as
        // position uncertainties on the order of the splitting itself.
        let split = (fit.params.nu_plus_ghz - fit.params.nu_minus_ghz).abs();
        match &fit.uncertainties {
            Some(u) => assert!(
                fit.rank_warning || u.nu_plus_ghz + u.nu_minus_ghz > 0.1 * split,
                "expected correlated uncertainties, got {u:?} for splitting {split}"
            ),
            None => assert!(fit.rank_warning),
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nus: Vec<f64> = (0..50).map(|k| 2.84 + k as f64 * 1.2e-3).collect();
        for _ in 0..20 {
            let p = FitParams {
                nu_plus_ghz: rng.random_range(2.868..2.885),
                nu_minus_ghz: rng.random_range(2.855..2.868),
                depth_plus: rng.random_range(0.05..0.3),
                depth_minus: rng.random_range(0.05..0.3),
                gamma_ghz: rng.random_range(1e-3..5e-3),
                gamma_minus_ghz: None,
                baseline: rng.random_range(0.9..1.1),
            };
            let analytic = model_jacobian(&p, &nus, true);
            let v = pack_params(&p, true);
            for col in 0..6 {
                let scale = v[col].abs().max(1e-3);
                let h = 1e-7 * scale;
                let mut vp = v.clone();
                vp[col] += h;
                let mut vm = v.clone();
                vm[col] -= h;
                let pp = unpack_params(&vp, true);
                let pm = unpack_params(&vm, true);
                for (row, &nu) in nus.iter().enumerate() {
                    let fd = (model_value(&pp, nu) - model_value(&pm, nu)) / (2.0 * h);
                    let a = analytic[(row, col)];
                    let tol = 1e-5 * a.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        (a - fd).abs() <= tol,
                        "col {col} row {row}: analytic {a} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn independent_widths_recover_distinct_gammas() {
        // Synthesize directly from the dip model with two different widths.
        let truth = FitParams {
            nu_plus_ghz: 2.876,
            nu_minus_ghz: 2.864,
            depth_plus: 0.18,
            depth_minus: 0.12,
            gamma_ghz: 2.5e-3,
            gamma_minus_ghz: Some(1.5e-3),
            baseline: 1.0,
        };
        let grid = default_grid(2.87);
        let pl: Vec<f64> = grid.iter().map(|&nu| model_value(&truth, nu)).collect();
        let samples = SpectrumSamples::new(grid, pl, None).unwrap();
        let options = FitOptions {
            shared_width: false,
            ..FitOptions::default()
        };
        let fit = fit_dual_lorentzian_with(&samples, None, &options).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.params.gamma_plus(), 2.5e-3, max_relative = 1e-5);
        assert_relative_eq!(fit.params.gamma_minus(), 1.5e-3, max_relative = 1e-5);
    }

    #[test]
    fn inversion_arithmetic() {
        let fit = FitResult {
            params: FitParams {
                nu_plus_ghz: 2.875,
                nu_minus_ghz: 2.865,
                depth_plus: 0.2,
                depth_minus: 0.1,
                gamma_ghz: 2e-3,
                gamma_minus_ghz: None,
                baseline: 1.0,
            },
            uncertainties: None,
            residual_rms: 0.0,
            iterations: 1,
            converged: true,
            rank_warning: false,
            cost_history: vec![0.0],
        };
        let est = invert_to_strain(&fit, 2.87, None).unwrap();
        assert!((est.m_z_hat_ghz - 0.0).abs() < 1e-15);
        assert_relative_eq!(est.m_perp_hat_ghz, 5e-3, max_relative = 1e-12);
        assert_relative_eq!(est.imbalance_hat, 1.0 / 3.0, max_relative = 1e-15);
        assert!(est.ambiguity_flag);
        assert!(est.phi_str_hat_rad.is_none());
    }

    #[test]
    fn equal_depths_give_zero_imbalance_and_quarter_turn_phase() {
        let mut fit = FitResult {
            params: FitParams {
                nu_plus_ghz: 2.875,
                nu_minus_ghz: 2.865,
                depth_plus: 0.15,
                depth_minus: 0.15,
                gamma_ghz: 2e-3,
                gamma_minus_ghz: None,
                baseline: 1.0,
            },
            uncertainties: None,
            residual_rms: 0.0,
            iterations: 1,
            converged: true,
            rank_warning: false,
            cost_history: vec![0.0],
        };
        let est = invert_to_strain(&fit, 2.87, None).unwrap();
        assert_eq!(est.imbalance_hat, 0.0);
        assert_relative_eq!(
            est.phase_sum_hat_rad,
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-15
        );
        assert!(est.ambiguity_flag, "sign of the phase is not determined");

        fit.converged = false;
        assert!(matches!(
            invert_to_strain(&fit, 2.87, None),
            Err(Error::NotConverged)
        ));
        fit.converged = true;
        fit.params.depth_plus = 0.0;
        fit.params.depth_minus = 0.0;
        assert!(matches!(
            invert_to_strain(&fit, 2.87, None),
            Err(Error::ZeroTotalDepth)
        ));
    }

    #[test]
    fn imbalance_is_invariant_under_depth_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let dp: f64 = rng.random_range(0.01..0.5);
            let dm: f64 = rng.random_range(0.01..0.5);
            let k: f64 = rng.random_range(1e-3..1e3);
            let base = (dp - dm) / (dp + dm);
            let scaled = (k * dp - k * dm) / (k * dp + k * dm);
            assert!((base - scaled).abs() < 1e-15);
        }
    }

    #[test]
    fn many_random_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for trial in 0..10 {
            let model = random_model(&mut rng);
            let samples = synthesize(&model, &default_grid(model.d_ghz)).unwrap();
            let fit = fit_dual_lorentzian(&samples, None).unwrap();
            assert!(fit.converged, "trial {trial} failed to converge");
            let est = invert_to_strain(&fit, model.d_ghz, None).unwrap();
            let m = crate::spectrum::metrics(&model);
            assert!(
                (est.m_z_hat_ghz - m.shift_ghz).abs() < 1e-6,
                "trial {trial}"
            );
            assert!(
                (2.0 * est.m_perp_hat_ghz - m.splitting_ghz).abs() < 2e-6,
                "trial {trial}"
            );
            assert!(
                (est.imbalance_hat - m.imbalance.unwrap()).abs() < 1e-6,
                "trial {trial}"
            );
        }
    }
}
