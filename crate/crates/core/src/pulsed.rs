//! Pulsed blue-detuned protocol as Gaussian input-output maps.
//!
//! After adiabatic elimination of the cavity, a pulse of duration τ acts as a
//! two-mode squeezer with rate `G = g²/(4κ)`:
//!
//! ```text
//! A_out = −μ A_in + iν B_in†,   B_out = μ B_in − iν A_in†,
//! μ = cosh r = e^{Gτ},          ν = sinh r = √(e^{2Gτ} − 1),
//! ```
//!
//! where `A` is the temporal optical mode and `B` the mechanics. With
//! mechanical damping Γ into a thermal bath the map acquires two environment
//! modes `E₁, E₂` built from the bath noise; [`bogoliubov_matrices`] constructs
//! the full canonical map over `(A, B, E₁, E₂)`.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    bogoliubov_to_symplectic, condition_on_click, symplectic_residual, ConditionalWigner,
    CovarianceState,
};
use crate::params::{DetectorModel, DimensionlessParams};

/// Tolerance on the Bogoliubov relations of every row.
pub const BOGOLIUBOV_TOL: f64 = 1e-8;
/// `|G − Γ|τ` below which the input envelope is evaluated by its flat limit.
pub const FLAT_ENVELOPE_THRESHOLD: f64 = 1e-8;

/// Lossless squeezing map of one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseMap {
    /// `G = g²/(4κ)` in units of Ω.
    pub g_rate: f64,
    /// Pulse duration `Ωτ`.
    pub tau: f64,
    /// Squeezing parameter `r = arccosh(e^{Gτ})`.
    pub r: f64,
}

impl PulseMap {
    pub fn mu(&self) -> f64 {
        (self.g_rate * self.tau).exp()
    }

    pub fn nu(&self) -> f64 {
        (2.0 * self.g_rate * self.tau).exp_m1().sqrt()
    }
}

/// `G = g²/(4κ)`.
pub fn effective_rate(p: &DimensionlessParams) -> Result<f64> {
    if !(p.kappa > 0.0) {
        return Err(Error::domain("kappa", p.kappa, "must be positive"));
    }
    Ok(p.g * p.g / (4.0 * p.kappa))
}

/// Squeezing parameter from `cosh r = e^{Gτ}`, evaluated as `asinh √(e^{2Gτ}−1)`.
pub fn squeeze_rate(p: &DimensionlessParams, tau: f64) -> Result<PulseMap> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain("tau", tau, "must be non-negative"));
    }
    let g_rate = effective_rate(p)?;
    let r = (2.0 * g_rate * tau).exp_m1().sqrt().asinh();
    Ok(PulseMap { g_rate, tau, r })
}

/// Input covariance `(n₀+½)I ⊕ ½I` over `(q, p, X, Y)`.
fn input_cm(n0: f64) -> Matrix4<f64> {
    Matrix4::from_diagonal(&nalgebra::Vector4::new(n0 + 0.5, n0 + 0.5, 0.5, 0.5))
}

/// Symplectic of the lossless map over `(q, p, X, Y)` for squeezing `r`.
pub fn lossless_symplectic(r: f64) -> Matrix4<f64> {
    let (mu, nu) = (r.cosh(), r.sinh());
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    // Mode order (B, A).
    let x = DMatrix::from_row_slice(2, 2, &[mu.into(), zero, zero, (-mu).into()]);
    let y = DMatrix::from_row_slice(2, 2, &[zero, -i * nu, i * nu, zero]);
    let s = bogoliubov_to_symplectic(&x, &y);
    Matrix4::from_fn(|a, b| s[(a, b)])
}

/// Output covariance of the lossless pulse acting on vacuum ⊗ thermal(n₀).
pub fn lossless_output_cm(p: &DimensionlessParams, tau: f64, n0: f64) -> Result<CovarianceState> {
    if !(n0 >= 0.0) {
        return Err(Error::domain("n0", n0, "must be non-negative"));
    }
    let map = squeeze_rate(p, tau)?;
    Ok(lossless_cm_for_r(map.r, n0))
}

/// Lossless output covariance for a given squeezing parameter.
pub fn lossless_cm_for_r(r: f64, n0: f64) -> CovarianceState {
    let s = lossless_symplectic(r);
    let sigma = s * input_cm(n0) * s.transpose();
    CovarianceState::unchecked((sigma + sigma.transpose()) * 0.5)
}

/// Exponential temporal envelopes of the damped pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BogoliubovEnvelopes {
    pub c_in: f64,
    pub c_out: f64,
    /// Overlap `∫ψ_in ψ_out` of the two envelopes.
    pub rho_c: f64,
    pub g_rate: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl BogoliubovEnvelopes {
    pub fn new(g_rate: f64, gamma: f64, tau: f64) -> Result<Self> {
        if !(g_rate > 0.0 && g_rate.is_finite()) {
            return Err(Error::domain("G", g_rate, "must be positive"));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::domain("Gamma", gamma, "must be non-negative"));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain("tau", tau, "must be positive"));
        }
        let net = g_rate - gamma;
        let c_in = if (net * tau).abs() < FLAT_ENVELOPE_THRESHOLD {
            ((1.0 + net * tau) / tau).sqrt()
        } else {
            (2.0 * net / -(-2.0 * net * tau).exp_m1()).sqrt()
        };
        let sum = g_rate + gamma;
        let c_out = (2.0 * sum / (2.0 * sum * tau).exp_m1()).sqrt();
        let overlap = if gamma == 0.0 {
            tau
        } else {
            (2.0 * gamma * tau).exp_m1() / (2.0 * gamma)
        };
        let rho_c = c_in * c_out * overlap;
        if !(rho_c.abs() < 1.0) {
            return Err(Error::DegenerateEnvelope { rho_c });
        }
        Ok(Self {
            c_in,
            c_out,
            rho_c,
            g_rate,
            gamma,
            tau,
        })
    }

    /// `ψ_in(s) = C_in e^{−(G−Γ)s}`.
    pub fn psi_in(&self, s: f64) -> f64 {
        self.c_in * (-(self.g_rate - self.gamma) * s).exp()
    }

    /// `ψ_out(s) = C_out e^{(G+Γ)s}`.
    pub fn psi_out(&self, s: f64) -> f64 {
        self.c_out * ((self.g_rate + self.gamma) * s).exp()
    }
}

/// Canonical map `â_out = X â_in + Y â_in†` over `(A, B, E₁, E₂)` and its
/// quadrature form `S` over `(q, p, X, Y, X₁, Y₁, X₂, Y₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovMap {
    pub x: DMatrix<Complex64>,
    pub y: DMatrix<Complex64>,
    pub s: DMatrix<f64>,
}

impl BogoliubovMap {
    /// `(‖XX† − YY† − I‖, ‖XYᵀ − YXᵀ‖)` as max-abs entries, restricted to `rows`.
    pub fn residuals_rows(&self, rows: &[usize]) -> (f64, f64) {
        let n = self.x.nrows();
        let mut r1: f64 = 0.0;
        let mut r2: f64 = 0.0;
        for &i in rows {
            for j in 0..n {
                let mut a = Complex64::new(if i == j { -1.0 } else { 0.0 }, 0.0);
                let mut b = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    a += self.x[(i, k)] * self.x[(j, k)].conj()
                        - self.y[(i, k)] * self.y[(j, k)].conj();
                    b += self.x[(i, k)] * self.y[(j, k)] - self.y[(i, k)] * self.x[(j, k)];
                }
                r1 = r1.max(a.norm());
                r2 = r2.max(b.norm());
            }
        }
        (r1, r2)
    }

    pub fn residuals(&self) -> (f64, f64) {
        self.residuals_rows(&[0, 1, 2, 3])
    }
}

/// Null vector of a complex `m × n` system (`m < n`), rank checked.
fn null_vector(rows: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    let n = rows[0].len();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    let svd = m.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::CompletionFailure("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let largest = svd.singular_values[order[0]];
    let last_kept = svd.singular_values[order[rows.len() - 1]];
    if !(last_kept > 1e-12 * largest) {
        return Err(Error::CompletionFailure(format!(
            "constraint system is rank deficient (singular value {last_kept:.3e})"
        )));
    }
    let idx = order[n - 1];
    Ok((0..n).map(|j| v_t[(idx, j)].conj()).collect())
}

/// Scales `v` so that `Σ_{plus} |v|² − Σ_{minus} |v|² = 1` and the entry of
/// largest modulus among `plus` is real and positive.
fn normalize_row(v: &mut [Complex64], plus: &[usize], minus: &[usize]) -> Result<()> {
    let norm: f64 = plus.iter().map(|&i| v[i].norm_sqr()).sum::<f64>()
        - minus.iter().map(|&i| v[i].norm_sqr()).sum::<f64>();
    if !(norm > 0.0) {
        return Err(Error::CompletionFailure(format!(
            "completed row has non-positive norm {norm:.3e}"
        )));
    }
    let pivot = plus
        .iter()
        .copied()
        .max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm()))
        .unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    let scale = phase / norm.sqrt();
    v.iter_mut().for_each(|z| *z *= scale);
    Ok(())
}

/// Builds the damped pulse map.
///
/// Rows for `A` and `B` follow from the damped input-output relations; the
/// environment rows use the ansatz that `E₁_out` depends on `(B, E₁, A†)` and
/// `E₂_out` on `(B, E₁, E₂, A†)`, with coefficients fixed by the canonical
/// constraints.
pub fn bogoliubov_matrices(
    g_rate: f64,
    gamma: f64,
    tau: f64,
) -> Result<(BogoliubovEnvelopes, BogoliubovMap)> {
    let env = BogoliubovEnvelopes::new(g_rate, gamma, tau)?;
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let (g, gm) = (g_rate, gamma);
    let net = g - gm;
    let k = env.c_out * (2.0 * g * tau).exp() / env.c_in;
    let grow = (net * tau).exp();
    let ratio = gm / g;
    let rho = env.rho_c;

    let mut x = DMatrix::from_element(4, 4, zero);
    let mut y = DMatrix::from_element(4, 4, zero);
    x[(0, 0)] = (-k).into();
    y[(0, 1)] = i * env.c_out * (2.0 * g * tau).exp_m1() / (2.0 * g).sqrt();
    y[(0, 2)] = -i * ratio.sqrt() * (k - rho);
    y[(0, 3)] = i * (ratio * (1.0 - rho * rho)).sqrt();
    x[(1, 1)] = grow.into();
    y[(1, 0)] = -i * (2.0 * g).sqrt() * grow / env.c_in;
    x[(1, 2)] = (-(2.0 * gm).sqrt() * grow / env.c_in).into();

    // Row E₁: unknowns (x₂₁, x₂₂, y₂₀).
    let eqs = vec![
        vec![-y[(0, 1)], -y[(0, 2)], x[(0, 0)]],
        vec![x[(1, 1)].conj(), x[(1, 2)].conj(), -y[(1, 0)].conj()],
    ];
    let mut v = null_vector(&eqs)?;
    normalize_row(&mut v, &[0, 1], &[2])?;
    x[(2, 1)] = v[0];
    x[(2, 2)] = v[1];
    y[(2, 0)] = v[2];

    // Row E₂: unknowns (x₃₁, x₃₂, x₃₃, y₃₀).
    let eqs = vec![
        vec![-y[(0, 1)], -y[(0, 2)], -y[(0, 3)], x[(0, 0)]],
        vec![x[(1, 1)].conj(), x[(1, 2)].conj(), zero, -y[(1, 0)].conj()],
        vec![x[(2, 1)].conj(), x[(2, 2)].conj(), zero, -y[(2, 0)].conj()],
    ];
    let mut v = null_vector(&eqs)?;
    normalize_row(&mut v, &[0, 1, 2], &[3])?;
    x[(3, 1)] = v[0];
    x[(3, 2)] = v[1];
    x[(3, 3)] = v[2];
    y[(3, 0)] = v[3];

    // Quadratures: mode order (A, B, E₁, E₂) → (B, A, E₁, E₂).
    let raw = bogoliubov_to_symplectic(&x, &y);
    const PERM: [usize; 8] = [2, 3, 0, 1, 4, 5, 6, 7];
    let s = DMatrix::from_fn(8, 8, |a, b| raw[(PERM[a], PERM[b])]);
    let map = BogoliubovMap { x, y, s };

    let (r1, r2) = map.residuals();
    if r1 > BOGOLIUBOV_TOL || r2 > BOGOLIUBOV_TOL {
        return Err(Error::CompletionFailure(format!(
            "Bogoliubov relations violated (|XX†−YY†−I| = {r1:.3e}, |XYᵀ−YXᵀ| = {r2:.3e})"
        )));
    }
    let res = symplectic_residual(&map.s)?;
    if res > BOGOLIUBOV_TOL {
        return Err(Error::CompletionFailure(format!(
            "symplectic residual {res:.3e}"
        )));
    }
    Ok((env, map))
}

/// Output covariance of the damped pulse, environment traced out.
pub fn thermal_output_cm(p: &DimensionlessParams, tau: f64, n0: f64) -> Result<CovarianceState> {
    if !(n0 >= 0.0) {
        return Err(Error::domain("n0", n0, "must be non-negative"));
    }
    if !(p.nbar >= 0.0) {
        return Err(Error::domain("nbar", p.nbar, "must be non-negative"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain("tau", tau, "must be non-negative"));
    }
    if tau == 0.0 {
        return Ok(CovarianceState::unchecked(input_cm(n0)));
    }
    let g_rate = effective_rate(p)?;
    let (_, map) = bogoliubov_matrices(g_rate, p.gamma, tau)?;
    let bath = p.nbar + 0.5;
    let diag = [n0 + 0.5, n0 + 0.5, 0.5, 0.5, bath, bath, bath, bath];
    let sigma_in = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&diag));
    let out = &map.s * sigma_in * map.s.transpose();
    let sigma = Matrix4::from_fn(|a, b| 0.5 * (out[(a, b)] + out[(b, a)]));
    let state = CovarianceState::unchecked(sigma);
    state.check_physical()?;
    Ok(state)
}

/// Conditional mechanical state after a click on the damped pulse output.
pub fn herald_pulsed_thermal(
    p: &DimensionlessParams,
    tau: f64,
    n0: f64,
    det: &DetectorModel,
) -> Result<ConditionalWigner> {
    condition_on_click(&thermal_output_cm(p, tau, n0)?, det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{log_negativity_gaussian, rotation};
    use crate::numerics::{integrate_scalar, QuadratureConfig};
    use approx::assert_relative_eq;

    fn params(g: f64, kappa: f64, gamma: f64, nbar: f64) -> DimensionlessParams {
        DimensionlessParams {
            kappa,
            g,
            gamma,
            delta: -1.0,
            nbar,
            n0: 0.0,
        }
    }

    #[test]
    fn squeeze_rate_values() {
        let p = params(0.09, 0.3, 1e-6, 0.0);
        assert_eq!(squeeze_rate(&p, 0.0).unwrap().r, 0.0);
        let m = squeeze_rate(&p, 10.0).unwrap();
        assert_relative_eq!(m.g_rate, 0.00675, epsilon = 1e-15);
        assert_relative_eq!(m.r, 0.371_570_588_411_810_7, epsilon = 1e-12);
        assert_relative_eq!(m.r.cosh(), m.mu(), epsilon = 1e-14);
        assert_relative_eq!(m.r.sinh(), m.nu(), epsilon = 1e-14);
        assert!((m.mu().powi(2) - m.nu().powi(2) - 1.0).abs() < 1e-12);
        assert!(squeeze_rate(&params(0.1, 0.0, 0.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn lossless_cm_limits() {
        let p = params(0.09, 0.3, 0.0, 0.0);
        let st = lossless_output_cm(&p, 0.0, 0.4).unwrap();
        assert!((st.sigma - input_cm(0.4)).abs().max() < 1e-15);
        let tmsv = lossless_cm_for_r(0.5, 0.0);
        assert_relative_eq!(
            log_negativity_gaussian(&tmsv).unwrap(),
            1.0 / std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        // Mechanical variance cosh²r(n₀+½) + sinh²r/2.
        let (r, n0) = (0.7f64, 0.3);
        let st = lossless_cm_for_r(r, n0);
        assert_relative_eq!(
            st.sigma[(0, 0)],
            r.cosh().powi(2) * (n0 + 0.5) + r.sinh().powi(2) / 2.0,
            epsilon = 1e-13
        );
        assert!(st.is_physical());
    }

    #[test]
    fn optical_phase_does_not_change_negativity_or_click() {
        let st = lossless_cm_for_r(0.6, 0.2);
        let rot = st.transform_local(
            &nalgebra::Matrix2::identity(),
            &rotation(std::f64::consts::PI),
        );
        assert_relative_eq!(
            log_negativity_gaussian(&st).unwrap(),
            log_negativity_gaussian(&rot).unwrap(),
            epsilon = 1e-14
        );
        let det = DetectorModel::new(0.6, 0.0).unwrap();
        let a = condition_on_click(&st, &det).unwrap();
        let b = condition_on_click(&rot, &det).unwrap();
        assert_relative_eq!(a.p_click, b.p_click, epsilon = 1e-15);
        assert!((a.sigma_dprime - b.sigma_dprime).abs().max() < 1e-14);
    }

    #[test]
    fn envelopes_are_normalized() {
        for (g, gm, tau) in [
            (0.01, 1e-4, 30.0),
            (0.05, 0.02, 10.0),
            (0.02, 0.02, 15.0),
            (0.01, 0.03, 20.0),
        ] {
            let env = BogoliubovEnvelopes::new(g, gm, tau).unwrap();
            let cfg = QuadratureConfig::default();
            let (a, _, _) = integrate_scalar(|s| env.psi_in(s).powi(2), 0.0, tau, &cfg);
            let (b, _, _) = integrate_scalar(|s| env.psi_out(s).powi(2), 0.0, tau, &cfg);
            let (c, _, _) = integrate_scalar(|s| env.psi_in(s) * env.psi_out(s), 0.0, tau, &cfg);
            assert!((a - 1.0).abs() < 1e-12, "{a}");
            assert!((b - 1.0).abs() < 1e-12, "{b}");
            assert!((c - env.rho_c).abs() < 1e-12);
            assert!(env.rho_c.abs() < 1.0);
        }
    }

    #[test]
    fn overlap_small_gamma_limit() {
        let env = BogoliubovEnvelopes::new(0.01, 1e-12, 20.0).unwrap();
        assert_relative_eq!(env.rho_c, env.c_in * env.c_out * 20.0, max_relative = 1e-10);
    }

    #[test]
    fn zero_damping_recovers_lossless_coefficients() {
        let (g, tau) = (0.00675, 40.0);
        let (_, map) = bogoliubov_matrices(g, 1e-12, tau).unwrap();
        let mu = (g * tau).exp();
        let nu = (2.0 * g * tau).exp_m1().sqrt();
        assert!((map.x[(0, 0)] + mu).norm() < 1e-9);
        assert!((map.y[(0, 1)] - Complex64::i() * nu).norm() < 1e-9);
        assert!((map.x[(1, 1)] - mu).norm() < 1e-9);
        assert!((map.y[(1, 0)] + Complex64::i() * nu).norm() < 1e-9);
    }

    #[test]
    fn map_is_canonical_over_grid() {
        for g in [0.002, 0.01, 0.05] {
            for gm in [1e-12, 1e-6, 1e-3, 0.01] {
                for tau in [1.0, 10.0, 60.0] {
                    let (_, map) = bogoliubov_matrices(g, gm, tau).unwrap();
                    let (r1, r2) = map.residuals();
                    assert!(
                        r1 < 1e-10 && r2 < 1e-10,
                        "G={g} Γ={gm} τ={tau}: {r1:e} {r2:e}"
                    );
                    assert!(symplectic_residual(&map.s).unwrap() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn balanced_rates_use_flat_envelope() {
        let (env, map) = bogoliubov_matrices(0.02, 0.02, 10.0).unwrap();
        assert_relative_eq!(env.c_in, 1.0 / 10.0f64.sqrt(), max_relative = 1e-12);
        assert!(symplectic_residual(&map.s).unwrap() < 1e-10);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(bogoliubov_matrices(0.0, 0.0, 1.0).is_err());
        assert!(bogoliubov_matrices(0.01, -1.0, 1.0).is_err());
        assert!(bogoliubov_matrices(0.01, 0.0, 0.0).is_err());
    }

    #[test]
    fn thermal_map_reduces_to_lossless() {
        for (g, kappa, tau, n0) in [
            (0.09, 0.3, 10.0, 0.1),
            (0.09, 0.3, 60.0, 0.5),
            (0.2, 0.4, 20.0, 1.0),
        ] {
            let p = params(g, kappa, 1e-12, 0.0);
            let a = thermal_output_cm(&p, tau, n0).unwrap();
            let b = lossless_output_cm(&p, tau, n0).unwrap();
            assert!((a.sigma - b.sigma).abs().max() < 1e-8);
        }
        let p = params(0.09, 0.3, 1e-3, 5.0);
        let zero = thermal_output_cm(&p, 0.0, 0.3).unwrap();
        assert_eq!(zero.sigma, input_cm(0.3));
    }

    #[test]
    fn thermal_output_is_physical_and_heats_up() {
        let mut last = f64::INFINITY;
        for nbar in [0.0, 10.0, 100.0, 1000.0] {
            let p = params(0.09, 0.3, 1e-5, nbar);
            let st = thermal_output_cm(&p, 40.0, 0.1).unwrap();
            assert!(st.is_physical());
            let en = log_negativity_gaussian(&st).unwrap();
            assert!(en <= last + 1e-12);
            last = en;
        }
    }
}
