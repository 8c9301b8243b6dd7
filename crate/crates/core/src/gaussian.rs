//! Gaussian-state engine for one mechanical and one optical mode.
//!
//! Covariance matrices are ordered `(q, p, X, Y)` with vacuum variance 1/2.
//! Block names: `A` (mechanics, rows 0..2), `B` (optics, rows 2..4) and the
//! cross block `C` (mechanics × optics).

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Matrix4, SMatrix, SVector, Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::CovarianceJson;
use crate::numerics::{inverse2, inverse4};
use crate::params::DetectorModel;

/// Tolerance on the smallest eigenvalue of `σ + iΩ/2`, relative to `max(1, ‖σ‖)`.
pub const PHYSICALITY_TOL: f64 = 1e-10;
/// Tolerance on `‖σ − σᵀ‖∞`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Click probabilities below this are treated as impossible events.
pub const MIN_P_CLICK: f64 = 1e-15;

/// Zero-mean (by default) two-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceState {
    pub sigma: Matrix4<f64>,
    pub mean: Vector4<f64>,
}

impl CovarianceState {
    /// Builds a state after checking symmetry and the uncertainty principle.
    pub fn new(sigma: Matrix4<f64>) -> Result<Self> {
        let state = Self::unchecked(sigma);
        state.check_symmetric()?;
        state.check_physical()?;
        Ok(state)
    }

    /// Builds a state without any checks.
    pub fn unchecked(sigma: Matrix4<f64>) -> Self {
        Self {
            sigma,
            mean: Vector4::zeros(),
        }
    }

    pub fn with_mean(mut self, mean: Vector4<f64>) -> Self {
        self.mean = mean;
        self
    }

    pub fn vacuum() -> Self {
        Self::unchecked(Matrix4::identity() * 0.5)
    }

    /// Product state with mechanical block `a` and optical block `b`.
    pub fn product(a: Matrix2<f64>, b: Matrix2<f64>) -> Self {
        let mut s = Matrix4::zeros();
        s.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
        s.fixed_view_mut::<2, 2>(2, 2).copy_from(&b);
        Self::unchecked(s)
    }

    /// Two-mode squeezed vacuum with squeezing parameter `r`.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let c = 0.5 * (2.0 * r).cosh();
        let s = 0.5 * (2.0 * r).sinh();
        Self::unchecked(Matrix4::new(
            c, 0.0, s, 0.0, //
            0.0, c, 0.0, -s, //
            s, 0.0, c, 0.0, //
            0.0, -s, 0.0, c,
        ))
    }

    pub fn mech_block(&self) -> Matrix2<f64> {
        self.sigma.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn opt_block(&self) -> Matrix2<f64> {
        self.sigma.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn cross_block(&self) -> Matrix2<f64> {
        self.sigma.fixed_view::<2, 2>(0, 2).into_owned()
    }

    pub fn asymmetry(&self) -> f64 {
        (self.sigma - self.sigma.transpose()).abs().max()
    }

    pub fn check_symmetric(&self) -> Result<()> {
        if self.sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateState(
                "covariance matrix has non-finite entries",
            ));
        }
        if self.asymmetry() > SYMMETRY_TOL * self.sigma.abs().max().max(1.0) {
            return Err(Error::DegenerateState("covariance matrix is not symmetric"));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the Hermitian matrix `σ + iΩ/2`.
    pub fn min_physical_eigenvalue(&self) -> f64 {
        // Real embedding [[σ, −Ω/2], [Ω/2, σ]] carries each eigenvalue twice.
        let omega = symplectic_form4() * 0.5;
        let sym = (self.sigma + self.sigma.transpose()) * 0.5;
        let mut h = SMatrix::<f64, 8, 8>::zeros();
        h.fixed_view_mut::<4, 4>(0, 0).copy_from(&sym);
        h.fixed_view_mut::<4, 4>(4, 4).copy_from(&sym);
        h.fixed_view_mut::<4, 4>(0, 4).copy_from(&(-omega));
        h.fixed_view_mut::<4, 4>(4, 0).copy_from(&omega);
        h.symmetric_eigenvalues().min()
    }

    pub fn is_physical(&self) -> bool {
        self.check_physical().is_ok()
    }

    pub fn check_physical(&self) -> Result<()> {
        let min = self.min_physical_eigenvalue();
        let scale = self.sigma.abs().max().max(1.0);
        if !(min >= -PHYSICALITY_TOL * scale) {
            return Err(Error::NonPhysical {
                min_eigenvalue: min,
            });
        }
        Ok(())
    }

    /// Applies a local symplectic `s_mech ⊕ s_opt`.
    pub fn transform_local(&self, s_mech: &Matrix2<f64>, s_opt: &Matrix2<f64>) -> Self {
        let mut s = Matrix4::zeros();
        s.fixed_view_mut::<2, 2>(0, 0).copy_from(s_mech);
        s.fixed_view_mut::<2, 2>(2, 2).copy_from(s_opt);
        Self {
            sigma: s * self.sigma * s.transpose(),
            mean: s * self.mean,
        }
    }

    pub fn to_json(&self) -> CovarianceJson {
        CovarianceJson::new(
            &self.sigma,
            &[self.mean[0], self.mean[1], self.mean[2], self.mean[3]],
        )
    }

    pub fn from_json(json: &CovarianceJson) -> Result<Self> {
        let (sigma, mean) = json.to_matrix()?;
        Ok(Self::new(sigma)?.with_mean(Vector4::from(mean)))
    }
}

/// Two-mode symplectic form `Ω₄ = ω ⊕ ω` with `ω = [[0, 1], [−1, 0]]`.
pub fn symplectic_form4() -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m[(0, 1)] = 1.0;
    m[(1, 0)] = -1.0;
    m[(2, 3)] = 1.0;
    m[(3, 2)] = -1.0;
    m
}

/// `n`-mode symplectic form over interleaved quadratures `(x₁, p₁, x₂, p₂, …)`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    m
}

/// `‖S Ω Sᵀ − Ω‖∞` (max-abs entry) for a square matrix of even size.
pub fn symplectic_residual(s: &DMatrix<f64>) -> Result<f64> {
    let n = s.nrows();
    if n != s.ncols() || n % 2 != 0 {
        return Err(Error::domain(
            "dimension",
            n as f64,
            "symplectic matrices must be square with even size",
        ));
    }
    let omega = symplectic_form(n / 2);
    Ok((s * &omega * s.transpose() - omega).abs().max())
}

/// Single-mode rotation by angle θ in phase space.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Converts a Bogoliubov map `â_out = X â + Y â†` into the real quadrature
/// map over interleaved `(x₁, p₁, x₂, p₂, …)` in the same mode order.
pub fn bogoliubov_to_symplectic(x: &DMatrix<Complex64>, y: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let plus = x[(i, j)] + y[(i, j)];
            let minus = x[(i, j)] - y[(i, j)];
            s[(2 * i, 2 * j)] = plus.re;
            s[(2 * i, 2 * j + 1)] = -minus.im;
            s[(2 * i + 1, 2 * j)] = plus.im;
            s[(2 * i + 1, 2 * j + 1)] = minus.re;
        }
    }
    s
}

/// Single-mode Gaussian Wigner function `exp(−½uᵀΣ⁻¹u)/(2π√det Σ)`.
pub fn wigner_gaussian_1mode(sigma: &Matrix2<f64>, point: [f64; 2]) -> Result<f64> {
    let det = sigma.determinant();
    if !(det > 0.0) {
        return Err(Error::DegenerateState("single-mode covariance is singular"));
    }
    let inv = inverse2(sigma)?;
    let u = Vector2::from(point);
    Ok((-0.5 * u.dot(&(inv * u))).exp() / (2.0 * PI * det.sqrt()))
}

/// Two-mode Gaussian Wigner function at `point = (q, p, X, Y)`.
pub fn wigner_gaussian(state: &CovarianceState, point: [f64; 4]) -> Result<f64> {
    let chol = state.sigma.cholesky().ok_or(Error::DegenerateState(
        "two-mode covariance is not positive definite",
    ))?;
    let det = chol.l().diagonal().product().powi(2);
    if !(det > 0.0) {
        return Err(Error::DegenerateState("two-mode covariance is singular"));
    }
    let u = Vector4::from(point) - state.mean;
    let z = chol
        .l()
        .solve_lower_triangular(&u)
        .ok_or(Error::DegenerateState("singular Cholesky factor"))?;
    Ok((-0.5 * z.norm_squared()).exp() / ((2.0 * PI).powi(2) * det.sqrt()))
}

/// Smallest symplectic eigenvalue of the partially transposed covariance.
pub fn partial_transpose_min_symplectic(state: &CovarianceState) -> f64 {
    let a = state.mech_block().determinant();
    let b = state.opt_block().determinant();
    let c = state.cross_block().determinant();
    let det = state.sigma.determinant();
    let delta = a + b - 2.0 * c;
    let disc = (delta * delta - 4.0 * det).max(0.0);
    // Stable form of (Δ − √disc)/2 = 2 det / (Δ + √disc).
    let nu2 = 2.0 * det / (delta + disc.sqrt());
    nu2.max(0.0).sqrt()
}

/// `E_N = max(0, −log₂(2ν̃₋))`.
pub fn log_negativity_gaussian(state: &CovarianceState) -> Result<f64> {
    state.check_symmetric()?;
    state.check_physical()?;
    let nu = partial_transpose_min_symplectic(state);
    Ok((-(2.0 * nu).log2()).max(0.0))
}

/// Post-click mechanical Wigner function
/// `W′ = (G_{Σ′} − coeff·G_{Σ″}) / p_click`, with `G_Σ` normalized Gaussians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalWigner {
    pub sigma_prime: Matrix2<f64>,
    pub sigma_dprime: Matrix2<f64>,
    pub coeff: f64,
    pub p_click: f64,
}

impl ConditionalWigner {
    pub fn wigner(&self, x: f64, p: f64) -> f64 {
        let g1 = gaussian2(&self.sigma_prime, x, p);
        let g2 = gaussian2(&self.sigma_dprime, x, p);
        (g1 - self.coeff * g2) / self.p_click
    }

    /// Largest standard deviation of either Gaussian along any direction.
    pub fn broad_std(&self) -> f64 {
        let e1 = self.sigma_prime.symmetric_eigenvalues().max();
        let e2 = self.sigma_dprime.symmetric_eigenvalues().max();
        e1.max(e2).sqrt()
    }

    /// Applies a phase-space rotation to the conditional state.
    pub fn rotated(&self, theta: f64) -> Self {
        let r = rotation(theta);
        Self {
            sigma_prime: r * self.sigma_prime * r.transpose(),
            sigma_dprime: r * self.sigma_dprime * r.transpose(),
            ..*self
        }
    }

    /// Mean phonon number of the conditional state.
    pub fn mean_phonons(&self) -> f64 {
        let n1 = 0.5 * self.sigma_prime.trace() - 0.5;
        let n2 = 0.5 * self.sigma_dprime.trace() - 0.5;
        (n1 - self.coeff * n2) / self.p_click
    }
}

fn gaussian2(sigma: &Matrix2<f64>, x: f64, p: f64) -> f64 {
    let (a, b, d) = (
        sigma[(0, 0)],
        0.5 * (sigma[(0, 1)] + sigma[(1, 0)]),
        sigma[(1, 1)],
    );
    let det = a * d - b * b;
    let quad = (d * x * x - 2.0 * b * x * p + a * p * p) / det;
    (-0.5 * quad).exp() / (2.0 * PI * det.sqrt())
}

/// `Δ_η = η/(2 − η)`.
pub fn delta_eta(eta: f64) -> f64 {
    eta / (2.0 - eta)
}

/// Conditions the mechanical mode on a Geiger click of the optical mode.
///
/// The no-click POVM element has Wigner symbol
/// `2(1−d)/(2−η) · exp(−Δ_η (X² + Y²))`, i.e. a Gaussian with inverse
/// covariance `M = Δ_η Σ_vac⁻¹ = 2Δ_η I`. Integrating it against the state
/// gives
///
/// * `Σ′ = A` (the mechanical marginal),
/// * `Σ″ = A − C (B + M⁻¹)⁻¹ Cᵀ`,
/// * `κ_η = √(det B⁻¹ / det(B⁻¹ + M)) = 1/√det(I + 2Δ_η B)`,
/// * `coeff = 2(1−d)κ_η/(2−η)`, `p_click = 1 − coeff`.
pub fn condition_on_click(
    state: &CovarianceState,
    det: &DetectorModel,
) -> Result<ConditionalWigner> {
    det.validate()?;
    state.check_symmetric()?;
    state.check_physical()?;
    let a = state.mech_block();
    let b = state.opt_block();
    let c = state.cross_block();
    if !(a.determinant() > 0.0 && b.determinant() > 0.0) {
        return Err(Error::DegenerateState("marginal covariance is singular"));
    }
    let de = delta_eta(det.eta);
    let (sigma_dprime, kappa_eta) = if de == 0.0 {
        (a, 1.0)
    } else {
        let noise = Matrix2::identity() / (2.0 * de);
        let gain = inverse2(&(b + noise))?;
        let sd = a - c * gain * c.transpose();
        let kappa = 1.0 / (Matrix2::identity() + b * (2.0 * de)).determinant().sqrt();
        (sd, kappa)
    };
    let sigma_dprime = (sigma_dprime + sigma_dprime.transpose()) * 0.5;
    let coeff = 2.0 * (1.0 - det.dark) * kappa_eta / (2.0 - det.eta);
    let p_click = 1.0 - coeff;
    if !(p_click >= MIN_P_CLICK) {
        return Err(Error::ZeroProbability { p_click });
    }
    if !(sigma_dprime.determinant() > 0.0) {
        return Err(Error::DegenerateState("conditional covariance is singular"));
    }
    Ok(ConditionalWigner {
        sigma_prime: a,
        sigma_dprime,
        coeff,
        p_click,
    })
}

/// Block form of [`condition_on_click`] written with `S = Σ⁻¹`; used as an
/// independent cross-check. Returns `(Σ′, Σ″, κ_η)`.
pub fn condition_blocks_via_inverse(
    state: &CovarianceState,
    eta: f64,
) -> Result<(Matrix2<f64>, Matrix2<f64>, f64)> {
    let s = inverse4(&state.sigma)?;
    let sm = s.fixed_view::<2, 2>(0, 0).into_owned();
    let sc = s.fixed_view::<2, 2>(0, 2).into_owned();
    let so = s.fixed_view::<2, 2>(2, 2).into_owned();
    let m = Matrix2::identity() * (2.0 * delta_eta(eta));
    let sigma_prime = inverse2(&(sm - sc * inverse2(&so)? * sc.transpose()))?;
    let som = so + m;
    let sigma_dprime = inverse2(&(sm - sc * inverse2(&som)? * sc.transpose()))?;
    let kappa =
        (sigma_dprime.determinant() / (state.sigma.determinant() * som.determinant())).sqrt();
    Ok((sigma_prime, sigma_dprime, kappa))
}

/// Solves `KΣ + ΣKᵀ + D = 0` for a Hurwitz-stable drift `K`.
pub fn solve_lyapunov(k: &Matrix4<f64>, d: &Matrix4<f64>) -> Result<CovarianceState> {
    let margin = k
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(margin < 0.0) {
        return Err(Error::Unstable { margin });
    }
    // Column-major vec: vec(KΣ + ΣKᵀ) = (I⊗K + K⊗I) vec(Σ).
    let mut big = SMatrix::<f64, 16, 16>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            for m in 0..4 {
                big[(i + 4 * j, m + 4 * j)] += k[(i, m)];
                big[(i + 4 * j, i + 4 * m)] += k[(j, m)];
            }
        }
    }
    let rhs = SVector::<f64, 16>::from_fn(|idx, _| -d[(idx % 4, idx / 4)]);
    let lu = big.lu();
    let sol = lu.solve(&rhs).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let mut sigma = Matrix4::from_fn(|i, j| sol[i + 4 * j]);
    sigma = (sigma + sigma.transpose()) * 0.5;
    let residual = (k * sigma + sigma * k.transpose() + d).abs().max();
    let scale = d.abs().max() + k.abs().max() * sigma.abs().max();
    if !(residual <= 1e-9 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::IllConditioned {
            condition: residual / scale,
        });
    }
    Ok(CovarianceState::unchecked(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid_integral(f: impl Fn(f64, f64) -> f64, half: f64, n: usize) -> f64 {
        let h = 2.0 * half / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            let x = -half + i as f64 * h;
            let wx = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            for j in 0..n {
                let p = -half + j as f64 * h;
                let wp = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                total += wx * wp * f(x, p);
            }
        }
        total * h * h
    }

    fn thermal(n: f64) -> Matrix2<f64> {
        Matrix2::identity() * (n + 0.5)
    }

    #[test]
    fn vacuum_and_thermal_wigner_values() {
        let v = wigner_gaussian_1mode(&thermal(0.0), [0.0, 0.0]).unwrap();
        assert_relative_eq!(v, 1.0 / PI, epsilon = 1e-15);
        let t = wigner_gaussian_1mode(&thermal(1.0), [0.0, 0.0]).unwrap();
        assert_relative_eq!(t, 1.0 / (3.0 * PI), epsilon = 1e-15);
        assert!((t - 0.10610).abs() < 1e-5);
        let two = wigner_gaussian(&CovarianceState::vacuum(), [0.0; 4]).unwrap();
        assert_relative_eq!(two, 1.0 / (PI * PI), epsilon = 1e-15);
    }

    #[test]
    fn singular_covariance_is_rejected() {
        assert!(wigner_gaussian_1mode(&Matrix2::zeros(), [0.0, 0.0]).is_err());
        assert!(wigner_gaussian(&CovarianceState::unchecked(Matrix4::zeros()), [0.0; 4]).is_err());
    }

    #[test]
    fn single_mode_wigner_is_normalized() {
        let s = Matrix2::new(1.3, 0.4, 0.4, 0.7);
        let total = grid_integral(|x, p| wigner_gaussian_1mode(&s, [x, p]).unwrap(), 10.0, 401);
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_mode_wigner_marginalizes() {
        // Integrating over the optical mode must leave the mechanical marginal.
        let st = CovarianceState::two_mode_squeezed(0.3);
        let (q, p) = (0.4, -0.2);
        let marg = grid_integral(|x, y| wigner_gaussian(&st, [q, p, x, y]).unwrap(), 9.0, 301);
        let direct = wigner_gaussian_1mode(&st.mech_block(), [q, p]).unwrap();
        assert!((marg - direct).abs() < 1e-8);
    }

    #[test]
    fn tmsv_log_negativity() {
        let en = log_negativity_gaussian(&CovarianceState::two_mode_squeezed(0.5)).unwrap();
        assert_relative_eq!(en, 1.0 / std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn product_state_has_zero_negativity() {
        let st = CovarianceState::product(thermal(0.3), thermal(2.0));
        assert_eq!(log_negativity_gaussian(&st).unwrap(), 0.0);
    }

    #[test]
    fn non_physical_state_is_rejected() {
        let st = CovarianceState::unchecked(Matrix4::identity() * 0.3);
        assert!(matches!(
            st.check_physical(),
            Err(Error::NonPhysical { .. })
        ));
        assert!(log_negativity_gaussian(&st).is_err());
        assert!(CovarianceState::new(Matrix4::identity() * 0.3).is_err());
        assert!(CovarianceState::new(Matrix4::identity() * 0.5).is_ok());
        let mut asym = Matrix4::identity();
        asym[(0, 1)] = 0.1;
        assert!(CovarianceState::new(asym).is_err());
    }

    #[test]
    fn tmsv_click_probability() {
        let st = CovarianceState::two_mode_squeezed(0.5);
        let cw = condition_on_click(&st, &DetectorModel::new(1.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(cw.p_click, 0.5f64.tanh().powi(2), epsilon = 1e-14);
        assert!((cw.p_click - 0.213_552).abs() < 1e-6);
        // Conditioning on at least one pair truncates the geometric phonon
        // distribution with ratio t = tanh²r to n ≥ 1.
        let n_th = 0.5f64.sinh().powi(2);
        let t = 0.5f64.tanh().powi(2);
        assert_relative_eq!(cw.mean_phonons(), 1.0 / (1.0 - t), epsilon = 1e-12);
        assert!(n_th < cw.mean_phonons());
    }

    #[test]
    fn zero_information_detector() {
        let st = CovarianceState::two_mode_squeezed(0.7);
        let cw = condition_on_click(&st, &DetectorModel::new(0.0, 0.1).unwrap()).unwrap();
        assert_relative_eq!(cw.p_click, 0.1, epsilon = 1e-15);
        assert_eq!(cw.sigma_prime, cw.sigma_dprime);
        for (x, p) in [(0.0, 0.0), (0.7, -1.1)] {
            let w = cw.wigner(x, p);
            let m = wigner_gaussian_1mode(&st.mech_block(), [x, p]).unwrap();
            assert_relative_eq!(w, m, epsilon = 1e-13);
        }
        assert!(matches!(
            condition_on_click(&st, &DetectorModel::new(0.0, 0.0).unwrap()),
            Err(Error::ZeroProbability { .. })
        ));
    }

    #[test]
    fn small_efficiency_is_continuous() {
        let st = CovarianceState::two_mode_squeezed(0.7);
        let cw = condition_on_click(&st, &DetectorModel::new(1e-8, 0.1).unwrap()).unwrap();
        assert!((cw.p_click - 0.1).abs() < 1e-7);
        assert!((cw.sigma_dprime - cw.sigma_prime).abs().max() < 1e-7);
        let w = cw.wigner(0.3, 0.2);
        let m = wigner_gaussian_1mode(&st.mech_block(), [0.3, 0.2]).unwrap();
        assert!((w - m).abs() < 1e-6);
    }

    #[test]
    fn uncorrelated_state_is_unchanged() {
        let st = CovarianceState::product(Matrix2::new(1.2, 0.3, 0.3, 0.9), thermal(0.4));
        let cw = condition_on_click(&st, &DetectorModel::new(0.7, 0.02).unwrap()).unwrap();
        for (x, p) in [(0.0, 0.0), (1.0, 0.5), (-0.4, 2.0)] {
            let m = wigner_gaussian_1mode(&st.mech_block(), [x, p]).unwrap();
            assert_relative_eq!(cw.wigner(x, p), m, epsilon = 1e-13);
        }
    }

    #[test]
    fn inverse_block_form_agrees() {
        let st = CovarianceState::two_mode_squeezed(0.4)
            .transform_local(&rotation(0.3), &Matrix2::new(1.3, 0.2, 0.0, 1.0 / 1.3));
        let thermalized = CovarianceState::unchecked(st.sigma + Matrix4::identity() * 0.2);
        for eta in [0.05, 0.4, 1.0] {
            let cw =
                condition_on_click(&thermalized, &DetectorModel::new(eta, 0.0).unwrap()).unwrap();
            let (sp, sd, kappa) = condition_blocks_via_inverse(&thermalized, eta).unwrap();
            assert!((sp - cw.sigma_prime).abs().max() < 1e-12);
            assert!((sd - cw.sigma_dprime).abs().max() < 1e-12);
            assert_relative_eq!(2.0 * kappa / (2.0 - eta), cw.coeff, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_wigner_is_normalized() {
        let st = CovarianceState::two_mode_squeezed(0.6);
        let cw = condition_on_click(&st, &DetectorModel::new(0.6, 0.01).unwrap()).unwrap();
        let half = 8.0 * cw.broad_std();
        let total = grid_integral(|x, p| cw.wigner(x, p), half, 601);
        assert!((total - 1.0).abs() < 1e-6);
        assert!(cw.wigner(0.0, 0.0) < 0.0);
    }

    #[test]
    fn symplectic_residual_examples() {
        assert_eq!(symplectic_residual(&DMatrix::identity(4, 4)).unwrap(), 0.0);
        let r = rotation(PI);
        let rot = DMatrix::from_fn(2, 2, |i, j| r[(i, j)]);
        assert!(symplectic_residual(&rot).unwrap() < 1e-15);
        assert!(symplectic_residual(&DMatrix::identity(3, 3)).is_err());
        assert!(symplectic_residual(&(DMatrix::identity(2, 2) * 2.0)).unwrap() > 1.0);
    }

    #[test]
    fn bogoliubov_conversion_of_squeezer() {
        let r = 0.35f64;
        let i = Complex64::i();
        // Two-mode squeezer a' = μa + iνb†, b' = μb + iνa†.
        let x = DMatrix::from_row_slice(
            2,
            2,
            &[r.cosh().into(), 0.0.into(), 0.0.into(), r.cosh().into()],
        );
        let y =
            DMatrix::from_row_slice(2, 2, &[0.0.into(), i * r.sinh(), i * r.sinh(), 0.0.into()]);
        let s = bogoliubov_to_symplectic(&x, &y);
        assert!(symplectic_residual(&s).unwrap() < 1e-14);
        let out = &s * (DMatrix::identity(4, 4) * 0.5) * s.transpose();
        let st = CovarianceState::unchecked(Matrix4::from_fn(|a, b| out[(a, b)]));
        assert_relative_eq!(
            log_negativity_gaussian(&st).unwrap(),
            2.0 * r / std::f64::consts::LN_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lyapunov_decoupled_equilibrium() {
        let (gamma, kappa, nbar) = (1e-6, 0.4, 3.0);
        let k = Matrix4::new(
            0.0, 1.0, 0.0, 0.0, //
            -1.0, -gamma, 0.0, 0.0, //
            0.0, 0.0, -kappa, 1.0, //
            0.0, 0.0, -1.0, -kappa,
        );
        let d =
            Matrix4::from_diagonal(&Vector4::new(0.0, (2.0 * nbar + 1.0) * gamma, kappa, kappa));
        let st = solve_lyapunov(&k, &d).unwrap();
        assert!((st.opt_block() - Matrix2::identity() * 0.5).abs().max() < 1e-12);
        let mech = st.mech_block();
        assert!(((mech[(0, 0)] / (nbar + 0.5)) - 1.0).abs() < 0.01);
        assert!(((mech[(1, 1)] / (nbar + 0.5)) - 1.0).abs() < 0.01);
        assert!(st.cross_block().abs().max() < 1e-12);
    }

    #[test]
    fn lyapunov_rejects_unstable_drift() {
        let k = Matrix4::identity() * 0.1;
        assert!(matches!(
            solve_lyapunov(&k, &Matrix4::identity()),
            Err(Error::Unstable { .. })
        ));
    }

    proptest! {
        #[test]
        fn log_negativity_invariant_under_local_rotations(
            r in 0.0f64..1.5, n in 0.0f64..2.0, t1 in -3.2f64..3.2, t2 in -3.2f64..3.2,
        ) {
            let base = CovarianceState::unchecked(
                CovarianceState::two_mode_squeezed(r).sigma
                    + Matrix4::from_diagonal(&Vector4::new(0.0, 0.0, n, n)),
            );
            let rot = base.transform_local(&rotation(t1), &rotation(t2));
            let a = log_negativity_gaussian(&base).unwrap();
            let b = log_negativity_gaussian(&rot).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn conditioning_preserves_positive_definiteness(
            r in 0.05f64..1.5, eta in 0.0f64..1.0, d in 0.001f64..0.2,
        ) {
            let st = CovarianceState::two_mode_squeezed(r);
            let cw = condition_on_click(&st, &DetectorModel::new(eta, d).unwrap()).unwrap();
            prop_assert!(cw.sigma_dprime.determinant() > 0.0);
            prop_assert!(cw.sigma_dprime[(0, 0)] > 0.0);
            prop_assert!(cw.p_click >= d - 1e-15 && cw.p_click <= 1.0);
        }
    }
}
