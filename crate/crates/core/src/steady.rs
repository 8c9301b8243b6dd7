//! Continuous-drive protocol: linearized Langevin dynamics and the covariance
//! of a spectrally filtered output mode.
//!
//! Quadrature fluctuations `u = (q, p, x, y)` obey `u' = K u + B n(t)` with
//! noise `n = (ξ, x_in, y_in)` of spectral density `N = diag((2n̄+1)Γ, ½, ½)`,
//! so that the diffusion matrix is `D = B N Bᵀ = diag(0, (2n̄+1)Γ, κ, κ)`.
//! The output field `a_out = a_in + √(2κ) a` is projected on a normalized
//! temporal mode; its quadratures `(X, Y)` and the mechanics `(q, p)` form the
//! covariance returned by [`filtered_output_cm`].

use nalgebra::{Matrix4, SMatrix, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{condition_on_click, solve_lyapunov, ConditionalWigner, CovarianceState};
use crate::numerics::{integrate_adaptive, QuadratureConfig};
use crate::params::{DetectorModel, DimensionlessParams};

type Row3 = SMatrix<Complex64, 1, 3>;
type Resp = SMatrix<Complex64, 4, 3>;

/// Envelope of the temporal output mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum FilterShape {
    /// Rectangular window of duration `tau_m` (sinc spectral profile).
    RectWindow { tau_m: f64 },
    /// One-sided exponential with bandwidth `gamma_f` (Lorentzian profile).
    Exponential { gamma_f: f64 },
}

/// Temporal-mode filter centred at frequency `nu` relative to the drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    #[serde(flatten)]
    pub shape: FilterShape,
    pub nu: f64,
}

impl FilterSpec {
    pub fn rect(nu: f64, tau_m: f64) -> Self {
        Self {
            shape: FilterShape::RectWindow { tau_m },
            nu,
        }
    }

    pub fn exponential(nu: f64, gamma_f: f64) -> Self {
        Self {
            shape: FilterShape::Exponential { gamma_f },
            nu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nu.is_finite() {
            return Err(Error::domain("nu", self.nu, "must be finite"));
        }
        match self.shape {
            FilterShape::RectWindow { tau_m } if !(tau_m > 0.0 && tau_m.is_finite()) => {
                Err(Error::domain("tau_m", tau_m, "must be positive"))
            }
            FilterShape::Exponential { gamma_f } if !(gamma_f > 0.0 && gamma_f.is_finite()) => {
                Err(Error::domain("gamma_f", gamma_f, "must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Spectral profile `φ̃(ω)`, normalized so `∫|φ̃|² dω/2π = 1`.
    ///
    /// Window: `(e^{i(ω−ν)τ} − 1)/(i(ω−ν)√τ)`; exponential: `√(2γ)/(γ − i(ω−ν))`. Both describe modes
    /// collected before the readout instant.
    pub fn profile(&self, omega: f64) -> Complex64 {
        let x = omega - self.nu;
        match self.shape {
            FilterShape::RectWindow { tau_m } => {
                let arg = x * tau_m;
                if arg.abs() < 1e-6 {
                    // Series of (e^{ia} − 1)/(ia) to second order.
                    Complex64::new(1.0 - arg * arg / 6.0, arg / 2.0) * tau_m.sqrt()
                } else {
                    let e = Complex64::new(arg.cos() - 1.0, arg.sin());
                    e / (Complex64::i() * x * tau_m.sqrt())
                }
            }
            FilterShape::Exponential { gamma_f } => {
                Complex64::new((2.0 * gamma_f).sqrt(), 0.0) / Complex64::new(gamma_f, -x)
            }
        }
    }

    /// Spectral scale to resolve: `2π/τ_m` or `γ_f`.
    fn resolution(&self) -> f64 {
        match self.shape {
            FilterShape::RectWindow { tau_m } => 2.0 * std::f64::consts::PI / tau_m,
            FilterShape::Exponential { gamma_f } => gamma_f,
        }
    }
}

/// Drift and diffusion of the linearized quadrature dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub k: Matrix4<f64>,
    pub d: Matrix4<f64>,
    /// Input-noise quadrature pattern `diag(0, 0, 1, 1)`.
    pub v_in: Matrix4<f64>,
    pub kappa: f64,
    pub gamma: f64,
    pub nbar: f64,
}

/// `K = [[0, 1, 0, 0], [−1, −Γ, g, 0], [0, 0, −κ, Δ], [g, 0, −Δ, −κ]]`.
pub fn drift_matrix(p: &DimensionlessParams) -> Result<DriftDiffusion> {
    p.validate()?;
    let k = Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, -p.gamma, p.g, 0.0, //
        0.0, 0.0, -p.kappa, p.delta, //
        p.g, 0.0, -p.delta, -p.kappa,
    );
    let d = Matrix4::from_diagonal(&Vector4::new(
        0.0,
        (2.0 * p.nbar + 1.0) * p.gamma,
        p.kappa,
        p.kappa,
    ));
    Ok(DriftDiffusion {
        k,
        d,
        v_in: Matrix4::from_diagonal(&Vector4::new(0.0, 0.0, 1.0, 1.0)),
        kappa: p.kappa,
        gamma: p.gamma,
        nbar: p.nbar,
    })
}

/// Hurwitz test of the drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub stable: bool,
    /// Largest real part among the drift eigenvalues.
    pub margin: f64,
}

pub fn stability(dd: &DriftDiffusion) -> Stability {
    let margin =
        dd.k.complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
    Stability {
        stable: margin < 0.0,
        margin,
    }
}

/// Settings of the spectral integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Integration range `[−half_range, half_range]` in units of Ω.
    pub half_range: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Panel width as a fraction of `min(κ, filter resolution)`.
    pub panel_fraction: f64,
    pub max_panels: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            half_range: 20.0,
            abs_tol: 1e-11,
            rel_tol: 1e-10,
            panel_fraction: 1.0 / 8.0,
            max_panels: 200_000,
        }
    }
}

/// Filtered covariance together with quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredOutput {
    pub state: CovarianceState,
    /// Numerically integrated filter norm `∫|φ̃|² dω/2π` over the range.
    pub calibration: f64,
    /// Largest estimated quadrature error over the optical and cross blocks.
    pub quadrature_error: f64,
}

struct Spectral {
    k: Matrix4<f64>,
    b: SMatrix<f64, 4, 3>,
    noise: [f64; 3],
    sqrt_2kappa: f64,
    filter: FilterSpec,
}

impl Spectral {
    fn new(dd: &DriftDiffusion, filter: FilterSpec) -> Self {
        let s = (2.0 * dd.kappa).sqrt();
        let mut b = SMatrix::<f64, 4, 3>::zeros();
        b[(1, 0)] = 1.0;
        b[(2, 1)] = -s;
        b[(3, 2)] = -s;
        Self {
            k: dd.k,
            b,
            noise: [(2.0 * dd.nbar + 1.0) * dd.gamma, 0.5, 0.5],
            sqrt_2kappa: s,
            filter,
        }
    }

    /// `R(ω) = (−iω − K)⁻¹ B`.
    fn response(&self, omega: f64) -> Resp {
        let m = Matrix4::<Complex64>::from_fn(|i, j| {
            let diag = if i == j {
                Complex64::new(0.0, -omega)
            } else {
                Complex64::new(0.0, 0.0)
            };
            diag - self.k[(i, j)]
        });
        let bc = self.b.map(|v| Complex64::new(v, 0.0));
        m.lu().solve(&bc).unwrap_or_else(Resp::zeros)
    }

    /// Cavity part of the output field response `√(2κ)(R_x + iR_y)/√2`.
    fn cavity_output(&self, r: &Resp) -> Row3 {
        let i = Complex64::i();
        Row3::from_fn(|_, j| {
            (r[(2, j)] + i * r[(3, j)]) * (self.sqrt_2kappa / std::f64::consts::SQRT_2)
        })
    }

    fn direct() -> Row3 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Row3::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(0.0, s),
        )
    }

    /// Rows `(q, p, X, Y)` of the full response and the optical rows of the
    /// direct (vacuum pass-through) part alone.
    fn rows(&self, omega: f64) -> (Resp, [Row3; 2]) {
        let r_plus = self.response(omega);
        let r_minus = self.response(-omega);
        let phi_plus = self.filter.profile(omega);
        let phi_minus = self.filter.profile(-omega);
        let dir = Self::direct();

        let a_cav = self.cavity_output(&r_plus) * phi_plus;
        let a_dir = dir * phi_plus;
        // Creation part: conj of the annihilation response at −ω.
        let ad_cav = (self.cavity_output(&r_minus) * phi_minus).map(|z| z.conj());
        let ad_dir = (dir * phi_minus).map(|z| z.conj());

        let s2 = std::f64::consts::SQRT_2;
        let i = Complex64::i();
        let x_of = |a: &Row3, ad: &Row3| (a + ad) / Complex64::new(s2, 0.0);
        let y_of = |a: &Row3, ad: &Row3| (a - ad) / (i * s2);

        let a_full = a_cav + a_dir;
        let ad_full = ad_cav + ad_dir;
        let mut h = Resp::zeros();
        h.fixed_view_mut::<2, 3>(0, 0)
            .copy_from(&r_plus.fixed_view::<2, 3>(0, 0));
        h.set_row(2, &x_of(&a_full, &ad_full));
        h.set_row(3, &y_of(&a_full, &ad_full));
        (h, [x_of(&a_dir, &ad_dir), y_of(&a_dir, &ad_dir)])
    }

    /// `Re[H N H†]` entries: optical block and cross block with the
    /// direct–direct term removed, as `[XX, XY, YY, qX, qY, pX, pY]`.
    fn integrand(&self, omega: f64) -> [f64; 7] {
        let (h, dir) = self.rows(omega);
        let corr = |a: &Row3, b: &Row3| -> f64 {
            (0..3)
                .map(|j| self.noise[j] * (a[j] * b[j].conj()).re)
                .sum()
        };
        let row = |i: usize| h.row(i).into_owned();
        let (q, p, x, y) = (row(0), row(1), row(2), row(3));
        let inv2pi = 0.5 / std::f64::consts::PI;
        [
            (corr(&x, &x) - corr(&dir[0], &dir[0])) * inv2pi,
            (corr(&x, &y) - corr(&dir[0], &dir[1])) * inv2pi,
            (corr(&y, &y) - corr(&dir[1], &dir[1])) * inv2pi,
            corr(&q, &x) * inv2pi,
            corr(&q, &y) * inv2pi,
            corr(&p, &x) * inv2pi,
            corr(&p, &y) * inv2pi,
        ]
    }

    /// Mechanical `[qq, qp, pp]` spectral integrand (diagnostic only).
    fn mechanical_integrand(&self, omega: f64) -> [f64; 3] {
        let r = self.response(omega);
        let corr = |a: usize, b: usize| -> f64 {
            (0..3)
                .map(|j| self.noise[j] * (r[(a, j)] * r[(b, j)].conj()).re)
                .sum::<f64>()
                * 0.5
                / std::f64::consts::PI
        };
        [corr(0, 0), corr(0, 1), corr(1, 1)]
    }

    fn breakpoints(&self, half_range: f64) -> Vec<f64> {
        let mut pts = vec![self.filter.nu, -self.filter.nu, 0.0];
        for z in self.k.complex_eigenvalues().iter() {
            pts.push(z.im);
            pts.push(-z.im);
        }
        pts.retain(|x| x.abs() < half_range);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

fn quadrature_config(
    dd: &DriftDiffusion,
    filter: &FilterSpec,
    cfg: &SpectralConfig,
) -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: cfg.abs_tol,
        rel_tol: cfg.rel_tol,
        max_panel: dd.kappa.min(filter.resolution()) * cfg.panel_fraction,
        max_panels: cfg.max_panels,
    }
}

/// Covariance of `(q, p, X, Y)` for the filtered output mode.
pub fn filtered_output_cm(p: &DimensionlessParams, filt: &FilterSpec) -> Result<CovarianceState> {
    filtered_output_cm_with(p, filt, &SpectralConfig::default()).map(|o| o.state)
}

/// [`filtered_output_cm`] with explicit quadrature settings and diagnostics.
///
/// The mechanical block is the stationary Lyapunov solution; the optical and
/// cross blocks come from the spectral integral. The vacuum pass-through term
/// of the output field contributes exactly `½I` to the optical block (the mode
/// is normalized), so it is added analytically instead of being integrated.
pub fn filtered_output_cm_with(
    p: &DimensionlessParams,
    filt: &FilterSpec,
    cfg: &SpectralConfig,
) -> Result<FilteredOutput> {
    filt.validate()?;
    let dd = drift_matrix(p)?;
    if !(p.kappa > 0.0) {
        return Err(Error::domain(
            "kappa",
            p.kappa,
            "must be positive for an output field",
        ));
    }
    let st = stability(&dd);
    if !st.stable {
        return Err(Error::Unstable { margin: st.margin });
    }
    let lyap = solve_lyapunov(&dd.k, &dd.d)?;
    let spec = Spectral::new(&dd, *filt);
    let qcfg = quadrature_config(&dd, filt, cfg);
    let l = cfg.half_range;
    let bps = spec.breakpoints(l);
    let q = integrate_adaptive(|w| spec.integrand(w), -l, l, &bps, &qcfg);
    let quadrature_error = q.error.iter().fold(0.0_f64, |m, e| m.max(*e));
    if !q.converged {
        return Err(Error::QuadratureNonConvergence {
            residual: quadrature_error,
        });
    }
    let [xx, xy, yy, qx, qy, px, py] = q.value;
    let mut sigma = lyap.sigma;
    sigma[(2, 2)] = 0.5 + xx;
    sigma[(2, 3)] = xy;
    sigma[(3, 2)] = xy;
    sigma[(3, 3)] = 0.5 + yy;
    sigma[(0, 2)] = qx;
    sigma[(2, 0)] = qx;
    sigma[(0, 3)] = qy;
    sigma[(3, 0)] = qy;
    sigma[(1, 2)] = px;
    sigma[(2, 1)] = px;
    sigma[(1, 3)] = py;
    sigma[(3, 1)] = py;
    let state = CovarianceState::unchecked(sigma);
    state.check_physical()?;

    let norm = integrate_adaptive(
        |w| [filt.profile(w).norm_sqr() * 0.5 / std::f64::consts::PI],
        -l,
        l,
        &bps,
        &qcfg,
    );
    Ok(FilteredOutput {
        state,
        calibration: norm.value[0],
        quadrature_error,
    })
}

/// Mechanical block `[qq, qp, pp]` obtained from the spectral integral rather
/// than the Lyapunov equation, with its estimated error.
pub fn mechanical_block_spectral(
    p: &DimensionlessParams,
    cfg: &SpectralConfig,
) -> Result<([f64; 3], f64)> {
    let dd = drift_matrix(p)?;
    let st = stability(&dd);
    if !st.stable {
        return Err(Error::Unstable { margin: st.margin });
    }
    let spec = Spectral::new(&dd, FilterSpec::rect(0.0, 1.0));
    let width = st.margin.abs().max(1e-6);
    let qcfg = QuadratureConfig {
        abs_tol: cfg.abs_tol,
        rel_tol: cfg.rel_tol,
        max_panel: width,
        max_panels: cfg.max_panels,
    };
    let l = cfg.half_range;
    let q = integrate_adaptive(
        |w| spec.mechanical_integrand(w),
        -l,
        l,
        &spec.breakpoints(l),
        &qcfg,
    );
    let err = q.error.iter().fold(0.0_f64, |m, e| m.max(*e));
    Ok((q.value, err))
}

/// Conditional mechanical state heralded by a click on the filtered mode.
pub fn herald_cw(
    p: &DimensionlessParams,
    filt: &FilterSpec,
    det: &DetectorModel,
) -> Result<ConditionalWigner> {
    condition_on_click(&filtered_output_cm(p, filt)?, det)
}
