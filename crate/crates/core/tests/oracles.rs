//! Cross-checks of each engine against an independent formulation.

use heralded_core::fockrep::{
    apply_geiger_povm, conditional_fock_weights, conditional_fock_weights_raw, conditional_k_max,
    log_negativity_fock, p_click_pulsed, pulsed_output_state_auto, NEGATIVITY_TAIL,
};
use heralded_core::gaussian::{
    condition_on_click, log_negativity_gaussian, solve_lyapunov, CovarianceState,
};
use heralded_core::negativity::{negativity_grid, negativity_radial};
use heralded_core::numerics::gauss_legendre;
use heralded_core::pulsed::{lossless_cm_for_r, lossless_output_cm, thermal_output_cm};
use heralded_core::steady::{
    drift_matrix, filtered_output_cm, filtered_output_cm_with, SpectralConfig,
};
use heralded_core::{DetectorModel, DimensionlessParams, FilterSpec};
use nalgebra::{Matrix2, Matrix4, Vector2};

fn cw(nbar: f64) -> DimensionlessParams {
    DimensionlessParams {
        kappa: 0.4,
        g: 0.4,
        gamma: 1e-6,
        delta: 1.0,
        nbar,
        n0: nbar,
    }
}

fn pulsed(g: f64, kappa: f64, gamma: f64, nbar: f64) -> DimensionlessParams {
    DimensionlessParams {
        kappa,
        g,
        gamma,
        delta: -1.0,
        nbar,
        n0: 0.0,
    }
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
fn nodes(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| (0.5 * (a + b) + 0.5 * (b - a) * xi, 0.5 * (b - a) * wi))
        .collect()
}

/// Stationary filtered covariance computed in the time domain.
///
/// The output quadratures `o = √(2κ)(x, y) + (x_in, y_in)` have the lag
/// covariance `C(λ) = 2κ[e^{Kλ}(Σ − ½P)]_oo` for `λ > 0` plus a `½δ(λ)` term,
/// and the mechanics at the end of the window correlate with earlier output
/// through `√(2κ)[e^{Kσ}(Σ − ½P)]_mo`. The mode weights are
/// `w_X(σ) = (cos νσ, sin νσ)/√τ` and `w_Y(σ) = (−sin νσ, cos νσ)/√τ` in terms
/// of the time `σ` before the window closes, multiplied by `envelope(σ)` for
/// shaped modes supported on `[0, tau]`.
fn time_domain_cm(p: &DimensionlessParams, nu: f64, tau: f64) -> Matrix4<f64> {
    time_domain_cm_shaped(p, nu, tau, |_| 1.0 / tau.sqrt())
}

fn time_domain_cm_shaped(
    p: &DimensionlessParams,
    nu: f64,
    tau: f64,
    envelope: impl Fn(f64) -> f64,
) -> Matrix4<f64> {
    let dd = drift_matrix(p).unwrap();
    let lyap = solve_lyapunov(&dd.k, &dd.d).unwrap().sigma;
    let shifted = lyap - dd.v_in * 0.5;
    let kappa = p.kappa;
    let wx = |s: f64| Vector2::new((nu * s).cos(), (nu * s).sin()) * envelope(s);
    let wy = |s: f64| Vector2::new(-(nu * s).sin(), (nu * s).cos()) * envelope(s);

    let mut out = lyap;
    let mut cross = Matrix2::zeros();
    let mut opt = Matrix2::zeros();
    for (lambda, wl) in nodes(0.0, tau, 240) {
        let prop = (dd.k * lambda).exp() * shifted;
        let mo = prop.fixed_view::<2, 2>(0, 2).into_owned() * (2.0 * kappa).sqrt();
        let oo = prop.fixed_view::<2, 2>(2, 2).into_owned() * (2.0 * kappa);
        let col_x = mo * wx(lambda) * wl;
        let col_y = mo * wy(lambda) * wl;
        cross += Matrix2::from_columns(&[col_x, col_y]);
        // Later sample at σ, earlier at σ + λ (σ measured back from the end).
        for (sigma, ws) in nodes(0.0, tau - lambda, 120) {
            let (late_x, late_y) = (wx(sigma), wy(sigma));
            let (early_x, early_y) = (wx(sigma + lambda), wy(sigma + lambda));
            let xx = late_x.dot(&(oo * early_x));
            let yy = late_y.dot(&(oo * early_y));
            let xy = late_x.dot(&(oo * early_y)) + late_y.dot(&(oo * early_x));
            opt += Matrix2::new(2.0 * xx, xy, xy, 2.0 * yy) * (wl * ws);
        }
    }
    out.fixed_view_mut::<2, 2>(0, 2).copy_from(&cross);
    out.fixed_view_mut::<2, 2>(2, 0)
        .copy_from(&cross.transpose());
    out.fixed_view_mut::<2, 2>(2, 2)
        .copy_from(&(opt + Matrix2::identity() * 0.5));
    out
}

#[test]
fn filtered_cm_matches_time_domain_oracle() {
    for (nbar, nu, tau) in [
        (0.0, -1.0, 5.0),
        (0.0, 1.0, 5.0),
        (0.0, -1.0, 10.0),
        (833.0, -1.0, 5.0),
        (0.0, -0.5, 3.0),
    ] {
        let p = cw(nbar);
        let filt = FilterSpec::rect(nu, tau);
        let time = time_domain_cm(&p, nu, tau);
        let wide = SpectralConfig {
            half_range: 100.0,
            ..Default::default()
        };
        let freq = filtered_output_cm_with(&p, &filt, &wide)
            .unwrap()
            .state
            .sigma;
        let diff = (freq - time).abs().max();
        assert!(
            diff < 1e-7,
            "n̄={nbar} ν={nu} τ={tau}: max difference {diff:e}\n{freq}\n{time}"
        );
    }
}

#[test]
fn exponential_filter_matches_time_domain_oracle() {
    for (nbar, nu, gamma_f) in [(0.0, -1.0, 0.5), (0.0, 0.0, 0.5), (833.0, -1.0, 1.0)] {
        let p = cw(nbar);
        let horizon = 36.0 / gamma_f;
        let time = time_domain_cm_shaped(&p, nu, horizon, |s| {
            (2.0 * gamma_f).sqrt() * (-gamma_f * s).exp()
        });
        let wide = SpectralConfig {
            half_range: 400.0,
            ..Default::default()
        };
        let freq = filtered_output_cm_with(&p, &FilterSpec::exponential(nu, gamma_f), &wide)
            .unwrap()
            .state
            .sigma;
        let diff = (freq - time).abs().max();
        assert!(
            diff < 1e-5,
            "n̄={nbar} ν={nu} γ={gamma_f}: max difference {diff:e}\n{freq}\n{time}"
        );
    }
}

#[test]
fn spectral_integral_is_converged() {
    for (nbar, tau) in [(0.0, 5.0), (833.0, 5.0), (833.0, 20.0)] {
        let p = cw(nbar);
        let f = FilterSpec::rect(-1.0, tau);
        let base = filtered_output_cm_with(&p, &f, &SpectralConfig::default()).unwrap();
        let wide = filtered_output_cm_with(
            &p,
            &f,
            &SpectralConfig {
                half_range: 40.0,
                panel_fraction: 1.0 / 16.0,
                ..Default::default()
            },
        )
        .unwrap();
        let diff = (base.state.sigma - wide.state.sigma).abs().max();
        assert!(diff < 1e-6, "n̄={nbar} τ={tau}: {diff:e}");
    }
}

#[test]
fn filtered_states_are_physical_over_sweep() {
    for nbar in [0.0, 833.0, 41_700.0] {
        for nu in [-2.0, -1.0, -0.5, 0.0, 1.0] {
            for f in [
                FilterSpec::rect(nu, 5.0),
                FilterSpec::rect(nu, 30.0),
                FilterSpec::exponential(nu, 0.1),
            ] {
                let st = filtered_output_cm(&cw(nbar), &f)
                    .unwrap_or_else(|e| panic!("n̄={nbar} {f:?}: {e}"));
                assert!(st.is_physical(), "n̄={nbar} {f:?}");
            }
        }
    }
}

#[test]
fn fock_and_gaussian_log_negativity_agree() {
    let tmsv = pulsed_output_state_auto(0.0, 0.5, NEGATIVITY_TAIL).unwrap();
    assert!((log_negativity_fock(&tmsv) - 1.0 / std::f64::consts::LN_2).abs() < 1e-3);
    for n0 in [0.0, 0.1, 0.5, 1.0] {
        for r in [0.1, 0.5, 1.0, 1.5] {
            let fock = pulsed_output_state_auto(n0, r, NEGATIVITY_TAIL).unwrap();
            assert!(fock.n_max() <= 512);
            let en_f = log_negativity_fock(&fock);
            let en_g = log_negativity_gaussian(&lossless_cm_for_r(r, n0)).unwrap();
            assert!(
                (en_f - en_g).abs() < 1e-3,
                "n₀={n0} r={r}: {en_f} vs {en_g}"
            );
        }
    }
}

#[test]
fn fock_moments_reproduce_gaussian_covariance() {
    for (n0, r) in [(0.1, 0.4), (1.0, 1.2)] {
        let fock = pulsed_output_state_auto(n0, r, 1e-13).unwrap().covariance();
        let gauss = lossless_cm_for_r(r, n0);
        assert!((fock.sigma - gauss.sigma).abs().max() < 1e-9);
    }
}

#[test]
fn log_negativity_grows_with_pulse_length() {
    let p = pulsed(0.09, 0.3, 1e-6, 0.0);
    for n0 in [0.1, 0.5, 1.0] {
        let mut last = -1.0;
        for tau in [0.0, 10.0, 20.0, 40.0, 60.0, 80.0] {
            let en = log_negativity_gaussian(&lossless_output_cm(&p, tau, n0).unwrap()).unwrap();
            assert!(en >= last);
            last = en;
        }
        assert!(last > 0.0);
    }
}

#[test]
fn gaussian_and_fock_routes_agree_on_click() {
    let det = DetectorModel::new(0.6, 0.01).unwrap();
    for (g, tau, n0) in [(0.09, 10.0, 0.1), (0.09, 60.0, 0.1), (0.15, 30.0, 0.5)] {
        let p = pulsed(g, 0.3, 1e-12, 0.0);
        let st = thermal_output_cm(&p, tau, n0).unwrap();
        let gauss = condition_on_click(&st, &det).unwrap();
        let r = heralded_core::pulsed::squeeze_rate(&p, tau).unwrap().r;
        assert!((gauss.p_click - p_click_pulsed(&det, n0, r)).abs() < 1e-3);
        let k = conditional_k_max(&det, n0, r, 1e-12);
        let mix = conditional_fock_weights(&det, n0, r, k).unwrap();
        let radial = negativity_radial(&mix).n_w;
        let grid = negativity_grid(&gauss).n_w;
        assert!(
            (radial - grid).abs() < 1e-4,
            "g={g} τ={tau}: {radial} vs {grid}"
        );
    }
}

#[test]
fn brute_force_povm_grid() {
    for eta in [0.1, 0.325, 0.55, 0.775, 1.0] {
        for r in [0.1, 0.45, 0.8, 1.15, 1.5] {
            for n0 in [0.0, 0.25, 0.5, 0.75, 1.0] {
                for d in [0.0, 0.01, 0.1] {
                    let det = DetectorModel::new(eta, d).unwrap();
                    let st = pulsed_output_state_auto(n0, r, 1e-14).unwrap();
                    let (mix, p) = apply_geiger_povm(&st, &det).unwrap();
                    let closed = p_click_pulsed(&det, n0, r);
                    assert!((p - closed).abs() < 1e-10);
                    let k = conditional_k_max(&det, n0, r, 1e-15).max(st.n_max());
                    let (weights, raw) = conditional_fock_weights_raw(&det, n0, r, k).unwrap();
                    assert!((raw.iter().sum::<f64>() - closed).abs() < 1e-12);
                    for (a, b) in mix.weights.iter().zip(&weights.weights) {
                        assert!((a - b).abs() < 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn thermal_negativity_decreases_with_bath_temperature() {
    let det = DetectorModel::new(0.6, 0.0).unwrap();
    let mut last = f64::INFINITY;
    for nbar in [0.0, 100.0, 1000.0, 5000.0, 20_000.0] {
        let p = pulsed(0.09, 0.3, 1e-6, nbar);
        let cwg = condition_on_click(&thermal_output_cm(&p, 40.0, 0.1).unwrap(), &det).unwrap();
        let mag = negativity_grid(&cwg).magnitude();
        assert!(mag <= last + 1e-9, "n̄={nbar}: {mag} > {last}");
        last = mag;
    }
}

#[test]
fn covariance_json_round_trip() {
    let st = filtered_output_cm(&cw(0.0), &FilterSpec::rect(-1.0, 5.0)).unwrap();
    let json = serde_json::to_string(&st.to_json()).unwrap();
    let back = CovarianceState::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(back.sigma, st.sigma);
}
