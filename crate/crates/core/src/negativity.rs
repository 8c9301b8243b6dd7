//! Wigner negativity `N_W = ∫_{W<0} W(x, p) dx dp` (signed, `N_W ≤ 0`).

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fockrep::RadialFockMixture;
use crate::gaussian::ConditionalWigner;
use crate::io::fmt_f64;
use crate::numerics::{integrate_scalar, QuadratureConfig};

/// Default points per axis of the 2-D grid.
pub const DEFAULT_RESOLUTION: usize = 801;
/// Half-width of the 2-D grid in standard deviations of the broader Gaussian.
pub const GRID_EXTENT_SIGMAS: f64 = 6.0;
/// Tolerance of the normalization precondition `∫W = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Radial extent (1-D) or half-width of the square (2-D).
    pub extent: f64,
    /// Sample count for the radial root search, or points per axis.
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityResult {
    pub n_w: f64,
    pub grid_spec: GridSpec,
    pub estimated_error: f64,
    /// Set when the refinement or normalization check did not meet tolerance.
    pub warning: Option<String>,
}

impl NegativityResult {
    pub fn magnitude(&self) -> f64 {
        self.n_w.abs()
    }
}

/// Locates a sign change of `f` in `[a, b]` by bisection.
fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `2π ∫₀^R r·min(0, W(r)) dr` for a radially symmetric Fock mixture, with
/// `R = √(2(K_max + 6))`.
///
/// The negative intervals are bracketed on a fine radial sample, their ends
/// refined by bisection, and each interval integrated by adaptive
/// Gauss–Kronrod quadrature.
pub fn negativity_radial(mix: &RadialFockMixture) -> NegativityResult {
    let k_max = mix.k_max();
    let extent = (2.0 * (k_max as f64 + 6.0)).sqrt();
    // Oscillations of L_k(2r²) have spacing ~ 1/√k in r.
    let samples = 2000 + 40 * k_max;
    let w = |r: f64| mix.wigner_radial(r * r);
    let h = extent / samples as f64;

    let mut edges = Vec::new();
    let mut inside = w(0.0) < 0.0;
    let mut start = 0.0;
    let mut prev_r = 0.0;
    for i in 1..=samples {
        let r = i as f64 * h;
        let neg = w(r) < 0.0;
        if neg != inside {
            let root = bisect(&w, prev_r, r);
            if inside {
                edges.push((start, root));
            } else {
                start = root;
            }
            inside = neg;
        }
        prev_r = r;
    }
    if inside {
        edges.push((start, extent));
    }

    let cfg = QuadratureConfig {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        ..Default::default()
    };
    let mut n_w = 0.0;
    let mut err = 0.0;
    for (a, b) in edges {
        let (v, e, _) = integrate_scalar(|r| 2.0 * PI * r * w(r).min(0.0), a, b, &cfg);
        n_w += v;
        err += e;
    }
    let norm = mix.sum();
    let warning = ((norm - 1.0).abs() > NORMALIZATION_TOL)
        .then(|| format!("mixture weights sum to {norm:.9}, not 1"));
    NegativityResult {
        n_w: n_w.min(0.0),
        grid_spec: GridSpec {
            extent,
            resolution: samples,
        },
        estimated_error: err,
        warning,
    }
}

/// Trapezoidal sums of `min(0, W)` and `W` on an `n × n` grid over `[−L, L]²`.
fn trapezoid(cw: &ConditionalWigner, half: f64, n: usize) -> (f64, f64) {
    let h = 2.0 * half / (n - 1) as f64;
    let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let mut neg = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let x = -half + i as f64 * h;
        let (mut row_neg, mut row_total) = (0.0, 0.0);
        for j in 0..n {
            let p = -half + j as f64 * h;
            let v = cw.wigner(x, p) * weight(j);
            row_total += v;
            row_neg += v.min(0.0);
        }
        neg += weight(i) * row_neg;
        total += weight(i) * row_total;
    }
    (neg * h * h, total * h * h)
}

/// 2-D negativity of a conditional Gaussian-difference state on the default grid.
pub fn negativity_grid(cw: &ConditionalWigner) -> NegativityResult {
    negativity_grid_with(cw, DEFAULT_RESOLUTION)
}

/// 2-D trapezoidal negativity over `±6σ` of the broader Gaussian with
/// `resolution` points per axis; the error estimate compares against the grid
/// with half the resolution.
pub fn negativity_grid_with(cw: &ConditionalWigner, resolution: usize) -> NegativityResult {
    let n = resolution.max(5) | 1;
    let half = GRID_EXTENT_SIGMAS * cw.broad_std();
    let (fine, total) = trapezoid(cw, half, n);
    let (coarse, _) = trapezoid(cw, half, n / 2 + 1);
    let estimated_error = (fine - coarse).abs();
    let mut warnings = Vec::new();
    if estimated_error > 1e-4 * fine.abs() + 1e-8 {
        warnings.push(format!(
            "grid refinement changed N_W by {estimated_error:.3e}"
        ));
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        warnings.push(format!(
            "Wigner function integrates to {total:.9} on the grid"
        ));
    }
    NegativityResult {
        n_w: fine.min(0.0),
        grid_spec: GridSpec {
            extent: half,
            resolution: n,
        },
        estimated_error,
        warning: (!warnings.is_empty()).then(|| warnings.join("; ")),
    }
}

/// Writes a dense `x, p, W` grid of `n × n` points over `[−half, half]²`.
pub fn write_wigner_grid<W: Write>(
    wigner: impl Fn(f64, f64) -> f64,
    half: f64,
    n: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "p", "W"])?;
    let h = if n > 1 {
        2.0 * half / (n - 1) as f64
    } else {
        0.0
    };
    for i in 0..n {
        let x = -half + i as f64 * h;
        for j in 0..n {
            let p = -half + j as f64 * h;
            w.write_record([fmt_f64(x), fmt_f64(p), fmt_f64(wigner(x, p))])?;
        }
    }
    w.flush()?;
    Ok(())
}
