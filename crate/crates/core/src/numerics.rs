//! Small numerical kernels shared by the physics modules: adaptive
//! Gauss–Kronrod quadrature for vector-valued integrands, a Dormand–Prince
//! 5(4) integrator, and condition-guarded small-matrix inverses.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Matrix2, Matrix4};

use crate::error::{Error, Result};

/// Inverses whose condition number exceeds this are rejected.
pub const CONDITION_GUARD: f64 = 1e12;

// 21-point Kronrod abscissae on [-1, 1] (positive half, descending) and the
// embedded 10-point Gauss weights for the odd-indexed abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_980_536,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Settings for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper bound on the width of the initial panels.
    pub max_panel: f64,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_panel: f64::INFINITY,
            max_panels: 20_000,
        }
    }
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<const N: usize> {
    pub value: [f64; N],
    /// Sum of the per-panel Kronrod/Gauss differences, per component.
    pub error: [f64; N],
    pub converged: bool,
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    worst: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.worst == other.worst
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.worst.total_cmp(&other.worst)
    }
}

fn kronrod21<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Panel<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    for c in 0..N {
        kron[c] = WGK[10] * fc[c];
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for c in 0..N {
            let s = f1[c] + f2[c];
            kron[c] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    let mut worst = 0.0_f64;
    for c in 0..N {
        value[c] = kron[c] * half;
        error[c] = ((kron[c] - gauss[c]) * half).abs();
        worst = worst.max(error[c]);
    }
    Panel {
        a,
        b,
        value,
        error,
        worst,
    }
}

/// Integrates a vector-valued function over `[a, b]` with globally adaptive
/// 21-point Gauss–Kronrod panels.
///
/// `breakpoints` inside the interval always become panel edges; the initial
/// panels are further split so none is wider than `cfg.max_panel`.
pub fn integrate_adaptive<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Quadrature<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let mut edges: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let pieces = if cfg.max_panel.is_finite() {
            ((hi - lo) / cfg.max_panel).ceil().max(1.0) as usize
        } else {
            1
        };
        let step = (hi - lo) / pieces as f64;
        for i in 0..pieces {
            let pa = lo + step * i as f64;
            let pb = if i + 1 == pieces { hi } else { pa + step };
            heap.push(kronrod21(&mut f, pa, pb));
        }
    }

    let totals = |heap: &BinaryHeap<Panel<N>>| {
        let mut v = [0.0; N];
        let mut e = [0.0; N];
        for p in heap.iter() {
            for c in 0..N {
                v[c] += p.value[c];
                e[c] += p.error[c];
            }
        }
        (v, e)
    };

    // Running totals drive the loop; they are re-summed periodically and on exit.
    let (mut value, mut error) = totals(&heap);
    let mut splits = 0usize;
    loop {
        if splits % 256 == 255 {
            (value, error) = totals(&heap);
        }
        let scale = value.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = cfg.abs_tol.max(cfg.rel_tol * scale);
        let worst_total = error.iter().fold(0.0_f64, |m, e| m.max(*e));
        if worst_total <= tol {
            let (value, error) = totals(&heap);
            return Quadrature {
                value,
                error,
                converged: true,
            };
        }
        if heap.len() >= cfg.max_panels {
            let (value, error) = totals(&heap);
            return Quadrature {
                value,
                error,
                converged: false,
            };
        }
        let Some(p) = heap.pop() else {
            unreachable!("at least one panel is always present");
        };
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // Panel cannot be split further in floating point.
            heap.push(p);
            let (value, error) = totals(&heap);
            return Quadrature {
                value,
                error,
                converged: false,
            };
        }
        let left = kronrod21(&mut f, p.a, mid);
        let right = kronrod21(&mut f, mid, p.b);
        for c in 0..N {
            value[c] += left.value[c] + right.value[c] - p.value[c];
            error[c] += left.error[c] + right.error[c] - p.error[c];
        }
        heap.push(left);
        heap.push(right);
        splits += 1;
    }
}

/// Scalar convenience wrapper around [`integrate_adaptive`].
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> (f64, f64, bool)
where
    F: FnMut(f64) -> f64,
{
    let q = integrate_adaptive(|x| [f(x)], a, b, &[], cfg);
    (q.value[0], q.error[0], q.converged)
}

/// Step-size control for [`dopri5`].
#[derive(Debug, Clone, Copy)]
pub struct OdeTolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self {
            rel: 1e-9,
            abs: 1e-12,
            max_step: f64::INFINITY,
            min_step: 1e-14,
        }
    }
}

/// Adaptive Dormand–Prince 5(4) integration of `y' = f(t, y)` from `t0` to `t1`.
///
/// Returns every accepted step, starting with `(t0, y0)` and ending exactly at
/// `t1`.
pub fn dopri5<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: &OdeTolerance,
) -> Result<Vec<(f64, [f64; N])>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // Difference between the fifth- and embedded fourth-order weights.
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(Error::domain("t_span", span, "must be positive"));
    }
    let mut out = vec![(t0, y0)];
    let mut t = t0;
    let mut y = y0;
    let mut h = (span * 1e-3).min(tol.max_step).max(tol.min_step);
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, &y);

    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        for s in 1..7 {
            let mut ys = y;
            for (i, yi) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                *yi += h * acc;
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut y_new = y;
        for (i, yi) in y_new.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += A[6][j] * kj[i];
            }
            *yi += h * acc;
        }
        let mut err = 0.0;
        for i in 0..N {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
            err += (h * e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y_new;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationFailure {
                    last_good_time: t - h,
                });
            }
            out.push((t, y));
            // FSAL: the seventh stage is the derivative at the new point.
            k[0] = k[6];
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(tol.max_step);
        if h < tol.min_step && t < t1 {
            return Err(Error::IntegrationFailure { last_good_time: t });
        }
    }
    if let Some(last) = out.last_mut() {
        last.0 = t1;
    }
    Ok(out)
}

fn guard(condition: f64) -> Result<()> {
    if condition.is_finite() && condition <= CONDITION_GUARD {
        Ok(())
    } else {
        Err(Error::IllConditioned { condition })
    }
}

/// Closed-form 2×2 inverse with a condition-number guard.
pub fn inverse2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if det == 0.0 || !det.is_finite() {
        return Err(Error::IllConditioned {
            condition: f64::INFINITY,
        });
    }
    let inv = Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det;
    guard(m.norm() * inv.norm())?;
    Ok(inv)
}

/// 4×4 inverse (cofactor expansion via nalgebra) with a condition-number guard.
pub fn inverse4(m: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let inv = m.try_inverse().ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    guard(m.norm() * inv.norm())?;
    Ok(inv)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton iteration on the
/// three-term recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_integrates_polynomials_exactly() {
        let q = integrate_adaptive(
            |x| [x.powi(6), 1.0],
            -1.0,
            2.0,
            &[],
            &QuadratureConfig::default(),
        );
        assert!((q.value[0] - (2f64.powi(7) + 1.0) / 7.0).abs() < 1e-12);
        assert!((q.value[1] - 3.0).abs() < 1e-14);
        assert!(q.converged);
    }

    #[test]
    fn adaptive_resolves_narrow_lorentzian() {
        let w = 1e-4;
        let (v, _, ok) = integrate_scalar(
            |x| w / std::f64::consts::PI / (x * x + w * w),
            -10.0,
            10.0,
            &QuadratureConfig {
                abs_tol: 1e-11,
                rel_tol: 1e-11,
                ..Default::default()
            },
        );
        let exact = 2.0 / std::f64::consts::PI * (10.0 / w).atan();
        assert!(ok);
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn dopri_matches_harmonic_oscillator() {
        let traj = dopri5(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            &OdeTolerance::default(),
        )
        .unwrap();
        let (t, y) = traj.last().copied().unwrap();
        assert_eq!(t, 10.0);
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] + 10f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn dopri_rejects_nonpositive_span() {
        let r = dopri5(
            |_, y: &[f64; 1]| *y,
            1.0,
            [1.0],
            1.0,
            &OdeTolerance::default(),
        );
        assert!(matches!(r, Err(Error::Domain { .. })));
    }

    #[test]
    fn inverse_guard_rejects_near_singular() {
        let m = Matrix2::new(1.0, 1.0, 1.0, 1.0 + 1e-14);
        assert!(matches!(inverse2(&m), Err(Error::IllConditioned { .. })));
        let ok = Matrix2::new(2.0, 1.0, 1.0, 3.0);
        assert!((inverse2(&ok).unwrap() * ok - Matrix2::identity()).norm() < 1e-15);
    }

    #[test]
    fn gauss_legendre_weights() {
        let (x, w) = gauss_legendre(12);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((m - 2.0 / 23.0).abs() < 1e-14);
    }
}
