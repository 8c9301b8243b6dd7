//! Truncated Fock-space engine for the lossless pulsed protocol.
//!
//! A vacuum optical mode and a thermal mechanical mode (occupation `n₀`) pass
//! through the two-mode squeezer with `μ = cosh r`, `ν = sinh r`. The output
//! is block diagonal in the phonon-minus-photon number `s`: for each sector
//! it is a rank-one operator `w_s |ψ_s⟩⟨ψ_s|` with
//!
//! ```text
//! ψ_s = Σ_k a_k |k, s+k⟩,   a_k = i^k √C(s+k, k) (ν/μ)^k / μ^{s+1},
//! w_s = n₀^s / (1+n₀)^{s+1}.
//! ```
//!
//! Indices are `(photon, phonon)`. Truncation keeps every phonon number up to
//! `n_max` (photon numbers never exceed phonon numbers in this state).

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::CovarianceState;
use crate::io::fmt_f64;
use crate::params::DetectorModel;

/// Largest truncation the engine will build.
pub const N_MAX_CAP: usize = 512;
/// Minimum captured trace for an accepted state.
pub const MIN_TRUNCATION_WEIGHT: f64 = 0.999;
/// Default tail mass used when choosing `n_max`.
pub const DEFAULT_TAIL: f64 = 1e-3;
/// Tail mass needed for logarithmic negativity accurate to ~1e−4.
pub const NEGATIVITY_TAIL: f64 = 1e-8;
/// Maximum tail mass of a conditional phonon distribution.
pub const CONDITIONAL_TAIL: f64 = 1e-9;

/// Truncated output state of the lossless pulsed map.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBipartiteState {
    n_max: usize,
    /// `sectors[s][k] = √w_s · a_k` for `0 ≤ k ≤ n_max − s`.
    sectors: Vec<Vec<Complex64>>,
    truncation_weight: f64,
}

/// Mean phonon number of the output mechanical marginal, `μ²n₀ + ν²`.
pub fn output_phonon_mean(n0: f64, r: f64) -> f64 {
    r.cosh().powi(2) * n0 + r.sinh().powi(2)
}

/// Smallest `n_max` whose discarded phonon tail is below `tail`, or `None`
/// if that exceeds [`N_MAX_CAP`].
///
/// The mechanical marginal is thermal, so `P(m > N) = (n̄/(1+n̄))^{N+1}`.
pub fn truncation_for(n0: f64, r: f64, tail: f64) -> Option<usize> {
    let nm = output_phonon_mean(n0, r);
    if nm == 0.0 {
        return Some(0);
    }
    let ln_q = (nm / (1.0 + nm)).ln();
    let needed = (tail.ln() / ln_q).ceil() - 1.0;
    let n = needed.max(0.0) as usize;
    (n <= N_MAX_CAP).then_some(n)
}

fn check_inputs(n0: f64, r: f64) -> Result<()> {
    if !(n0 >= 0.0 && n0.is_finite()) {
        return Err(Error::domain("n0", n0, "must be non-negative"));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain("r", r, "must be non-negative"));
    }
    Ok(())
}

/// Builds the truncated output state.
pub fn pulsed_output_state(n0: f64, r: f64, n_max: usize) -> Result<FockBipartiteState> {
    check_inputs(n0, r)?;
    if n_max > N_MAX_CAP {
        return Err(Error::domain(
            "n_max",
            n_max as f64,
            "exceeds the truncation cap",
        ));
    }
    let mu = r.cosh();
    let t = r.tanh().powi(2);
    let ratio = n0 / (1.0 + n0);
    let mut sectors = Vec::with_capacity(n_max + 1);
    let mut total = 0.0;
    // w_s / μ^{2(s+1)} = (1/((1+n₀)μ²)) · (n₀/((1+n₀)μ²))^s
    let mut head = 1.0 / ((1.0 + n0) * mu * mu);
    for s in 0..=n_max {
        let len = n_max - s + 1;
        let mut row = Vec::with_capacity(len);
        let mut term = head;
        let mut phase = Complex64::new(1.0, 0.0);
        for k in 0..len {
            if k > 0 {
                term *= (s + k) as f64 / k as f64 * t;
                phase *= Complex64::i();
            }
            total += term;
            row.push(phase * term.sqrt());
        }
        sectors.push(row);
        head *= ratio / (mu * mu);
    }
    let state = FockBipartiteState {
        n_max,
        sectors,
        truncation_weight: total,
    };
    if total < MIN_TRUNCATION_WEIGHT {
        return Err(Error::Truncation {
            achieved: total,
            required: MIN_TRUNCATION_WEIGHT,
        });
    }
    Ok(state)
}

/// Builds the output state with the smallest truncation meeting `tail`.
pub fn pulsed_output_state_auto(n0: f64, r: f64, tail: f64) -> Result<FockBipartiteState> {
    check_inputs(n0, r)?;
    match truncation_for(n0, r, tail) {
        Some(n) => pulsed_output_state(n0, r, n),
        None => {
            let state = pulsed_output_state(n0, r, N_MAX_CAP)?;
            Err(Error::Truncation {
                achieved: state.truncation_weight,
                required: 1.0 - tail,
            })
        }
    }
}

impl FockBipartiteState {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Per-mode Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Trace captured by the truncation.
    pub fn truncation_weight(&self) -> f64 {
        self.truncation_weight
    }

    /// Matrix element `⟨k, m| ρ |l, n⟩` (photon, phonon).
    pub fn element(&self, k: usize, m: usize, l: usize, n: usize) -> Complex64 {
        if m < k || n < l || m - k != n - l || m > self.n_max || n > self.n_max {
            return Complex64::new(0.0, 0.0);
        }
        let row = &self.sectors[m - k];
        row[k] * row[l].conj()
    }

    /// Dense matrix over the basis index `k·dim + m`; intended for small `n_max`.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d * d, d * d, |i, j| {
            self.element(i / d, i % d, j / d, j % d)
        })
    }

    /// Photon-number distribution.
    pub fn photon_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        for row in &self.sectors {
            for (k, a) in row.iter().enumerate() {
                p[k] += a.norm_sqr();
            }
        }
        p
    }

    /// Phonon-number distribution.
    pub fn phonon_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        for (s, row) in self.sectors.iter().enumerate() {
            for (k, a) in row.iter().enumerate() {
                p[s + k] += a.norm_sqr();
            }
        }
        p
    }

    /// `(⟨a†a⟩, ⟨b†b⟩, ⟨ab⟩)` for photon `a` and phonon `b`, normalized by the
    /// captured trace.
    pub fn moments(&self) -> (f64, f64, Complex64) {
        let mut na = 0.0;
        let mut nb = 0.0;
        let mut ab = Complex64::new(0.0, 0.0);
        for (s, row) in self.sectors.iter().enumerate() {
            for (k, a) in row.iter().enumerate() {
                na += k as f64 * a.norm_sqr();
                nb += (s + k) as f64 * a.norm_sqr();
                if k + 1 < row.len() {
                    let amp = (((k + 1) * (s + k + 1)) as f64).sqrt();
                    ab += row[k + 1] * a.conj() * amp;
                }
            }
        }
        let w = self.truncation_weight;
        (na / w, nb / w, ab / w)
    }

    /// Covariance matrix over `(q, p, X, Y)` reconstructed from the moments.
    pub fn covariance(&self) -> CovarianceState {
        let (na, nb, ab) = self.moments();
        let (va, vb) = (na + 0.5, nb + 0.5);
        CovarianceState::unchecked(Matrix4::new(
            vb, 0.0, ab.re, ab.im, //
            0.0, vb, ab.im, -ab.re, //
            ab.re, ab.im, va, 0.0, //
            ab.im, -ab.re, 0.0, va,
        ))
    }

    /// Real symmetric block of the partial transpose at total number `total`,
    /// with the diagonal phases `i^k` removed. Basis: photon `j` in
    /// `[max(0, total − n_max), min(total, n_max)]`.
    fn partial_transpose_block(&self, total: usize) -> DMatrix<f64> {
        let lo = total.saturating_sub(self.n_max);
        let hi = total.min(self.n_max);
        let size = hi - lo + 1;
        DMatrix::from_fn(size, size, |i, j| {
            let (l, k) = (lo + i, lo + j);
            if k + l > total {
                return 0.0;
            }
            let row = &self.sectors[total - k - l];
            row[k].norm() * row[l].norm()
        })
    }

    /// `‖ρ^{T_photon}‖₁ / tr ρ`.
    pub fn partial_transpose_trace_norm(&self) -> f64 {
        let mut norm = 0.0;
        for total in 0..=2 * self.n_max {
            let block = self.partial_transpose_block(total);
            norm += block
                .symmetric_eigenvalues()
                .iter()
                .map(|v| v.abs())
                .sum::<f64>();
        }
        norm / self.truncation_weight
    }
}

/// `E_N = log₂ ‖ρ^{T_photon}‖₁` of the (renormalized) truncated state.
pub fn log_negativity_fock(state: &FockBipartiteState) -> f64 {
    state.partial_transpose_trace_norm().log2().max(0.0)
}

/// Closed-form click probability `1 − (1−d)/(1 + ην²(n₀+1))`.
pub fn p_click_pulsed(det: &DetectorModel, n0: f64, r: f64) -> f64 {
    let nu2 = r.sinh().powi(2);
    1.0 - (1.0 - det.dark) / (1.0 + det.eta * nu2 * (n0 + 1.0))
}

/// Diagonal phonon-number mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFockMixture {
    pub weights: Vec<f64>,
    pub normalized: bool,
}

impl RadialFockMixture {
    /// Clips entries in `[−1e−14, 0)` to zero; larger negatives are an error.
    pub fn new(mut weights: Vec<f64>, normalized: bool) -> Result<Self> {
        for w in &mut weights {
            if *w < 0.0 {
                if *w < -1e-14 {
                    return Err(Error::domain(
                        "weight",
                        *w,
                        "mixture weights must be non-negative",
                    ));
                }
                *w = 0.0;
            }
        }
        Ok(Self {
            weights,
            normalized,
        })
    }

    pub fn pure(k: usize) -> Self {
        let mut weights = vec![0.0; k + 1];
        weights[k] = 1.0;
        Self {
            weights,
            normalized: true,
        }
    }

    /// Thermal mixture `c_k(n̄) = n̄^k/(1+n̄)^{k+1}` truncated at `k_max`
    /// and renormalized.
    pub fn thermal(nbar: f64, k_max: usize) -> Self {
        let q = nbar / (1.0 + nbar);
        let mut w = Vec::with_capacity(k_max + 1);
        let mut c = 1.0 / (1.0 + nbar);
        for _ in 0..=k_max {
            w.push(c);
            c *= q;
        }
        Self {
            weights: w,
            normalized: false,
        }
        .normalize()
    }

    pub fn k_max(&self) -> usize {
        self.weights.len().saturating_sub(1)
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn normalize(mut self) -> Self {
        let s = self.sum();
        if s > 0.0 {
            self.weights.iter_mut().for_each(|w| *w /= s);
        }
        self.normalized = true;
        self
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| k as f64 * w)
            .sum::<f64>()
            / self.sum()
    }

    /// Wigner function at phase-space radius squared `x² + p²`.
    pub fn wigner_radial(&self, rho2: f64) -> f64 {
        let s = 2.0 * rho2;
        let mut total = 0.0;
        for_each_scaled_laguerre(self.k_max(), s, |k, l| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            total += self.weights[k] * sign * l;
        });
        total / PI
    }

    /// Writes `k, weight` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "weight"])?;
        for (k, v) in self.weights.iter().enumerate() {
            w.write_record([k.to_string(), fmt_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Scaled Laguerre values `e^{−s/2} L_k(s)` for `k = 0..=k_max`, produced by
/// the three-term recurrence applied to the scaled sequence.
pub fn for_each_scaled_laguerre(k_max: usize, s: f64, mut f: impl FnMut(usize, f64)) {
    let mut prev = (-0.5 * s).exp();
    f(0, prev);
    if k_max == 0 {
        return;
    }
    let mut cur = (1.0 - s) * prev;
    f(1, cur);
    for k in 1..k_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - s) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        f(k + 1, cur);
    }
}

/// Unscaled Laguerre polynomial `L_k(x)` by recurrence.
pub fn laguerre(k: usize, x: f64) -> f64 {
    let mut out = 0.0;
    for_each_scaled_laguerre(k, x, |j, v| {
        if j == k {
            out = v;
        }
    });
    out * (0.5 * x).exp()
}

/// `Σ_k ρ_k (−1)^k e^{−(x²+p²)} L_k(2(x²+p²)) / π`.
pub fn wigner_fock_mixture(mix: &RadialFockMixture, x: f64, p: f64) -> f64 {
    mix.wigner_radial(x * x + p * p)
}

struct WeightCoefficients {
    a: f64,
    b: f64,
    d: f64,
    dark: f64,
}

impl WeightCoefficients {
    fn new(det: &DetectorModel, n0: f64, r: f64) -> Self {
        let mu2 = r.cosh().powi(2);
        let nu2 = r.sinh().powi(2);
        Self {
            a: n0 + (1.0 + n0) * nu2,
            b: n0 + (1.0 + n0) * (1.0 - det.eta) * nu2,
            d: mu2 * (1.0 + n0),
            dark: det.dark,
        }
    }

    /// Raw weight mass beyond `k_max`; uses `D − a = 1`.
    fn tail(&self, k_max: usize) -> f64 {
        let e = k_max as i32 + 1;
        let ta = (self.a / self.d).powi(e) / (self.d - self.a);
        let tb = (self.b / self.d).powi(e) / (self.d - self.b);
        (ta - (1.0 - self.dark) * tb).max(0.0)
    }
}

/// Smallest `k_max` whose raw-weight tail is below `rel_tail · p_click`.
pub fn conditional_k_max(det: &DetectorModel, n0: f64, r: f64, rel_tail: f64) -> usize {
    let c = WeightCoefficients::new(det, n0, r);
    let target = rel_tail * p_click_pulsed(det, n0, r);
    let mut k = 0;
    while c.tail(k) > target && k < 100_000 {
        k += 1;
    }
    k
}

/// Conditional phonon weights after a click.
///
/// Raw weights `ρ_k = [a^k − (1−d) b^k] / D^{k+1}` with `a = n₀ + (1+n₀)ν²`,
/// `b = n₀ + (1+n₀)(1−η)ν²`, `D = μ²(1+n₀)`; they sum to [`p_click_pulsed`].
/// Returns `(normalized mixture, raw weights)`.
pub fn conditional_fock_weights_raw(
    det: &DetectorModel,
    n0: f64,
    r: f64,
    k_max: usize,
) -> Result<(RadialFockMixture, Vec<f64>)> {
    det.validate()?;
    check_inputs(n0, r)?;
    let c = WeightCoefficients::new(det, n0, r);
    let p = p_click_pulsed(det, n0, r);
    if !(p >= 1e-15) {
        return Err(Error::ZeroProbability { p_click: p });
    }
    let tail = c.tail(k_max);
    if tail > CONDITIONAL_TAIL * p {
        return Err(Error::Truncation {
            achieved: 1.0 - tail / p,
            required: 1.0 - CONDITIONAL_TAIL,
        });
    }
    let (qa, qb) = (c.a / c.d, c.b / c.d);
    let mut pa = 1.0 / c.d;
    let mut pb = 1.0 / c.d;
    let mut raw = Vec::with_capacity(k_max + 1);
    for _ in 0..=k_max {
        raw.push(pa - (1.0 - c.dark) * pb);
        pa *= qa;
        pb *= qb;
    }
    let mix = RadialFockMixture::new(raw.clone(), false)?.normalize();
    Ok((mix, raw))
}

/// Normalized conditional phonon mixture.
pub fn conditional_fock_weights(
    det: &DetectorModel,
    n0: f64,
    r: f64,
    k_max: usize,
) -> Result<RadialFockMixture> {
    conditional_fock_weights_raw(det, n0, r, k_max).map(|(m, _)| m)
}

/// Applies the click element `Π = 1 − Σ_n (1−d)(1−η)^n |n⟩⟨n|` to the photon
/// and traces it out. Returns the normalized phonon diagonal and `p_click`.
pub fn apply_geiger_povm(
    state: &FockBipartiteState,
    det: &DetectorModel,
) -> Result<(RadialFockMixture, f64)> {
    det.validate()?;
    let dim = state.dim();
    let click: Vec<f64> = (0..dim)
        .map(|k| 1.0 - (1.0 - det.dark) * (1.0 - det.eta).powi(k as i32))
        .collect();
    let diag: Vec<f64> = (0..dim)
        .map(|m| {
            click
                .iter()
                .enumerate()
                .take(m + 1)
                .map(|(k, pk)| pk * state.element(k, m, k, m).re)
                .sum()
        })
        .collect();
    let p: f64 = diag.iter().sum();
    if !(p >= 1e-15) {
        return Err(Error::ZeroProbability { p_click: p });
    }
    let mix = RadialFockMixture::new(diag, false)?.normalize();
    Ok((mix, p))
}
