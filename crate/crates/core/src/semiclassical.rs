//! Mean-field (semiclassical) dynamics of the driven cavity and mirror.
//!
//! Integrates, in units where Ω = 1,
//!
//! ```text
//! α' = −[i(Δ₀ − g₀Q) + κ]α + ε(t)
//! Q' = P
//! P' = −Q − ΓP + g₀|α|²
//! ```
//!
//! and checks that the enhanced coupling `g₀|α|` and the shifted detuning
//! `Δ₀ − g₀Q` stay constant over a pulse plateau, which is what the linearized
//! models assume.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::numerics::{dopri5, OdeTolerance};
use crate::params::PhysicalSetup;

/// Mean-field rates in units of Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldParams {
    pub delta0: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub g0: f64,
}

impl MeanFieldParams {
    pub fn from_setup(setup: &PhysicalSetup) -> Result<Self> {
        setup.validate()?;
        let omega = setup.mech_freq;
        Ok(Self {
            delta0: setup.detuning / omega,
            kappa: setup.kappa() / omega,
            gamma: setup.gamma() / omega,
            g0: setup.g0() / omega,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DriveEnvelope {
    /// `ε(t) = √(2κN_ph)·φ(t)` with `∫|φ|² = 1` over `[0, duration]`; the
    /// edges are raised-cosine ramps each lasting `edge_fraction·duration`.
    FlatTop {
        photon_number: f64,
        duration: f64,
        edge_fraction: f64,
    },
    /// Constant real amplitude ε (units of Ω) switched on at t = 0.
    Constant { epsilon: f64 },
}

/// Default ramp length of a flat-top pulse, as a fraction of its duration.
pub const DEFAULT_EDGE_FRACTION: f64 = 0.02;

impl DriveEnvelope {
    pub fn flat_top(photon_number: f64, duration: f64) -> Self {
        DriveEnvelope::FlatTop {
            photon_number,
            duration,
            edge_fraction: DEFAULT_EDGE_FRACTION,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DriveEnvelope::FlatTop {
                photon_number,
                duration,
                edge_fraction,
            } => {
                if !(photon_number >= 0.0) {
                    return Err(Error::domain(
                        "photon_number",
                        photon_number,
                        "must be non-negative",
                    ));
                }
                if !(duration > 0.0) {
                    return Err(Error::domain("duration", duration, "must be positive"));
                }
                if !(0.0..0.5).contains(&edge_fraction) {
                    return Err(Error::domain(
                        "edge_fraction",
                        edge_fraction,
                        "must lie in [0, 0.5)",
                    ));
                }
            }
            DriveEnvelope::Constant { epsilon } => {
                if !epsilon.is_finite() {
                    return Err(Error::domain("epsilon", epsilon, "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Normalized envelope φ(t) of a flat-top pulse; `None` for a constant drive.
    pub fn envelope(&self, t: f64) -> Option<f64> {
        let DriveEnvelope::FlatTop {
            duration,
            edge_fraction,
            ..
        } = *self
        else {
            return None;
        };
        if !(0.0..=duration).contains(&t) {
            return Some(0.0);
        }
        let ramp = edge_fraction * duration;
        // ∫ shape² = τ − 2w + 2·(3w/8)
        let norm = (duration - 1.25 * ramp).sqrt();
        let shape = if ramp > 0.0 && t < ramp {
            0.5 * (1.0 - (std::f64::consts::PI * t / ramp).cos())
        } else if ramp > 0.0 && t > duration - ramp {
            0.5 * (1.0 - (std::f64::consts::PI * (duration - t) / ramp).cos())
        } else {
            1.0
        };
        Some(shape / norm)
    }

    /// Drive amplitude ε(t) in units of Ω.
    pub fn amplitude(&self, t: f64, kappa: f64) -> f64 {
        match *self {
            DriveEnvelope::FlatTop { photon_number, .. } => {
                (2.0 * kappa * photon_number).sqrt() * self.envelope(t).unwrap_or(0.0)
            }
            DriveEnvelope::Constant { epsilon } => {
                if t >= 0.0 {
                    epsilon
                } else {
                    0.0
                }
            }
        }
    }

    /// Time window over which the amplitude is flat, if any.
    fn plateau(&self) -> Option<(f64, f64)> {
        match *self {
            DriveEnvelope::FlatTop {
                duration,
                edge_fraction,
                ..
            } => Some((edge_fraction * duration, duration * (1.0 - edge_fraction))),
            DriveEnvelope::Constant { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldState {
    pub alpha: Complex64,
    pub q: f64,
    pub p: f64,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<MeanFieldState>,
    /// `(max − min)/max` of |α| over the plateau (or the whole run for a
    /// constant drive).
    pub alpha_variation: f64,
    /// `(max − min)/|Δ₀|` of `Δ₀ − g₀Q` over the same window.
    pub detuning_variation: f64,
}

/// Integrates the mean-field equations from rest over `[0, t_span]`.
///
/// For a flat-top drive the plateau window used for the variation statistics
/// skips the ramps and the first five cavity lifetimes.
pub fn evolve_mean_field(
    params: &MeanFieldParams,
    drive: &DriveEnvelope,
    t_span: f64,
    tol: &OdeTolerance,
) -> Result<Trajectory> {
    drive.validate()?;
    if !(t_span > 0.0 && t_span.is_finite()) {
        return Err(Error::domain("t_span", t_span, "must be positive"));
    }
    let MeanFieldParams {
        delta0,
        kappa,
        gamma,
        g0,
    } = *params;

    // Cap the step inside flat-top pulses so the ramps are never stepped over.
    let mut tol = *tol;
    if let DriveEnvelope::FlatTop {
        duration,
        edge_fraction,
        ..
    } = *drive
    {
        let ramp = (edge_fraction * duration).max(duration * 1e-3);
        tol.max_step = tol.max_step.min(ramp / 4.0);
    }

    let rhs = |t: f64, y: &[f64; 4]| {
        let alpha = Complex64::new(y[0], y[1]);
        let rate = Complex64::new(kappa, delta0 - g0 * y[2]);
        let da = -rate * alpha + drive.amplitude(t, kappa);
        [
            da.re,
            da.im,
            y[3],
            -y[2] - gamma * y[3] + g0 * alpha.norm_sqr(),
        ]
    };
    let raw = dopri5(rhs, 0.0, [0.0; 4], t_span, &tol)?;
    let states: Vec<MeanFieldState> = raw
        .iter()
        .map(|(t, y)| MeanFieldState {
            alpha: Complex64::new(y[0], y[1]),
            q: y[2],
            p: y[3],
            time: *t,
        })
        .collect();

    let (lo, hi) = match drive.plateau() {
        Some((a, b)) => (a + 5.0 / kappa.max(1e-300), b),
        None => (0.0, t_span),
    };
    let window: Vec<&MeanFieldState> = states
        .iter()
        .filter(|s| s.time >= lo && s.time <= hi.min(t_span))
        .collect();
    let (alpha_variation, detuning_variation) = if window.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let mags = window.iter().map(|s| s.alpha.norm());
        let (amin, amax) = mags.fold((f64::INFINITY, 0.0_f64), |(a, b), m| (a.min(m), b.max(m)));
        let dets = window.iter().map(|s| delta0 - g0 * s.q);
        let (dmin, dmax) = dets.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| {
            (a.min(d), b.max(d))
        });
        let av = if amax > 0.0 {
            (amax - amin) / amax
        } else {
            0.0
        };
        let dv = if delta0 != 0.0 {
            (dmax - dmin) / delta0.abs()
        } else {
            dmax - dmin
        };
        (av, dv)
    };
    Ok(Trajectory {
        states,
        alpha_variation,
        detuning_variation,
    })
}

/// Steady-state mean fields of a constant drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyMeans {
    pub alpha: f64,
    pub q: f64,
    pub p: f64,
    pub delta: f64,
}

/// `α_s = |ε|/√(Δ₀²+κ²)`, `q_s = g₀α_s²`, `p_s = 0`, `Δ_s = Δ₀ − g₀q_s`
/// (units of Ω). The detuning entering α_s is the bare Δ₀, i.e. the mirror
/// shift is assumed compensated.
pub fn steady_state_means(params: &MeanFieldParams, epsilon: f64) -> SteadyMeans {
    let alpha = epsilon.abs() / (params.delta0.powi(2) + params.kappa.powi(2)).sqrt();
    let q = params.g0 * alpha * alpha;
    SteadyMeans {
        alpha,
        q,
        p: 0.0,
        delta: params.delta0 - params.g0 * q,
    }
}

/// Writes `t, re_alpha, im_alpha, q, p` rows.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "re_alpha", "im_alpha", "q", "p"])?;
    for s in &traj.states {
        w.write_record([
            fmt_f64(s.time),
            fmt_f64(s.alpha.re),
            fmt_f64(s.alpha.im),
            fmt_f64(s.q),
            fmt_f64(s.p),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Same as [`write_trajectory_csv`] but into any writer.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "re_alpha", "im_alpha", "q", "p"])?;
    for s in &traj.states {
        w.write_record([
            fmt_f64(s.time),
            fmt_f64(s.alpha.re),
            fmt_f64(s.alpha.im),
            fmt_f64(s.q),
            fmt_f64(s.p),
        ])?;
    }
    w.flush()?;
    Ok(())
}
