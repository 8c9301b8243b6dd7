//! Shared fixtures for the kernel benchmarks.

use heralded_core::{DetectorModel, DimensionlessParams, FilterSpec};

/// Continuous-drive working point: κ = g = 0.4Ω, Δ = Ω, Γ = 10⁻⁶Ω.
pub fn cw_params(nbar: f64) -> DimensionlessParams {
    DimensionlessParams {
        kappa: 0.4,
        g: 0.4,
        gamma: 1e-6,
        delta: 1.0,
        nbar,
        n0: nbar,
    }
}

/// Pulsed working point: κ = 0.3Ω, g = 0.09Ω, blue detuned.
pub fn pulsed_params(nbar: f64) -> DimensionlessParams {
    DimensionlessParams {
        kappa: 0.3,
        g: 0.09,
        gamma: 1e-6,
        delta: -1.0,
        nbar,
        n0: 0.1,
    }
}

pub fn stokes_window(tau_m: f64) -> FilterSpec {
    FilterSpec::rect(-1.0, tau_m)
}

pub fn detector() -> DetectorModel {
    DetectorModel {
        eta: 0.6,
        dark: 0.0,
    }
}
